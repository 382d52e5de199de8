#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "fedleak/data.hpp"
#include "fedleak/federation.hpp"
#include "fedleak/model.hpp"
#include "fedleak/pca.hpp"

namespace fedleak {

struct ProjectionPoint {
  size_t client_id = 0;
  double x = 0.0;
  double y = 0.0;
  size_t dominant_label = 0;
  double dominant_fraction = 0.0;  // suitable as a marker-size field
};

// Selects either one layer's parameter tensors or the whole model.
struct LayerSelector {
  bool all = true;
  size_t layer_index = 0;

  static LayerSelector every() { return LayerSelector{true, 0}; }
  static LayerSelector layer(size_t index) {
    return LayerSelector{false, index};
  }
};

// Argmax with lowest-index tie-break.
std::pair<size_t, double> dominant_label(const LabelDistribution& dist);

// Flattens the selected slice of every client's parameters, fits a 2-D PCA
// across clients, and tags each projected point with that client's dominant
// label. dists[i] describes client i's training labels; they are metadata
// only and never influence the projection.
std::vector<ProjectionPoint> project_clients(
    const std::vector<ModelParams>& params_list,
    const std::vector<LabelDistribution>& dists, const LayerSelector& selector);

// Leave-one-out clustering score: the fraction of points whose k nearest
// neighbors (Euclidean, equal distances broken by lower index) have a
// majority label (ties broken by lower label) matching the point's own.
double knn_purity(const std::vector<std::pair<double, double>>& points,
                  const std::vector<size_t>& labels, size_t k);
double knn_purity(const std::vector<ProjectionPoint>& points, size_t k);

// Distances between the centroids of the requested label pairs, normalized
// by the mean distance over all distinct centroid pairs so the scale of the
// embedding drops out.
std::vector<double> semantic_proximity(
    const std::vector<std::pair<double, double>>& points,
    const std::vector<size_t>& labels,
    const std::vector<std::pair<size_t, size_t>>& pair_list);

enum class PartitionScheme { Uniform, Skewed8020 };

struct AutoencoderOutcome {
  std::vector<ProjectionPoint> points;
  double purity = 0.0;
};

// Per-client autoencoders trained from one shared init on MNIST-shaped data,
// then projected to 2-D. The reconstruction objective never sees a label;
// labels only tag and score the resulting points.
AutoencoderOutcome autoencoder_experiment(const Dataset& dataset,
                                          size_t clients,
                                          size_t samples_per_client,
                                          PartitionScheme scheme, size_t epochs,
                                          size_t batch_size, double eta,
                                          uint64_t seed);

}  // namespace fedleak
