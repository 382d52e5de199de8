#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "fedleak/rng.hpp"
#include "fedleak/tensor.hpp"

namespace fedleak {

struct Dataset {
  std::vector<size_t> sample_shape;  // per-sample tensor shape, e.g. {28,28}
  size_t label_count = 0;
  std::vector<double> inputs;  // size() * sample_numel(), row-major
  std::vector<int> labels;

  size_t size() const { return labels.size(); }
  size_t sample_numel() const { return shape_numel(sample_shape); }
  // Gathers the given samples into a batch tensor [n, sample_shape...].
  Tensor batch(const std::vector<size_t>& indices) const;
  std::vector<int> batch_labels(const std::vector<size_t>& indices) const;
};

struct Partition {
  std::vector<std::vector<size_t>> assignments;  // per-client sample indices
};

struct LabelDistribution {
  std::vector<double> probs;
};

// Throws unless probs are non-negative and sum to 1 within 1e-9.
void validate_distribution(const LabelDistribution& dist);

Dataset load_mnist(const std::string& images_path,
                   const std::string& labels_path);
Dataset load_cifar10(const std::vector<std::string>& batch_paths);

// Class-dependent Gaussian blobs clipped to [0,1]; labels assigned
// round-robin so every class has ~n/L samples. Linearly separable by
// construction (distinct class means, shared per-pixel spread `sigma`).
// The class means are a function of seed only; `split` varies just the
// sample draws, so (seed, 0) and (seed, 1) are train/test splits of one
// distribution.
Dataset synth_dataset(size_t label_count, size_t n,
                      const std::vector<size_t>& sample_shape, uint64_t seed,
                      uint64_t split = 0, double sigma = 0.15);

Partition partition_uniform(const Dataset& dataset, size_t clients,
                            size_t n_per_client, uint64_t seed);

struct SkewedPartition {
  Partition partition;
  std::vector<int> dominant;  // per-client dominant label
};

// For each label, clients_per_label clients holding floor(0.8*n) samples of
// that label; the remainder is spread round-robin over the other labels in
// ascending order.
SkewedPartition partition_8020(const Dataset& dataset, size_t clients_per_label,
                               size_t n_per_client, uint64_t seed);

LabelDistribution sample_dirichlet(double alpha, size_t label_count, Rng& rng);
LabelDistribution sample_dirichlet(double alpha, size_t label_count,
                                   uint64_t seed);

// Mutable per-label pools of still-unclaimed sample indices. Draws remove
// indices, keeping successive client sets disjoint.
struct IndexPool {
  std::vector<std::vector<size_t>> by_label;

  static IndexPool from_dataset(const Dataset& dataset);
  static IndexPool from_indices(const Dataset& dataset,
                                const std::vector<size_t>& indices);
  size_t remaining() const;
};

// Multinomial label counts from dist (sequential binomial decomposition),
// then uniform without-replacement draws within each label's pool. When a
// class pool runs dry the unmet portion is re-drawn from the classes that
// still have samples, so the realized label mix can differ from dist; callers
// should record empirical_distribution of the result.
std::vector<size_t> partition_from_distribution(const Dataset& dataset,
                                                const LabelDistribution& dist,
                                                size_t n, uint64_t seed,
                                                IndexPool& pool);

LabelDistribution empirical_distribution(const std::vector<size_t>& indices,
                                         const Dataset& dataset);

}  // namespace fedleak
