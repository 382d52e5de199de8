#include "fedleak/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace fedleak {

std::pair<size_t, double> dominant_label(const LabelDistribution& dist) {
  validate_distribution(dist);
  size_t best = 0;
  for (size_t i = 1; i < dist.probs.size(); ++i)
    if (dist.probs[i] > dist.probs[best]) best = i;
  return {best, dist.probs[best]};
}

namespace {

std::vector<double> selected_slice(const ModelParams& params,
                                   const LayerSelector& selector) {
  if (selector.all) return flatten(params);
  std::vector<double> out;
  for (const ParamEntry& entry : params.entries)
    if (entry.layer_index == selector.layer_index)
      out.insert(out.end(), entry.tensor.values.begin(),
                 entry.tensor.values.end());
  if (out.empty())
    throw std::invalid_argument("layer " + std::to_string(selector.layer_index) +
                                " has no parameters");
  return out;
}

}  // namespace

std::vector<ProjectionPoint> project_clients(
    const std::vector<ModelParams>& params_list,
    const std::vector<LabelDistribution>& dists,
    const LayerSelector& selector) {
  if (params_list.size() < 3)
    throw std::invalid_argument("projection needs at least 3 clients");
  if (dists.size() != params_list.size())
    throw std::invalid_argument("one label distribution per client required");

  std::vector<std::vector<double>> rows;
  rows.reserve(params_list.size());
  for (const ModelParams& params : params_list)
    rows.push_back(selected_slice(params, selector));

  PcaModel pca = pca_fit(rows, 2);
  std::vector<ProjectionPoint> points(rows.size());
  for (size_t i = 0; i < rows.size(); ++i) {
    std::vector<double> xy = pca_apply(pca, rows[i]);
    auto [label, fraction] = dominant_label(dists[i]);
    points[i] = ProjectionPoint{i, xy[0], xy[1], label, fraction};
  }
  return points;
}

double knn_purity(const std::vector<std::pair<double, double>>& points,
                  const std::vector<size_t>& labels, size_t k) {
  const size_t n = points.size();
  if (labels.size() != n)
    throw std::invalid_argument("one label per point required");
  if (k == 0) throw std::invalid_argument("k must be positive");
  if (k >= n)
    throw std::invalid_argument("k must be smaller than the point count");

  size_t matches = 0;
  std::vector<std::pair<double, size_t>> order;
  order.reserve(n - 1);
  for (size_t i = 0; i < n; ++i) {
    order.clear();
    for (size_t j = 0; j < n; ++j) {
      if (j == i) continue;
      const double dx = points[j].first - points[i].first;
      const double dy = points[j].second - points[i].second;
      order.emplace_back(dx * dx + dy * dy, j);
    }
    std::partial_sort(order.begin(), order.begin() + ptrdiff_t(k),
                      order.end());

    std::vector<size_t> counts;
    for (size_t m = 0; m < k; ++m) {
      const size_t label = labels[order[m].second];
      if (label >= counts.size()) counts.resize(label + 1, 0);
      ++counts[label];
    }
    size_t majority = 0;
    for (size_t label = 1; label < counts.size(); ++label)
      if (counts[label] > counts[majority]) majority = label;
    if (majority == labels[i]) ++matches;
  }
  return double(matches) / double(n);
}

double knn_purity(const std::vector<ProjectionPoint>& points, size_t k) {
  std::vector<std::pair<double, double>> coords(points.size());
  std::vector<size_t> labels(points.size());
  for (size_t i = 0; i < points.size(); ++i) {
    coords[i] = {points[i].x, points[i].y};
    labels[i] = points[i].dominant_label;
  }
  return knn_purity(coords, labels, k);
}

std::vector<double> semantic_proximity(
    const std::vector<std::pair<double, double>>& points,
    const std::vector<size_t>& labels,
    const std::vector<std::pair<size_t, size_t>>& pair_list) {
  if (points.size() != labels.size())
    throw std::invalid_argument("one label per point required");

  size_t label_span = 0;
  for (size_t label : labels) label_span = std::max(label_span, label + 1);
  std::vector<std::pair<double, double>> centroid(label_span, {0.0, 0.0});
  std::vector<size_t> count(label_span, 0);
  for (size_t i = 0; i < points.size(); ++i) {
    centroid[labels[i]].first += points[i].first;
    centroid[labels[i]].second += points[i].second;
    ++count[labels[i]];
  }
  std::vector<size_t> present;
  for (size_t label = 0; label < label_span; ++label) {
    if (count[label] == 0) continue;
    centroid[label].first /= double(count[label]);
    centroid[label].second /= double(count[label]);
    present.push_back(label);
  }
  if (present.size() < 2)
    throw std::invalid_argument("need at least two label clusters");

  auto dist = [&](size_t a, size_t b) {
    const double dx = centroid[a].first - centroid[b].first;
    const double dy = centroid[a].second - centroid[b].second;
    return std::sqrt(dx * dx + dy * dy);
  };

  double mean = 0.0;
  size_t pairs = 0;
  for (size_t a = 0; a < present.size(); ++a)
    for (size_t b = a + 1; b < present.size(); ++b) {
      mean += dist(present[a], present[b]);
      ++pairs;
    }
  mean /= double(pairs);

  std::vector<double> out;
  out.reserve(pair_list.size());
  for (const auto& [a, b] : pair_list) {
    if (a >= label_span || count[a] == 0)
      throw std::invalid_argument("label " + std::to_string(a) +
                                  " not present");
    if (b >= label_span || count[b] == 0)
      throw std::invalid_argument("label " + std::to_string(b) +
                                  " not present");
    // All centroids coincident: every distance is zero, including the mean.
    out.push_back(mean > 0.0 ? dist(a, b) / mean : 0.0);
  }
  return out;
}

AutoencoderOutcome autoencoder_experiment(const Dataset& dataset,
                                          size_t clients,
                                          size_t samples_per_client,
                                          PartitionScheme scheme, size_t epochs,
                                          size_t batch_size, double eta,
                                          uint64_t seed) {
  if (dataset.sample_numel() != 784 || dataset.label_count != 10)
    throw std::invalid_argument(
        "dataset is not MNIST-shaped (784-value samples, 10 labels)");

  Partition partition;
  if (scheme == PartitionScheme::Skewed8020) {
    if (clients % dataset.label_count != 0)
      throw std::invalid_argument(
          "80/20 scheme needs a client count divisible by the label count");
    partition = partition_8020(dataset, clients / dataset.label_count,
                               samples_per_client, seed)
                    .partition;
  } else {
    partition = partition_uniform(dataset, clients, samples_per_client, seed);
  }

  const ModelSpec spec = mnist_autoencoder();
  const ModelParams init = init_params(spec, mix_seed(seed, kStreamInit));

  std::vector<ModelParams> locals;
  std::vector<LabelDistribution> dists;
  locals.reserve(clients);
  dists.reserve(clients);
  for (size_t k = 0; k < clients; ++k) {
    ClientResult result =
        client_update(spec, init, dataset, partition.assignments[k], epochs,
                      batch_size, eta, NoiseConfig{},
                      client_stream_seed(seed, 0, k));
    locals.push_back(std::move(result.params));
    dists.push_back(empirical_distribution(partition.assignments[k], dataset));
  }

  AutoencoderOutcome outcome;
  outcome.points = project_clients(locals, dists, LayerSelector::every());
  outcome.purity = knn_purity(outcome.points, 5);
  return outcome;
}

}  // namespace fedleak
