#include "fedleak/federation.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>
#include <stdexcept>

namespace fedleak {

void validate_fed_config(const FedConfig& fed) {
  if (fed.clients == 0) throw std::invalid_argument("client count must be > 0");
  if (!(fed.fraction > 0.0) || fed.fraction > 1.0)
    throw std::invalid_argument("client fraction must be in (0,1]");
  if (fed.epochs == 0) throw std::invalid_argument("local epochs must be > 0");
  if (fed.batch_size == 0) throw std::invalid_argument("batch size must be > 0");
  if (!(fed.eta > 0.0)) throw std::invalid_argument("eta must be positive");
}

Gradients add_noise(const Gradients& grads, const NoiseConfig& noise,
                    Rng& rng) {
  if (noise.kind == NoiseKind::None || noise.scale == 0.0) return grads;
  if (noise.scale < 0.0)
    throw std::invalid_argument("noise scale must be non-negative");
  Gradients out = grads;
  for (auto& e : out.entries)
    for (double& v : e.tensor.values)
      v += noise.kind == NoiseKind::Gaussian
               ? sample_gaussian(rng, noise.scale)
               : sample_laplace(rng, noise.scale);
  return out;
}

ClientResult client_update(const ModelSpec& spec,
                           const ModelParams& global_params,
                           const Dataset& dataset,
                           const std::vector<size_t>& indices, size_t epochs,
                           size_t batch_size, double eta,
                           const NoiseConfig& noise, uint64_t seed) {
  if (indices.empty()) throw std::invalid_argument("client has no samples");
  if (batch_size == 0) throw std::invalid_argument("batch size must be > 0");
  if (epochs == 0) {
    // Degenerate but legal: no training happened, the update is the broadcast.
    ClientResult res;
    res.params = global_params;
    return res;
  }

  Rng shuffle_rng = make_rng(mix_seed(seed, kStreamShuffle));
  Rng noise_rng = make_rng(mix_seed(seed, kStreamNoise));
  const bool noisy = noise.kind != NoiseKind::None && noise.scale != 0.0;
  const bool per_grad = noisy && noise.injection == NoiseInjection::PerGradient;

  ModelParams w = global_params;
  std::vector<size_t> order = indices;
  double loss_sum = 0.0;
  size_t seen = 0;

  for (size_t epoch = 0; epoch < epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), shuffle_rng);
    for (size_t start = 0; start < order.size(); start += batch_size) {
      size_t end = std::min(start + batch_size, order.size());
      std::vector<size_t> batch_idx(order.begin() + start,
                                    order.begin() + end);
      Tensor x = dataset.batch(batch_idx);
      LossGrad lg;
      if (spec.loss == LossKind::CrossEntropy) {
        lg = loss_and_grad(spec, w, x, dataset.batch_labels(batch_idx));
      } else {
        Tensor target = x;
        target.shape = {batch_idx.size(), dataset.sample_numel()};
        lg = loss_and_grad(spec, w, x, target);
      }
      loss_sum += lg.loss * double(batch_idx.size());
      seen += batch_idx.size();
      if (per_grad) {
        w = sgd_step(w, add_noise(lg.grads, noise, noise_rng), eta);
      } else {
        w = sgd_step(w, lg.grads, eta);
      }
    }
  }

  if (noisy && noise.injection == NoiseInjection::WeightDelta) {
    // Noise the accumulated update (w - global) once, i.e. add it to w.
    NoiseConfig once = noise;
    for (auto& e : w.entries) {
      for (double& v : e.tensor.values)
        v += once.kind == NoiseKind::Gaussian
                 ? sample_gaussian(noise_rng, once.scale)
                 : sample_laplace(noise_rng, once.scale);
    }
  }

  ClientResult res;
  res.params = std::move(w);
  res.mean_loss = loss_sum / double(seen);
  return res;
}

std::vector<size_t> select_clients(size_t clients, double fraction,
                                   size_t round, uint64_t seed) {
  if (clients == 0) throw std::invalid_argument("client count must be > 0");
  if (!(fraction > 0.0) || fraction > 1.0)
    throw std::invalid_argument("client fraction must be in (0,1]");
  size_t m = size_t(std::ceil(fraction * double(clients)));
  m = std::min(m, clients);

  std::vector<size_t> ids(clients);
  for (size_t i = 0; i < clients; ++i) ids[i] = i;
  Rng rng = make_rng(mix_seed(seed, kStreamSelect, round));
  for (size_t i = 0; i < m; ++i) {
    std::uniform_int_distribution<size_t> pick(i, clients - 1);
    std::swap(ids[i], ids[pick(rng)]);
  }
  ids.resize(m);
  std::sort(ids.begin(), ids.end());
  return ids;
}

ModelParams aggregate(const std::vector<ModelParams>& params_list,
                      const std::vector<double>& weights) {
  if (params_list.empty())
    throw std::invalid_argument("nothing to aggregate");
  if (params_list.size() != weights.size())
    throw std::invalid_argument("weight count does not match params count");
  double wsum = 0.0;
  for (double w : weights) {
    if (w < 0.0) throw std::invalid_argument("negative aggregation weight");
    wsum += w;
  }
  if (wsum <= 0.0) throw std::invalid_argument("aggregation weights sum to 0");

  ModelParams out = params_list[0];
  for (auto& e : out.entries)
    for (double& v : e.tensor.values) v = 0.0;
  for (size_t k = 0; k < params_list.size(); ++k) {
    const ModelParams& p = params_list[k];
    if (p.entries.size() != out.entries.size())
      throw std::invalid_argument("aggregate: entry count mismatch");
    double w = weights[k] / wsum;
    for (size_t e = 0; e < out.entries.size(); ++e) {
      if (p.entries[e].tensor.shape != out.entries[e].tensor.shape)
        throw std::invalid_argument("aggregate: shape mismatch at entry " +
                                    std::to_string(e));
      auto& acc = out.entries[e].tensor.values;
      const auto& src = p.entries[e].tensor.values;
      for (size_t i = 0; i < acc.size(); ++i) acc[i] += w * src[i];
    }
  }
  return out;
}

FedResult fed_train(const ModelSpec& spec, const FedConfig& fed,
                    const NoiseConfig& noise, const Dataset& dataset,
                    const Partition& partition, const Dataset& test_set) {
  validate_fed_config(fed);
  if (partition.assignments.size() != fed.clients)
    throw std::invalid_argument("partition covers " +
                                std::to_string(partition.assignments.size()) +
                                " clients, config says " +
                                std::to_string(fed.clients));

  FedResult result;
  result.params = init_params(spec, mix_seed(fed.seed, kStreamInit));

  for (size_t t = 0; t < fed.rounds; ++t) {
    std::vector<size_t> selected =
        select_clients(fed.clients, fed.fraction, t, fed.seed);
    std::vector<ModelParams> locals;
    std::vector<double> weights;
    locals.reserve(selected.size());
    double loss_sum = 0.0;
    for (size_t k : selected) {
      ClientResult res = client_update(
          spec, result.params, dataset, partition.assignments[k], fed.epochs,
          fed.batch_size, fed.eta, noise, client_stream_seed(fed.seed, t, k));
      loss_sum += res.mean_loss;
      locals.push_back(std::move(res.params));
      weights.push_back(double(partition.assignments[k].size()));
    }
    result.params = aggregate(locals, weights);

    RoundLog log;
    log.round = t;
    log.selected = selected;
    log.accuracy = evaluate(spec, result.params, test_set);
    log.mean_client_loss = loss_sum / double(selected.size());
    result.log.push_back(std::move(log));
  }
  return result;
}

double evaluate(const ModelSpec& spec, const ModelParams& params,
                const Dataset& test_set) {
  if (test_set.size() == 0)
    throw std::invalid_argument("test set is empty");
  constexpr size_t kChunk = 256;
  size_t correct = 0;
  std::vector<size_t> idx;
  for (size_t start = 0; start < test_set.size(); start += kChunk) {
    size_t end = std::min(start + kChunk, test_set.size());
    idx.clear();
    for (size_t i = start; i < end; ++i) idx.push_back(i);
    Tensor out = forward(spec, params, test_set.batch(idx));
    size_t width = out.numel() / idx.size();
    for (size_t r = 0; r < idx.size(); ++r) {
      size_t arg = 0;
      for (size_t c = 1; c < width; ++c)
        if (out.values[r * width + c] > out.values[r * width + arg]) arg = c;
      if (int(arg) == test_set.labels[idx[r]]) ++correct;
    }
  }
  return double(correct) / double(test_set.size());
}

std::string round_log_csv(const std::vector<RoundLog>& log) {
  std::ostringstream os;
  os << "round,accuracy,mean_client_loss,selected_ids\n";
  char buf[32];
  for (const auto& r : log) {
    os << r.round << ",";
    std::snprintf(buf, sizeof buf, "%.17g", r.accuracy);
    os << buf << ",";
    std::snprintf(buf, sizeof buf, "%.17g", r.mean_client_loss);
    os << buf << ",";
    for (size_t i = 0; i < r.selected.size(); ++i) {
      if (i) os << ";";
      os << r.selected[i];
    }
    os << "\n";
  }
  return os.str();
}

}  // namespace fedleak
