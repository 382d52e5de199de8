#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "fedleak/data.hpp"
#include "fedleak/model.hpp"
#include "fedleak/rng.hpp"

namespace fedleak {

struct FedConfig {
  size_t clients = 1;     // K
  double fraction = 1.0;  // C, fraction of clients selected per round
  size_t rounds = 1;      // T
  size_t epochs = 1;      // E, local epochs per client update
  size_t batch_size = 1;  // B
  double eta = 0.01;
  uint64_t seed = 0;
};

void validate_fed_config(const FedConfig& fed);

enum class NoiseKind { None, Gaussian, Laplace };
enum class NoiseInjection { PerGradient, WeightDelta };

struct NoiseConfig {
  NoiseKind kind = NoiseKind::None;
  double scale = 0.0;  // gaussian: std deviation; laplace: diversity b
  NoiseInjection injection = NoiseInjection::PerGradient;
};

// Gaussian N(0, scale^2) or Laplace(0, b=scale) added i.i.d. per value.
// kind none or scale 0 returns the input unchanged without touching rng,
// so a zero-scale run is bitwise identical to a noiseless one.
Gradients add_noise(const Gradients& grads, const NoiseConfig& noise,
                    Rng& rng);

struct ClientResult {
  ModelParams params;
  double mean_loss = 0.0;  // per-sample train loss over all processed batches
};

// One local training pass: E epochs of seeded shuffling and mini-batch SGD
// starting from the broadcast global params. Cross-entropy models train on
// class labels; mean-squared-error models reconstruct their inputs (labels
// never enter that path). injection=per-gradient perturbs every gradient
// before the step; weight-delta trains clean and noises the final update
// once. The shuffle and noise streams are derived separately from `seed`, so
// batch order is identical with and without noise.
ClientResult client_update(const ModelSpec& spec,
                           const ModelParams& global_params,
                           const Dataset& dataset,
                           const std::vector<size_t>& indices, size_t epochs,
                           size_t batch_size, double eta,
                           const NoiseConfig& noise, uint64_t seed);

// ceil(C*K) distinct ids, uniform without replacement, ascending order.
std::vector<size_t> select_clients(size_t clients, double fraction,
                                   size_t round, uint64_t seed);

// Elementwise weighted mean, weights normalized by their sum; callers pass
// results in ascending client-id order so summation order is fixed.
ModelParams aggregate(const std::vector<ModelParams>& params_list,
                      const std::vector<double>& weights);

struct RoundLog {
  size_t round = 0;
  std::vector<size_t> selected;
  double accuracy = 0.0;
  double mean_client_loss = 0.0;
};

struct FedResult {
  ModelParams params;
  std::vector<RoundLog> log;
};

FedResult fed_train(const ModelSpec& spec, const FedConfig& fed,
                    const NoiseConfig& noise, const Dataset& dataset,
                    const Partition& partition, const Dataset& test_set);

// Fraction of test samples whose argmax prediction matches the label.
double evaluate(const ModelSpec& spec, const ModelParams& params,
                const Dataset& test_set);

// Header round,accuracy,mean_client_loss,selected_ids; ids ;-separated.
std::string round_log_csv(const std::vector<RoundLog>& log);

}  // namespace fedleak
