#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "fedleak/data.hpp"
#include "fedleak/federation.hpp"
#include "fedleak/model.hpp"
#include "fedleak/pca.hpp"

namespace fedleak {

struct MetaSample {
  std::vector<double> x;  // PCA-reduced flattened client params
  LabelDistribution y;    // realized label distribution the client trained on
  double alpha = 0.0;     // concentration the distribution was drawn with
};

struct MetaDataset {
  std::vector<MetaSample> train;
  std::vector<MetaSample> test;

  size_t x_dim() const { return train.empty() ? 0 : train[0].x.size(); }
  size_t label_count() const {
    return train.empty() ? 0 : train[0].y.probs.size();
  }
};

struct PredictorSpec {
  size_t input_dim = 10;
  std::vector<size_t> hidden = {1000, 1000, 1000, 1000,
                                1000, 1000, 1000, 1000};
  size_t output_dim = 10;
  double eta = 1e-3;       // eta'
  size_t epochs = 50;      // E_hat
  size_t batch_size = 64;  // B_hat
};

// dense+relu per hidden width, then dense -> softmax, cross-entropy.
ModelSpec predictor_model_spec(const PredictorSpec& pspec);

// Local-training settings for the adversary's dummy clients, including how
// many proxy samples each one draws.
struct AttackClientHyper {
  size_t epochs = 1;
  size_t batch_size = 32;
  double eta = 1e-4;
  size_t samples_per_client = 500;
};

struct MetaBuildResult {
  MetaDataset meta;
  PcaModel pca;
};

// Algorithm: per alpha and dummy client, sample a Dirichlet label
// distribution, draw a disjoint proxy subset matching it, locally train from
// the broadcast global params, and record (flattened params, realized
// distribution). PCA is fit on the train-split rows only, then applied to
// both splits. Each projected dimension is standardized to the train split's
// mean and variance, with the correction folded into the returned PcaModel
// (whose rows are therefore rescaled, no longer orthonormal). Train dummies
// draw from proxy_train, test dummies from proxy_test.
MetaBuildResult build_meta_dataset(
    const ModelSpec& spec, const ModelParams& global_params,
    const Dataset& proxy_train, const Dataset& proxy_test,
    const std::vector<double>& alphas, size_t n_train_per_alpha,
    size_t n_test_per_alpha, const AttackClientHyper& hyper,
    const NoiseConfig& noise, size_t pca_dims, uint64_t seed);

struct PredictorResult {
  ModelParams params;
  std::vector<double> train_loss;  // full train-split loss after each epoch
  std::vector<double> test_loss;   // test-split loss after each epoch
  std::vector<double> eta_used;    // learning rate in effect during the epoch
};

// Mini-batch SGD on soft-target cross-entropy. After each epoch the full
// train-split loss is evaluated; if it rose, the epoch is rolled back and
// the learning rate halves, so the recorded train curve never increases.
PredictorResult train_predictor(const MetaDataset& meta,
                                const PredictorSpec& pspec, uint64_t seed);

LabelDistribution predict_distribution(const PredictorSpec& pspec,
                                       const ModelParams& predictor,
                                       const PcaModel& pca,
                                       const ModelParams& intercepted);

// Cross-entropy and KL divergence with yhat clamped below at 1e-12 before
// any logarithm; zero target mass contributes nothing to KL.
double cross_entropy(const std::vector<double>& y,
                     const std::vector<double>& yhat);
double kl_divergence(const std::vector<double>& y,
                     const std::vector<double>& yhat);

struct PredictorEval {
  double mean_cross_entropy = 0.0;
  double mean_kl = 0.0;
};

PredictorEval evaluate_predictor(const PredictorSpec& pspec,
                                 const ModelParams& predictor,
                                 const std::vector<MetaSample>& split);

// Flat binary format, exact 64-bit round-trip.
void save_meta_dataset(const std::string& path, const MetaDataset& meta);
MetaDataset load_meta_dataset(const std::string& path);

}  // namespace fedleak
