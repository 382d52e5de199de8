#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "fedleak/federation.hpp"

namespace fedleak {

enum class ExperimentKind {
  FedTrain,
  ClusterViz,
  LayerViz,
  AutoencoderViz,
  Attack,
  DefenseSweep,
  GradCheck,
};

enum class DatasetSource { Synth, Mnist, Cifar10 };
enum class SchemeKind { Uniform, Skewed8020, Dirichlet };

struct ExperimentConfig {
  ExperimentKind kind = ExperimentKind::FedTrain;
  uint64_t seed = 0;
  std::string output_dir = "out";

  DatasetSource source = DatasetSource::Synth;
  std::string data_dir;  // empty: FEDLEAK_DATA_DIR, then "."
  size_t synth_train = 4000;
  size_t synth_test = 1000;
  double synth_sigma = 0.15;

  std::string model = "mnist-mlp";

  FedConfig fed{10, 1.0, 1, 1, 32, 0.01, 0};
  NoiseConfig noise;

  SchemeKind scheme = SchemeKind::Uniform;
  size_t samples_per_client = 200;
  double scheme_alpha = 1.0;

  std::vector<double> alphas = {0.1, 1.0, 10.0, 100.0, 1000.0};
  size_t train_per_alpha = 200;
  size_t test_per_alpha = 40;
  size_t samples_per_dummy = 40;
  size_t dummy_epochs = 1;
  size_t dummy_batch = 32;
  double dummy_eta = 1e-4;
  size_t pca_dims = 10;
  bool match_noise = true;

  size_t predictor_hidden_layers = 8;
  size_t predictor_hidden_width = 1000;
  double predictor_eta = 1e-3;
  size_t predictor_epochs = 50;
  size_t predictor_batch = 64;

  size_t knn_k = 5;
  std::vector<double> sweep_scales = {0.0, 1e-3, 1e-2, 1e-1};
};

// Strict key = value parser ('#' starts a comment, sections are dotted key
// prefixes). Unknown keys, duplicate keys, and malformed values are all
// collected and reported together in one exception.
ExperimentConfig parse_config_file(const std::string& path);

// Applies one "key=value" override on top of a parsed config.
void apply_override(ExperimentConfig& config, const std::string& assignment);

// Every statically checkable violation, empty when the config is runnable.
std::vector<std::string> validate_config(const ExperimentConfig& config);

const char* experiment_kind_name(ExperimentKind kind);

}  // namespace fedleak
