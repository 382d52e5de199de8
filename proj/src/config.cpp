#include "fedleak/config.hpp"

#include <algorithm>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <stdexcept>

namespace fedleak {

namespace {

std::string trim(const std::string& s) {
  size_t a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  size_t b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

uint64_t parse_u64(const std::string& v) {
  size_t used = 0;
  unsigned long long out = std::stoull(v, &used);
  if (used != v.size()) throw std::invalid_argument("not an integer");
  return out;
}

double parse_double(const std::string& v) {
  size_t used = 0;
  double out = std::stod(v, &used);
  if (used != v.size()) throw std::invalid_argument("not a number");
  return out;
}

bool parse_bool(const std::string& v) {
  if (v == "true" || v == "yes" || v == "1") return true;
  if (v == "false" || v == "no" || v == "0") return false;
  throw std::invalid_argument("not a boolean");
}

std::vector<double> parse_double_list(const std::string& v) {
  std::vector<double> out;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(parse_double(trim(item)));
  if (out.empty()) throw std::invalid_argument("empty list");
  return out;
}

ExperimentKind parse_kind(const std::string& v) {
  if (v == "fedtrain") return ExperimentKind::FedTrain;
  if (v == "cluster-viz") return ExperimentKind::ClusterViz;
  if (v == "layer-viz") return ExperimentKind::LayerViz;
  if (v == "autoencoder-viz") return ExperimentKind::AutoencoderViz;
  if (v == "attack") return ExperimentKind::Attack;
  if (v == "defense-sweep") return ExperimentKind::DefenseSweep;
  if (v == "gradcheck") return ExperimentKind::GradCheck;
  throw std::invalid_argument("unknown experiment kind");
}

using Setter = std::function<void(ExperimentConfig&, const std::string&)>;

const std::map<std::string, Setter>& key_registry() {
  static const std::map<std::string, Setter> registry = {
      {"experiment", [](auto& c, auto& v) { c.kind = parse_kind(v); }},
      {"seed", [](auto& c, auto& v) { c.seed = parse_u64(v); }},
      {"output_dir", [](auto& c, auto& v) { c.output_dir = v; }},
      {"dataset.source",
       [](auto& c, auto& v) {
         if (v == "synth")
           c.source = DatasetSource::Synth;
         else if (v == "mnist")
           c.source = DatasetSource::Mnist;
         else if (v == "cifar10")
           c.source = DatasetSource::Cifar10;
         else
           throw std::invalid_argument("unknown dataset source");
       }},
      {"dataset.dir", [](auto& c, auto& v) { c.data_dir = v; }},
      {"dataset.synth_train",
       [](auto& c, auto& v) { c.synth_train = parse_u64(v); }},
      {"dataset.synth_test",
       [](auto& c, auto& v) { c.synth_test = parse_u64(v); }},
      {"dataset.synth_sigma",
       [](auto& c, auto& v) { c.synth_sigma = parse_double(v); }},
      {"model", [](auto& c, auto& v) { c.model = v; }},
      {"fed.clients", [](auto& c, auto& v) { c.fed.clients = parse_u64(v); }},
      {"fed.fraction",
       [](auto& c, auto& v) { c.fed.fraction = parse_double(v); }},
      {"fed.rounds", [](auto& c, auto& v) { c.fed.rounds = parse_u64(v); }},
      {"fed.epochs", [](auto& c, auto& v) { c.fed.epochs = parse_u64(v); }},
      {"fed.batch_size",
       [](auto& c, auto& v) { c.fed.batch_size = parse_u64(v); }},
      {"fed.eta", [](auto& c, auto& v) { c.fed.eta = parse_double(v); }},
      {"noise.kind",
       [](auto& c, auto& v) {
         if (v == "none")
           c.noise.kind = NoiseKind::None;
         else if (v == "gaussian")
           c.noise.kind = NoiseKind::Gaussian;
         else if (v == "laplace")
           c.noise.kind = NoiseKind::Laplace;
         else
           throw std::invalid_argument("unknown noise kind");
       }},
      {"noise.scale",
       [](auto& c, auto& v) { c.noise.scale = parse_double(v); }},
      {"noise.injection",
       [](auto& c, auto& v) {
         if (v == "per-gradient")
           c.noise.injection = NoiseInjection::PerGradient;
         else if (v == "weight-delta")
           c.noise.injection = NoiseInjection::WeightDelta;
         else
           throw std::invalid_argument("unknown injection mode");
       }},
      {"partition.scheme",
       [](auto& c, auto& v) {
         if (v == "uniform")
           c.scheme = SchemeKind::Uniform;
         else if (v == "skewed-8020")
           c.scheme = SchemeKind::Skewed8020;
         else if (v == "dirichlet")
           c.scheme = SchemeKind::Dirichlet;
         else
           throw std::invalid_argument("unknown partition scheme");
       }},
      {"partition.samples_per_client",
       [](auto& c, auto& v) { c.samples_per_client = parse_u64(v); }},
      {"partition.alpha",
       [](auto& c, auto& v) { c.scheme_alpha = parse_double(v); }},
      {"attack.alphas",
       [](auto& c, auto& v) { c.alphas = parse_double_list(v); }},
      {"attack.train_per_alpha",
       [](auto& c, auto& v) { c.train_per_alpha = parse_u64(v); }},
      {"attack.test_per_alpha",
       [](auto& c, auto& v) { c.test_per_alpha = parse_u64(v); }},
      {"attack.samples_per_dummy",
       [](auto& c, auto& v) { c.samples_per_dummy = parse_u64(v); }},
      {"attack.dummy_epochs",
       [](auto& c, auto& v) { c.dummy_epochs = parse_u64(v); }},
      {"attack.dummy_batch",
       [](auto& c, auto& v) { c.dummy_batch = parse_u64(v); }},
      {"attack.dummy_eta",
       [](auto& c, auto& v) { c.dummy_eta = parse_double(v); }},
      {"attack.pca_dims",
       [](auto& c, auto& v) { c.pca_dims = parse_u64(v); }},
      {"attack.match_noise",
       [](auto& c, auto& v) { c.match_noise = parse_bool(v); }},
      {"predictor.hidden_layers",
       [](auto& c, auto& v) { c.predictor_hidden_layers = parse_u64(v); }},
      {"predictor.hidden_width",
       [](auto& c, auto& v) { c.predictor_hidden_width = parse_u64(v); }},
      {"predictor.eta",
       [](auto& c, auto& v) { c.predictor_eta = parse_double(v); }},
      {"predictor.epochs",
       [](auto& c, auto& v) { c.predictor_epochs = parse_u64(v); }},
      {"predictor.batch_size",
       [](auto& c, auto& v) { c.predictor_batch = parse_u64(v); }},
      {"viz.knn_k", [](auto& c, auto& v) { c.knn_k = parse_u64(v); }},
      {"sweep.scales",
       [](auto& c, auto& v) { c.sweep_scales = parse_double_list(v); }},
  };
  return registry;
}

void set_key(ExperimentConfig& config, const std::string& key,
             const std::string& value) {
  auto it = key_registry().find(key);
  if (it == key_registry().end())
    throw std::invalid_argument("unknown key '" + key + "'");
  try {
    it->second(config, value);
  } catch (const std::invalid_argument& e) {
    throw std::invalid_argument("invalid value for '" + key + "': '" + value +
                                "' (" + e.what() + ")");
  } catch (const std::out_of_range&) {
    throw std::invalid_argument("invalid value for '" + key + "': '" + value +
                                "' (out of range)");
  }
}

}  // namespace

ExperimentConfig parse_config_file(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("cannot open " + path);

  ExperimentConfig config;
  std::vector<std::string> errors;
  std::vector<std::string> seen;
  std::string line;
  size_t lineno = 0;
  while (std::getline(f, line)) {
    ++lineno;
    size_t hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    line = trim(line);
    if (line.empty()) continue;

    size_t eq = line.find('=');
    if (eq == std::string::npos) {
      errors.push_back("line " + std::to_string(lineno) +
                       ": expected key = value");
      continue;
    }
    std::string key = trim(line.substr(0, eq));
    std::string value = trim(line.substr(eq + 1));
    if (std::find(seen.begin(), seen.end(), key) != seen.end()) {
      errors.push_back("line " + std::to_string(lineno) + ": duplicate key '" +
                       key + "'");
      continue;
    }
    seen.push_back(key);
    try {
      set_key(config, key, value);
    } catch (const std::invalid_argument& e) {
      errors.push_back("line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  if (!errors.empty()) {
    std::string joined = "config errors in " + path + ":";
    for (const std::string& e : errors) joined += "\n  " + e;
    throw std::runtime_error(joined);
  }
  return config;
}

void apply_override(ExperimentConfig& config, const std::string& assignment) {
  size_t eq = assignment.find('=');
  if (eq == std::string::npos)
    throw std::invalid_argument("override must look like key=value: '" +
                                assignment + "'");
  set_key(config, trim(assignment.substr(0, eq)),
          trim(assignment.substr(eq + 1)));
}

const char* experiment_kind_name(ExperimentKind kind) {
  switch (kind) {
    case ExperimentKind::FedTrain: return "fedtrain";
    case ExperimentKind::ClusterViz: return "cluster-viz";
    case ExperimentKind::LayerViz: return "layer-viz";
    case ExperimentKind::AutoencoderViz: return "autoencoder-viz";
    case ExperimentKind::Attack: return "attack";
    case ExperimentKind::DefenseSweep: return "defense-sweep";
    case ExperimentKind::GradCheck: return "gradcheck";
  }
  return "unknown";
}

std::vector<std::string> validate_config(const ExperimentConfig& c) {
  std::vector<std::string> out;
  auto bad = [&](const std::string& msg) { out.push_back(msg); };

  const bool is_viz = c.kind == ExperimentKind::ClusterViz ||
                      c.kind == ExperimentKind::LayerViz ||
                      c.kind == ExperimentKind::AutoencoderViz;
  const bool is_attack = c.kind == ExperimentKind::Attack ||
                         c.kind == ExperimentKind::DefenseSweep;
  const bool uses_partition = c.kind == ExperimentKind::FedTrain || is_viz;

  if (c.model != "mnist-mlp" && c.model != "cifar-cnn" &&
      c.model != "mnist-autoencoder")
    bad("unknown model '" + c.model + "'");
  if (c.fed.clients == 0) bad("fed.clients must be at least 1");
  if (!(c.fed.fraction > 0.0) || c.fed.fraction > 1.0)
    bad("client fraction must be in (0,1]");
  if (c.fed.epochs == 0) bad("fed.epochs must be at least 1");
  if (c.fed.batch_size == 0) bad("fed.batch_size must be at least 1");
  if (!(c.fed.eta > 0.0)) bad("fed.eta must be positive");
  if (c.noise.scale < 0.0) bad("noise.scale must be non-negative");
  if (!(c.synth_sigma > 0.0)) bad("dataset.synth_sigma must be positive");

  if (uses_partition) {
    if (c.samples_per_client == 0)
      bad("partition.samples_per_client must be at least 1");
    if (c.scheme == SchemeKind::Skewed8020 && c.fed.clients % 10 != 0)
      bad("80/20 scheme needs fed.clients divisible by 10");
    if (c.scheme == SchemeKind::Dirichlet && !(c.scheme_alpha > 0.0))
      bad("partition.alpha must be positive");
    if (c.source == DatasetSource::Synth &&
        c.fed.clients * c.samples_per_client > c.synth_train)
      bad("partition demands " +
          std::to_string(c.fed.clients * c.samples_per_client) +
          " samples but dataset.synth_train is " +
          std::to_string(c.synth_train));
  }

  if (is_viz) {
    if (c.fed.clients < 3) bad("projection needs at least 3 clients");
    if (c.knn_k == 0) bad("viz.knn_k must be at least 1");
    if (c.knn_k >= c.fed.clients) bad("viz.knn_k must be below fed.clients");
  }
  if (c.kind == ExperimentKind::AutoencoderViz) {
    if (c.model != "mnist-autoencoder")
      bad("autoencoder-viz needs model = mnist-autoencoder");
    if (c.scheme == SchemeKind::Dirichlet)
      bad("autoencoder-viz supports uniform or skewed-8020 partitions");
  }

  if (is_attack) {
    if (c.alphas.empty()) bad("attack.alphas must not be empty");
    for (double a : c.alphas)
      if (!(a > 0.0)) bad("attack.alphas entries must be positive");
    if (c.train_per_alpha == 0) bad("attack.train_per_alpha must be at least 1");
    if (c.test_per_alpha == 0) bad("attack.test_per_alpha must be at least 1");
    if (c.samples_per_dummy == 0)
      bad("attack.samples_per_dummy must be at least 1");
    if (c.dummy_batch == 0) bad("attack.dummy_batch must be at least 1");
    if (!(c.dummy_eta > 0.0)) bad("attack.dummy_eta must be positive");
    if (c.pca_dims == 0) bad("attack.pca_dims must be at least 1");
    const size_t train_dummies = c.alphas.size() * c.train_per_alpha;
    if (train_dummies > 0 && c.pca_dims > train_dummies - 1)
      bad("attack.pca_dims must be below the dummy-client count");
    if (c.predictor_hidden_layers == 0)
      bad("predictor.hidden_layers must be at least 1");
    if (c.predictor_hidden_width == 0)
      bad("predictor.hidden_width must be at least 1");
    if (!(c.predictor_eta > 0.0)) bad("predictor.eta must be positive");
    if (c.predictor_epochs == 0) bad("predictor.epochs must be at least 1");
    if (c.predictor_batch == 0) bad("predictor.batch_size must be at least 1");
    if (c.source == DatasetSource::Synth) {
      const size_t train_demand = train_dummies * c.samples_per_dummy;
      const size_t test_demand =
          c.alphas.size() * c.test_per_alpha * c.samples_per_dummy;
      if (train_demand > c.synth_train)
        bad("dummy draws need " + std::to_string(train_demand) +
            " proxy samples but dataset.synth_train is " +
            std::to_string(c.synth_train));
      if (test_demand > c.synth_test)
        bad("dummy draws need " + std::to_string(test_demand) +
            " proxy samples but dataset.synth_test is " +
            std::to_string(c.synth_test));
    }
  }

  if (c.kind == ExperimentKind::DefenseSweep) {
    if (c.sweep_scales.empty()) bad("sweep.scales must not be empty");
    for (double s : c.sweep_scales)
      if (s < 0.0) bad("sweep.scales entries must be non-negative");
  }
  return out;
}

}  // namespace fedleak
