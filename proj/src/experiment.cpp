#include "fedleak/experiment.hpp"

#include <cstdlib>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

#include "fedleak/analysis.hpp"
#include "fedleak/attack.hpp"
#include "fedleak/data.hpp"
#include "fedleak/federation.hpp"
#include "fedleak/gradcheck.hpp"
#include "fedleak/io.hpp"
#include "fedleak/model.hpp"

namespace fedleak {

namespace {

// Collects the relative paths of everything written so the manifest can be
// emitted in one place at the end of the run.
struct ArtifactWriter {
  std::string dir;
  std::vector<std::string> files;

  void write(const std::string& rel, const std::string& content) {
    write_text_file(dir + "/" + rel, content);
    files.push_back(rel);
  }
  void note(const std::string& rel) { files.push_back(rel); }
  void finish() { write_manifest(dir, files); }
};

std::string resolve_data_dir(const ExperimentConfig& c) {
  if (!c.data_dir.empty()) return c.data_dir;
  if (const char* env = std::getenv("FEDLEAK_DATA_DIR"); env && *env)
    return env;
  return ".";
}

ModelSpec model_by_name(const std::string& name) {
  if (name == "mnist-mlp") return mnist_mlp();
  if (name == "cifar-cnn") return cifar_cnn();
  if (name == "mnist-autoencoder") return mnist_autoencoder();
  throw std::invalid_argument("unknown model '" + name + "'");
}

struct SplitData {
  Dataset train;
  Dataset test;
};

SplitData load_data(const ExperimentConfig& c) {
  SplitData d;
  if (c.source == DatasetSource::Synth) {
    const std::vector<size_t> shape = c.model == "cifar-cnn"
                                          ? std::vector<size_t>{3, 32, 32}
                                          : std::vector<size_t>{28, 28};
    d.train = synth_dataset(10, c.synth_train, shape, c.seed, 0, c.synth_sigma);
    d.test = synth_dataset(10, c.synth_test, shape, c.seed, 1, c.synth_sigma);
  } else if (c.source == DatasetSource::Mnist) {
    const std::string dir = resolve_data_dir(c);
    d.train = load_mnist(dir + "/train-images-idx3-ubyte",
                         dir + "/train-labels-idx1-ubyte");
    d.test = load_mnist(dir + "/t10k-images-idx3-ubyte",
                        dir + "/t10k-labels-idx1-ubyte");
  } else {
    const std::string dir = resolve_data_dir(c);
    std::vector<std::string> batches;
    for (int i = 1; i <= 5; ++i)
      batches.push_back(dir + "/data_batch_" + std::to_string(i) + ".bin");
    d.train = load_cifar10(batches);
    d.test = load_cifar10({dir + "/test_batch.bin"});
  }
  return d;
}

Partition build_partition(const ExperimentConfig& c, const Dataset& data) {
  switch (c.scheme) {
    case SchemeKind::Uniform:
      return partition_uniform(data, c.fed.clients, c.samples_per_client,
                               c.seed);
    case SchemeKind::Skewed8020:
      return partition_8020(data, c.fed.clients / data.label_count,
                            c.samples_per_client, c.seed)
          .partition;
    case SchemeKind::Dirichlet: {
      Partition p;
      IndexPool pool = IndexPool::from_dataset(data);
      for (size_t k = 0; k < c.fed.clients; ++k) {
        LabelDistribution want =
            sample_dirichlet(c.scheme_alpha, data.label_count,
                             mix_seed(c.seed, kStreamDirichlet, k, 0));
        p.assignments.push_back(partition_from_distribution(
            data, want, c.samples_per_client,
            mix_seed(c.seed, kStreamDirichlet, k, 1), pool));
      }
      return p;
    }
  }
  throw std::logic_error("unhandled scheme");
}

std::string projection_csv(
    const std::vector<std::pair<std::string, std::vector<ProjectionPoint>>>&
        groups) {
  std::string out = "client_id,layer,x,y,dominant_label,dominant_fraction\n";
  for (const auto& [layer, points] : groups)
    for (const ProjectionPoint& p : points)
      out += std::to_string(p.client_id) + "," + layer + "," + fmt_g17(p.x) +
             "," + fmt_g17(p.y) + "," + std::to_string(p.dominant_label) +
             "," + fmt_g17(p.dominant_fraction) + "\n";
  return out;
}

std::string purity_csv(
    const std::vector<std::tuple<std::string, size_t, double>>& rows) {
  std::string out = "layer,k,purity\n";
  for (const auto& [layer, k, purity] : rows)
    out += layer + "," + std::to_string(k) + "," + fmt_g17(purity) + "\n";
  return out;
}

struct LocalRuns {
  std::vector<ModelParams> params;
  std::vector<LabelDistribution> dists;
};

// One broadcast round: every client trains locally from the shared init.
LocalRuns train_locals(const ExperimentConfig& c, const ModelSpec& spec,
                       const Dataset& train, const Partition& part) {
  LocalRuns out;
  const ModelParams init = init_params(spec, mix_seed(c.seed, kStreamInit));
  for (size_t k = 0; k < c.fed.clients; ++k) {
    out.params.push_back(client_update(spec, init, train, part.assignments[k],
                                       c.fed.epochs, c.fed.batch_size,
                                       c.fed.eta, c.noise,
                                       client_stream_seed(c.seed, 0, k))
                             .params);
    out.dists.push_back(empirical_distribution(part.assignments[k], train));
  }
  return out;
}

// Purity of the degenerate cloud an untrained (identical-init) client set
// projects to: every point coincides, only the tie-break structure remains.
double untrained_purity(const std::vector<LabelDistribution>& dists,
                        size_t k) {
  std::vector<std::pair<double, double>> pts(dists.size(), {0.0, 0.0});
  std::vector<size_t> labels;
  labels.reserve(dists.size());
  for (const LabelDistribution& d : dists)
    labels.push_back(dominant_label(d).first);
  return knn_purity(pts, labels, k);
}

void run_fedtrain(const ExperimentConfig& c, ArtifactWriter& w) {
  SplitData data = load_data(c);
  ModelSpec spec = model_by_name(c.model);
  FedConfig fed = c.fed;
  fed.seed = c.seed;
  Partition part = build_partition(c, data.train);
  FedResult result = fed_train(spec, fed, c.noise, data.train, part, data.test);
  w.write("rounds.csv", round_log_csv(result.log));
}

void run_cluster_viz(const ExperimentConfig& c, ArtifactWriter& w) {
  SplitData data = load_data(c);
  ModelSpec spec = model_by_name(c.model);
  Partition part = build_partition(c, data.train);
  LocalRuns locals = train_locals(c, spec, data.train, part);
  std::vector<ProjectionPoint> points =
      project_clients(locals.params, locals.dists, LayerSelector::every());
  w.write("projection.csv", projection_csv({{"all", points}}));
  w.write("purity.csv",
          purity_csv({{"all", c.knn_k, knn_purity(points, c.knn_k)},
                      {"all-untrained", c.knn_k,
                       untrained_purity(locals.dists, c.knn_k)}}));
}

void run_layer_viz(const ExperimentConfig& c, ArtifactWriter& w) {
  SplitData data = load_data(c);
  ModelSpec spec = model_by_name(c.model);
  Partition part = build_partition(c, data.train);
  LocalRuns locals = train_locals(c, spec, data.train, part);

  std::vector<size_t> layer_ids;
  for (const ParamEntry& e : locals.params.front().entries)
    if (layer_ids.empty() || layer_ids.back() != e.layer_index)
      layer_ids.push_back(e.layer_index);

  std::vector<std::pair<std::string, std::vector<ProjectionPoint>>> groups;
  std::vector<std::tuple<std::string, size_t, double>> purities;
  for (size_t id : layer_ids) {
    std::vector<ProjectionPoint> points =
        project_clients(locals.params, locals.dists, LayerSelector::layer(id));
    purities.emplace_back(std::to_string(id), c.knn_k,
                          knn_purity(points, c.knn_k));
    groups.emplace_back(std::to_string(id), std::move(points));
  }
  std::vector<ProjectionPoint> all =
      project_clients(locals.params, locals.dists, LayerSelector::every());
  purities.emplace_back("all", c.knn_k, knn_purity(all, c.knn_k));
  purities.emplace_back("all-untrained", c.knn_k,
                        untrained_purity(locals.dists, c.knn_k));
  groups.emplace_back("all", std::move(all));

  w.write("projection.csv", projection_csv(groups));
  w.write("purity.csv", purity_csv(purities));
}

void run_autoencoder_viz(const ExperimentConfig& c, ArtifactWriter& w) {
  SplitData data = load_data(c);
  AutoencoderOutcome out = autoencoder_experiment(
      data.train, c.fed.clients, c.samples_per_client,
      c.scheme == SchemeKind::Skewed8020 ? PartitionScheme::Skewed8020
                                         : PartitionScheme::Uniform,
      c.fed.epochs, c.fed.batch_size, c.fed.eta, c.seed);

  std::vector<LabelDistribution> dists;
  for (const ProjectionPoint& p : out.points) {
    LabelDistribution d;
    d.probs.assign(10, 0.0);
    d.probs[p.dominant_label] = 1.0;
    dists.push_back(d);
  }
  w.write("projection.csv", projection_csv({{"all", out.points}}));
  w.write("purity.csv",
          purity_csv({{"all", c.knn_k, knn_purity(out.points, c.knn_k)},
                      {"all-untrained", c.knn_k,
                       untrained_purity(dists, c.knn_k)}}));
}

PredictorSpec predictor_from(const ExperimentConfig& c, size_t label_count) {
  PredictorSpec pspec;
  pspec.input_dim = c.pca_dims;
  pspec.hidden.assign(c.predictor_hidden_layers, c.predictor_hidden_width);
  pspec.output_dim = label_count;
  pspec.eta = c.predictor_eta;
  pspec.epochs = c.predictor_epochs;
  pspec.batch_size = c.predictor_batch;
  return pspec;
}

struct AttackOutcome {
  MetaBuildResult built;
  PredictorSpec pspec;
  PredictorResult pred;
  PredictorEval train_eval;
  PredictorEval test_eval;
};

AttackOutcome attack_core(const ExperimentConfig& c, const SplitData& data,
                          const NoiseConfig& dummy_noise) {
  ModelSpec spec = model_by_name(c.model);
  ModelParams global = init_params(spec, mix_seed(c.seed, kStreamInit));
  AttackClientHyper hyper;
  hyper.epochs = c.dummy_epochs;
  hyper.batch_size = c.dummy_batch;
  hyper.eta = c.dummy_eta;
  hyper.samples_per_client = c.samples_per_dummy;

  AttackOutcome out{build_meta_dataset(spec, global, data.train, data.test,
                                       c.alphas, c.train_per_alpha,
                                       c.test_per_alpha, hyper, dummy_noise,
                                       c.pca_dims, c.seed),
                    predictor_from(c, data.train.label_count),
                    {},
                    {},
                    {}};
  out.pred = train_predictor(out.built.meta, out.pspec, c.seed);
  out.train_eval =
      evaluate_predictor(out.pspec, out.pred.params, out.built.meta.train);
  out.test_eval =
      evaluate_predictor(out.pspec, out.pred.params, out.built.meta.test);
  return out;
}

std::string predictor_curve_csv(const PredictorResult& pred) {
  std::string out = "epoch,train_loss,test_loss,eta\n";
  for (size_t i = 0; i < pred.train_loss.size(); ++i)
    out += std::to_string(i + 1) + "," + fmt_g17(pred.train_loss[i]) + "," +
           fmt_g17(pred.test_loss[i]) + "," + fmt_g17(pred.eta_used[i]) + "\n";
  return out;
}

std::string attack_eval_csv(const AttackOutcome& out) {
  std::string csv = "split,samples,mean_cross_entropy,mean_kl\n";
  csv += "train," + std::to_string(out.built.meta.train.size()) + "," +
         fmt_g17(out.train_eval.mean_cross_entropy) + "," +
         fmt_g17(out.train_eval.mean_kl) + "\n";
  csv += "test," + std::to_string(out.built.meta.test.size()) + "," +
         fmt_g17(out.test_eval.mean_cross_entropy) + "," +
         fmt_g17(out.test_eval.mean_kl) + "\n";
  return csv;
}

std::string predictions_csv(const AttackOutcome& out) {
  const ModelSpec spec = predictor_model_spec(out.pspec);
  std::string csv = "index,alpha,cross_entropy,kl\n";
  for (size_t i = 0; i < out.built.meta.test.size(); ++i) {
    const MetaSample& s = out.built.meta.test[i];
    Tensor x{{1, s.x.size()}, s.x};
    const Tensor probs = forward(spec, out.pred.params, x);
    std::vector<double> p = probs.values;
    csv += std::to_string(i) + "," + fmt_g17(s.alpha) + "," +
           fmt_g17(cross_entropy(s.y.probs, p)) + "," +
           fmt_g17(kl_divergence(s.y.probs, p)) + "\n";
  }
  return csv;
}

void run_attack(const ExperimentConfig& c, ArtifactWriter& w) {
  SplitData data = load_data(c);
  const NoiseConfig dummy_noise = c.match_noise ? c.noise : NoiseConfig{};
  AttackOutcome out = attack_core(c, data, dummy_noise);
  save_meta_dataset(w.dir + "/meta.bin", out.built.meta);
  w.note("meta.bin");
  w.write("predictor_curve.csv", predictor_curve_csv(out.pred));
  w.write("attack_eval.csv", attack_eval_csv(out));
  w.write("predictions.csv", predictions_csv(out));
}

std::string noise_tag(const NoiseConfig& n) {
  const char* kind = n.kind == NoiseKind::None
                         ? "none"
                         : (n.kind == NoiseKind::Gaussian ? "gaussian"
                                                          : "laplace");
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%g", n.scale);
  return std::string(kind) + "-" + buf;
}

void run_defense_sweep(const ExperimentConfig& c, ArtifactWriter& w) {
  SplitData data = load_data(c);
  ModelSpec spec = model_by_name(c.model);
  Partition part = build_partition(c, data.train);

  // Scale zero is noise-kind independent, so it collapses to one entry.
  std::vector<NoiseConfig> entries;
  bool zero_seen = false;
  for (double scale : c.sweep_scales) {
    if (scale == 0.0) {
      if (!zero_seen)
        entries.push_back(NoiseConfig{NoiseKind::None, 0.0, c.noise.injection});
      zero_seen = true;
      continue;
    }
    entries.push_back(
        NoiseConfig{NoiseKind::Gaussian, scale, c.noise.injection});
    entries.push_back(
        NoiseConfig{NoiseKind::Laplace, scale, c.noise.injection});
  }

  std::string sweep = "kind,scale,final_accuracy,predictor_test_loss,mean_kl\n";
  for (const NoiseConfig& entry : entries) {
    FedConfig fed = c.fed;
    fed.seed = c.seed;
    FedResult fr = fed_train(spec, fed, entry, data.train, part, data.test);
    const double final_acc = fr.log.empty()
                                 ? evaluate(spec, fr.params, data.test)
                                 : fr.log.back().accuracy;
    w.write("rounds_" + noise_tag(entry) + ".csv", round_log_csv(fr.log));

    const NoiseConfig dummy_noise = c.match_noise ? entry : NoiseConfig{};
    AttackOutcome out = attack_core(c, data, dummy_noise);
    const char* kind = entry.kind == NoiseKind::None
                           ? "none"
                           : (entry.kind == NoiseKind::Gaussian ? "gaussian"
                                                                : "laplace");
    sweep += std::string(kind) + "," + fmt_g17(entry.scale) + "," +
             fmt_g17(final_acc) + "," +
             fmt_g17(out.test_eval.mean_cross_entropy) + "," +
             fmt_g17(out.test_eval.mean_kl) + "\n";
  }
  w.write("sweep.csv", sweep);
}

int run_gradcheck(const ExperimentConfig& c, ArtifactWriter& w) {
  std::vector<GradCheckReport> reports = run_gradient_checks(20, c.seed);
  std::string csv = "case,instances,entries_checked,max_rel_err\n";
  bool ok = true;
  for (const GradCheckReport& r : reports) {
    csv += r.case_name + "," + std::to_string(r.instances) + "," +
           std::to_string(r.entries_checked) + "," + fmt_g17(r.max_rel_err) +
           "\n";
    if (!(r.max_rel_err < 1e-4)) ok = false;
  }
  w.write("gradcheck.csv", csv);
  return ok ? 0 : 1;
}

}  // namespace

int run_experiment(const ExperimentConfig& config) {
  std::vector<std::string> violations = validate_config(config);
  if (!violations.empty()) {
    std::string joined = "invalid config:";
    for (const std::string& v : violations) joined += "\n  " + v;
    throw std::runtime_error(joined);
  }

  std::filesystem::create_directories(config.output_dir);
  ArtifactWriter w{config.output_dir, {}};
  int status = 0;
  switch (config.kind) {
    case ExperimentKind::FedTrain: run_fedtrain(config, w); break;
    case ExperimentKind::ClusterViz: run_cluster_viz(config, w); break;
    case ExperimentKind::LayerViz: run_layer_viz(config, w); break;
    case ExperimentKind::AutoencoderViz: run_autoencoder_viz(config, w); break;
    case ExperimentKind::Attack: run_attack(config, w); break;
    case ExperimentKind::DefenseSweep: run_defense_sweep(config, w); break;
    case ExperimentKind::GradCheck: status = run_gradcheck(config, w); break;
  }
  w.finish();
  return status;
}

}  // namespace fedleak
