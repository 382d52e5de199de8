// Acceptance gate: one function per release criterion, each printing a
// single PASS/FAIL verdict line with its measurements. Criteria that need
// expensive experiment-runner artifacts share them through a cache
// directory (--cache); a cached run is reused only when its manifest.txt
// exists, since the runner writes the manifest last.
//
// The sandbox has no network route to the MNIST/CIFAR mirrors, so every
// criterion runs on the synthetic MNIST-shaped dataset at the stated
// hyperparameters. Where a bound turns out to be unreachable at the pinned
// desk scale the verdict stays honest (see criterion 8's notes).

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "fedleak/analysis.hpp"
#include "fedleak/attack.hpp"
#include "fedleak/config.hpp"
#include "fedleak/data.hpp"
#include "fedleak/experiment.hpp"
#include "fedleak/federation.hpp"
#include "fedleak/gradcheck.hpp"
#include "fedleak/model.hpp"
#include "fedleak/pca.hpp"
#include "fedleak/rng.hpp"

namespace fs = std::filesystem;
using namespace fedleak;

namespace {

struct Verdict {
  bool pass = false;
  std::string detail;
  std::vector<std::string> notes;  // printed indented under the verdict
};

std::string g_cache = "acceptance_cache";

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.4g", v);
  return buf;
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// Splits one CSV line; no quoting in any artifact format.
std::vector<std::string> csv_fields(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string f;
  while (std::getline(ss, f, ',')) out.push_back(f);
  return out;
}

// Returns the fields of the first row whose first column equals key.
std::vector<std::string> csv_row(const std::string& csv,
                                 const std::string& key) {
  std::stringstream ss(csv);
  std::string line;
  while (std::getline(ss, line)) {
    auto f = csv_fields(line);
    if (!f.empty() && f[0] == key) return f;
  }
  throw std::runtime_error("row '" + key + "' not found");
}

bool cached(const std::string& dir) {
  return fs::exists(fs::path(dir) / "manifest.txt");
}

// Runs the experiment unless its artifacts are already cached. `fresh`
// forces a clean re-run (the determinism criterion must regenerate).
void ensure_run(const ExperimentConfig& base, const std::string& dir,
                bool fresh = false) {
  if (fresh) fs::remove_all(dir);
  if (cached(dir)) return;
  fs::remove_all(dir);  // drop partial leftovers
  ExperimentConfig c = base;
  c.output_dir = dir;
  if (run_experiment(c) != 0)
    throw std::runtime_error("experiment for " + dir + " reported failure");
}

// ---- criterion configurations shared across criteria ----

// Dominant-label clustering run (also the first half of the determinism
// criterion).
ExperimentConfig cluster_config() {
  ExperimentConfig c;
  c.kind = ExperimentKind::ClusterViz;
  c.seed = 1;
  c.source = DatasetSource::Synth;
  c.synth_train = 30000;
  c.synth_test = 1000;
  c.model = "mnist-mlp";
  c.fed.clients = 100;
  c.fed.epochs = 1;
  c.fed.batch_size = 32;
  c.fed.eta = 1e-5;
  c.scheme = SchemeKind::Skewed8020;
  c.samples_per_client = 200;
  c.knn_k = 5;
  return c;
}

// Noiseless attack run (also reused by the defense and determinism
// criteria). 1,000 train and 200 test dummies across the five reference
// concentrations, pca_dims 10, the eight-by-1000 predictor.
ExperimentConfig attack_config() {
  ExperimentConfig c;
  c.kind = ExperimentKind::Attack;
  c.seed = 1;
  c.source = DatasetSource::Synth;
  c.synth_train = 110000;
  c.synth_test = 25000;
  c.model = "mnist-mlp";
  c.alphas = {0.1, 1.0, 10.0, 100.0, 1000.0};
  c.train_per_alpha = 200;
  c.test_per_alpha = 40;
  // Dummy updates must displace the parameters well past the additive-noise
  // floor at scale 1e-3, or the noise directions dominate the PCA and the
  // meta-features carry nothing. 100-sample draws keep the disjoint proxy
  // pools small; two epochs at 20x the usual client rate give each dummy
  // eight batches of movement, comparable to a full 500-sample local epoch.
  c.samples_per_dummy = 100;
  c.dummy_epochs = 2;
  c.dummy_batch = 32;
  c.dummy_eta = 2e-3;
  c.pca_dims = 10;
  c.predictor_hidden_layers = 8;
  c.predictor_hidden_width = 1000;
  c.predictor_eta = 1e-3;
  c.predictor_epochs = 50;
  c.predictor_batch = 64;
  return c;
}

// Reads (mean cross-entropy, mean KL) for the test split of an attack run.
std::pair<double, double> attack_test_eval(const std::string& dir) {
  auto row = csv_row(read_file(dir + "/attack_eval.csv"), "test");
  return {std::stod(row[2]), std::stod(row[3])};
}

// ---- criterion 1: gradient checks ----

Verdict criterion_1() {
  Verdict v;
  auto reports = run_gradient_checks(20, 7);
  double worst = 0.0;
  std::string worst_case;
  size_t entries = 0;
  for (const auto& r : reports) {
    entries += r.entries_checked;
    if (r.max_rel_err > worst) {
      worst = r.max_rel_err;
      worst_case = r.case_name;
    }
    if (r.instances != 20 || r.entries_checked == 0) {
      v.detail = "case " + r.case_name + " ran " +
                 std::to_string(r.instances) + " instances";
      return v;
    }
  }
  v.pass = worst <= 1e-4;
  v.detail = std::to_string(reports.size()) + " cases, " +
             std::to_string(entries) + " entries, worst rel err " +
             fmt(worst) + " (" + worst_case + "), bound 1e-4";
  return v;
}

// ---- criterion 2: FedAvg equals sequential SGD when K=1, C=1 ----

Verdict criterion_2() {
  Verdict v;
  const uint64_t seed = 9;
  const size_t T = 3, E = 2, B = 16;
  ModelSpec spec = mnist_mlp();
  Dataset data = synth_dataset(10, 512, {28, 28}, 42, 0);
  Partition part = partition_uniform(data, 1, 512, seed);

  FedConfig fed;
  fed.clients = 1;
  fed.fraction = 1.0;
  fed.rounds = T;
  fed.epochs = E;
  fed.batch_size = B;
  fed.eta = 0.05;
  fed.seed = seed;
  NoiseConfig none;
  ModelParams via_fed =
      fed_train(spec, fed, none, data, part, data).params;

  // Directly coded SGD: same init, then T*E epochs of shuffled minibatch
  // steps. fed_train hands each round's work to one client, so the shuffle
  // stream restarts from that round's client seed.
  ModelParams w = init_params(spec, mix_seed(seed, kStreamInit));
  for (size_t t = 0; t < T; ++t) {
    // Each round the client restarts from the partition's index order;
    // only the shuffle stream is fresh per round.
    std::vector<size_t> order = part.assignments[0];
    Rng shuffle_rng =
        make_rng(mix_seed(client_stream_seed(seed, t, 0), kStreamShuffle));
    for (size_t e = 0; e < E; ++e) {
      std::shuffle(order.begin(), order.end(), shuffle_rng);
      for (size_t start = 0; start < order.size(); start += B) {
        size_t end = std::min(start + B, order.size());
        std::vector<size_t> idx(order.begin() + start, order.begin() + end);
        LossGrad lg =
            loss_and_grad(spec, w, data.batch(idx), data.batch_labels(idx));
        w = sgd_step(w, lg.grads, fed.eta);
      }
    }
  }

  double max_diff = 0.0;
  size_t n = 0;
  for (size_t ei = 0; ei < w.entries.size(); ++ei) {
    const auto& a = via_fed.entries[ei].tensor.values;
    const auto& b = w.entries[ei].tensor.values;
    for (size_t j = 0; j < a.size(); ++j) {
      max_diff = std::max(max_diff, std::abs(a[j] - b[j]));
      ++n;
    }
  }
  v.pass = max_diff <= 1e-12;
  v.detail = "K=1 C=1 T=3 E=2 B=16 on 512 samples, " + std::to_string(n) +
             " params, max |diff| " + fmt(max_diff) + ", bound 1e-12";
  return v;
}

// ---- criterion 3: Dirichlet sampler moments ----

Verdict criterion_3() {
  Verdict v;
  const size_t L = 10, draws = 10000;
  const double target_mean = 1.0 / double(L);
  double worst_mean_err = 0.0, worst_var_rel = 0.0;
  for (double alpha : {0.1, 1.0, 10.0, 100.0, 1000.0}) {
    Rng rng = make_rng(mix_seed(77, kStreamDirichlet,
                                uint64_t(alpha * 10.0)));
    std::vector<double> mean(L, 0.0), sq(L, 0.0);
    for (size_t i = 0; i < draws; ++i) {
      LabelDistribution d = sample_dirichlet(alpha, L, rng);
      for (size_t l = 0; l < L; ++l) {
        mean[l] += d.probs[l];
        sq[l] += d.probs[l] * d.probs[l];
      }
    }
    // Analytic symmetric-Dirichlet moments as the oracle.
    double expect_var = (1.0 / double(L)) * (1.0 - 1.0 / double(L)) /
                        (double(L) * alpha + 1.0);
    for (size_t l = 0; l < L; ++l) {
      double m = mean[l] / double(draws);
      double var = sq[l] / double(draws) - m * m;
      worst_mean_err = std::max(worst_mean_err, std::abs(m - target_mean));
      worst_var_rel = std::max(worst_var_rel,
                               std::abs(var - expect_var) / expect_var);
    }
  }
  v.pass = worst_mean_err <= 0.01 && worst_var_rel <= 0.2;
  v.detail = "5 alphas x 10k draws: worst |mean-0.1| " + fmt(worst_mean_err) +
             " (bound 0.01), worst var rel err " + fmt(worst_var_rel) +
             " (bound 0.2)";
  return v;
}

// ---- criterion 4: dominant-label clustering ----

Verdict criterion_4() {
  Verdict v;
  std::string dir = g_cache + "/cluster_run1";
  ensure_run(cluster_config(), dir);
  std::string purity_csv = read_file(dir + "/purity.csv");
  double purity = std::stod(csv_row(purity_csv, "all")[2]);
  double untrained = std::stod(csv_row(purity_csv, "all-untrained")[2]);
  v.pass = purity >= 0.6 && purity >= 3.0 * untrained;
  v.detail = "100 clients 80/20, 5-NN purity " + fmt(purity) +
             " (bound 0.6), untrained baseline " + fmt(untrained) +
             " (need >= 3x)";
  return v;
}

// ---- criterion 5: unsupervised clustering with the autoencoder ----

Verdict criterion_5() {
  Verdict v;
  Dataset data = synth_dataset(10, 30000, {28, 28}, 1, 0);
  AutoencoderOutcome out = autoencoder_experiment(
      data, 100, 200, PartitionScheme::Skewed8020, 1, 32, 1e-5, 1);

  // Label-absence audit: relabeling every sample must not move a single
  // projected point, because reconstruction training never reads labels.
  // The 80/20 scheme assigns samples BY label, so the audit runs under the
  // uniform scheme, where the partition is label-blind and any projection
  // change could only come from training.
  Dataset relabeled = data;
  for (int& l : relabeled.labels) l = (l + 3) % 10;
  AutoencoderOutcome ref = autoencoder_experiment(
      data, 100, 200, PartitionScheme::Uniform, 1, 32, 1e-5, 1);
  AutoencoderOutcome audit = autoencoder_experiment(
      relabeled, 100, 200, PartitionScheme::Uniform, 1, 32, 1e-5, 1);
  bool labels_absent = ref.points.size() == audit.points.size();
  for (size_t i = 0; labels_absent && i < ref.points.size(); ++i)
    labels_absent = ref.points[i].x == audit.points[i].x &&
                    ref.points[i].y == audit.points[i].y;

  v.pass = out.purity >= 0.3 && labels_absent;
  v.detail = "autoencoder 5-NN purity " + fmt(out.purity) +
             " (bound 0.3); projections bitwise identical under label "
             "permutation: " +
             (labels_absent ? "yes" : "NO");
  return v;
}

// ---- criterion 6: attack efficacy, noiseless ----

Verdict criterion_6() {
  Verdict v;
  std::string dir = g_cache + "/attack_run1";
  ensure_run(attack_config(), dir);
  auto [ce, kl] = attack_test_eval(dir);

  // The cross-entropy bound is relative to the achievable range: a predictor
  // can do no better than the targets' mean entropy and no worse than the
  // ln 10 uniform baseline, so it must close at least 40% of that gap.
  MetaDataset meta = load_meta_dataset(dir + "/meta.bin");
  double mean_entropy = 0.0;
  for (const auto& s : meta.test) {
    double h = 0.0;
    for (double p : s.y.probs)
      if (p > 0.0) h -= p * std::log(p);
    mean_entropy += h;
  }
  mean_entropy /= double(meta.test.size());
  double ln10 = std::log(10.0);
  double ce_bound = mean_entropy + 0.6 * (ln10 - mean_entropy);

  v.pass = kl <= 0.2 && ce <= ce_bound;
  v.detail = "1000/200 dummies, mean test KL " + fmt(kl) +
             " (bound 0.2), mean test CE " + fmt(ce) + " (bound " +
             fmt(ce_bound) + " from target entropy " + fmt(mean_entropy) +
             ")";
  return v;
}

// ---- criterion 7: defense ineffectiveness at 1e-3 ----

Verdict criterion_7() {
  Verdict v;
  std::string base_dir = g_cache + "/attack_run1";
  ensure_run(attack_config(), base_dir);
  double base_kl = attack_test_eval(base_dir).second;

  double worst_ratio = 0.0;
  std::string detail;
  for (NoiseKind kind : {NoiseKind::Gaussian, NoiseKind::Laplace}) {
    ExperimentConfig c = attack_config();
    c.noise.kind = kind;
    c.noise.scale = 1e-3;
    c.noise.injection = NoiseInjection::WeightDelta;
    const char* name = kind == NoiseKind::Gaussian ? "gaussian" : "laplace";
    std::string dir = g_cache + "/attack_" + name;
    ensure_run(c, dir);
    double kl = attack_test_eval(dir).second;
    worst_ratio = std::max(worst_ratio, kl / base_kl);
    detail += std::string(detail.empty() ? "" : ", ") + name + " KL " +
              fmt(kl);
  }
  v.pass = worst_ratio <= 2.0;
  v.detail = "noiseless KL " + fmt(base_kl) + "; " + detail +
             "; worst ratio " + fmt(worst_ratio) + " (bound 2)";
  return v;
}

// ---- criterion 8: utility destruction at 1e-1 ----

Verdict criterion_8() {
  Verdict v;
  ModelSpec spec = mnist_mlp();
  Dataset train = synth_dataset(10, 10000, {28, 28}, 1, 0);
  Dataset test = synth_dataset(10, 1000, {28, 28}, 1, 1);
  Partition part = partition_uniform(train, 20, 500, 1);

  FedConfig fed;
  fed.clients = 20;
  fed.fraction = 0.25;
  fed.rounds = 50;
  fed.epochs = 5;
  fed.batch_size = 32;
  fed.eta = 1e-4;
  fed.seed = 1;
  NoiseConfig none;
  NoiseConfig gauss;
  gauss.kind = NoiseKind::Gaussian;
  gauss.scale = 1e-1;
  gauss.injection = NoiseInjection::WeightDelta;

  FedResult clean_run = fed_train(spec, fed, none, train, part, test);
  double clean = clean_run.log.back().accuracy;
  double noisy =
      fed_train(spec, fed, gauss, train, part, test).log.back().accuracy;
  v.pass = clean >= 0.6 && noisy <= 0.15;
  v.detail = "T=50 K=20 C=0.25 eta=1e-4 B=32 E=5, 500/client: clean acc " +
             fmt(clean) + " (bound >= 0.6), gaussian-1e-1 acc " + fmt(noisy) +
             " (bound <= 0.15)";

  if (!v.pass) {
    // Context for the failure: the noise genuinely destroys the trained
    // model, and the full 500-round horizon does satisfy both bounds; see the
    // notes below and the project README.
    ModelParams trained = std::move(clean_run.params);
    Rng rng = make_rng(12345);
    std::normal_distribution<double> n(0.0, gauss.scale);
    for (auto& e : trained.entries)
      for (double& val : e.tensor.values) val += n(rng);
    double oneshot = evaluate(spec, trained, test);

    FedConfig long_run = fed;
    long_run.rounds = 500;
    long_run.epochs = 1;
    double clean500 =
        fed_train(spec, long_run, none, train, part, test).log.back().accuracy;
    double noisy500 =
        fed_train(spec, long_run, gauss, train, part, test).log.back().accuracy;

    v.notes.push_back(
        "note: a one-shot scale-0.1 perturbation of the trained clean model "
        "drops accuracy to " +
        fmt(oneshot) + ", so the noise does destroy the model;");
    v.notes.push_back(
        "note: the noisy run keeps accuracy above the bound because the " +
        std::to_string(fed.epochs * 16) +
        " local steps per round let clients partially re-fit each round's "
        "noise, an effect that grows with the per-round step count;");
    v.notes.push_back(
        "note: the noiseless bound needs ~4k total steps at eta 1e-4, which "
        "at 50 rounds forces a per-round step count deep inside that "
        "re-fitting regime - no (E, samples/client) satisfies both bounds "
        "at 50 rounds;");
    v.notes.push_back(
        "note: at the full 500-round horizon (E=1, same K, C, eta, B, "
        "scale) both bounds hold: clean " +
        fmt(clean500) + " >= 0.6, noisy " + fmt(noisy500) + " <= 0.15.");
  }
  return v;
}

// ---- criterion 9: Gram-route PCA vs direct covariance eigen-solve ----

Verdict criterion_9() {
  Verdict v;
  const size_t n = 50, D = 20, d = 10, trials = 20;
  double worst_var = 0.0, worst_proj = 0.0;
  Rng rng = make_rng(mix_seed(31, kStreamInit));
  std::normal_distribution<double> gauss(0.0, 1.0);
  for (size_t trial = 0; trial < trials; ++trial) {
    std::vector<std::vector<double>> rows(n, std::vector<double>(D));
    for (auto& r : rows)
      for (double& x : r) x = gauss(rng);

    PcaModel g = pca_fit(rows, d, PcaRoute::Gram);
    PcaModel c = pca_fit(rows, d, PcaRoute::Covariance);

    for (size_t j = 0; j < d; ++j) {
      double rel = std::abs(g.explained_variance[j] -
                            c.explained_variance[j]) /
                   std::max(c.explained_variance[j], 1e-300);
      worst_var = std::max(worst_var, rel);
    }
    // Projections may differ by a per-component sign; fix it on the first
    // row and require the rest to follow it.
    std::vector<double> sign(d, 1.0);
    std::vector<double> g0 = pca_apply(g, rows[0]);
    std::vector<double> c0 = pca_apply(c, rows[0]);
    for (size_t j = 0; j < d; ++j)
      if (g0[j] * c0[j] < 0.0) sign[j] = -1.0;
    for (const auto& r : rows) {
      std::vector<double> pg = pca_apply(g, r);
      std::vector<double> pc = pca_apply(c, r);
      for (size_t j = 0; j < d; ++j)
        worst_proj = std::max(worst_proj,
                              std::abs(pg[j] - sign[j] * pc[j]));
    }
  }
  v.pass = worst_var <= 1e-8 && worst_proj <= 1e-8;
  v.detail = "20 random 50x20 matrices, d=10: worst variance rel diff " +
             fmt(worst_var) + ", worst projection diff within sign " +
             fmt(worst_proj) + " (bounds 1e-8)";
  return v;
}

// ---- criterion 10: determinism of criteria 4 and 6 ----

Verdict criterion_10() {
  Verdict v;
  ensure_run(cluster_config(), g_cache + "/cluster_run1");
  ensure_run(attack_config(), g_cache + "/attack_run1");
  ensure_run(cluster_config(), g_cache + "/cluster_run2", /*fresh=*/true);
  ensure_run(attack_config(), g_cache + "/attack_run2", /*fresh=*/true);

  bool cluster_same =
      read_file(g_cache + "/cluster_run1/manifest.txt") ==
      read_file(g_cache + "/cluster_run2/manifest.txt");
  bool attack_same = read_file(g_cache + "/attack_run1/manifest.txt") ==
                     read_file(g_cache + "/attack_run2/manifest.txt");
  v.pass = cluster_same && attack_same;
  v.detail = std::string("same-seed manifest hashes: clustering ") +
             (cluster_same ? "identical" : "DIFFER") + ", attack " +
             (attack_same ? "identical" : "DIFFER");
  return v;
}

}  // namespace

int main(int argc, char** argv) {
  std::vector<int> only;
  for (int i = 1; i < argc; ++i) {
    if (std::strcmp(argv[i], "--only") == 0 && i + 1 < argc) {
      only.push_back(std::atoi(argv[++i]));
    } else if (std::strcmp(argv[i], "--cache") == 0 && i + 1 < argc) {
      g_cache = argv[++i];
    } else {
      std::fprintf(stderr,
                   "usage: %s [--only N]... [--cache DIR]\n", argv[0]);
      return 2;
    }
  }

  Verdict (*criteria[])() = {criterion_1, criterion_2, criterion_3,
                             criterion_4, criterion_5, criterion_6,
                             criterion_7, criterion_8, criterion_9,
                             criterion_10};

  fs::create_directories(g_cache);
  int failures = 0;
  for (int i = 1; i <= 10; ++i) {
    if (!only.empty() &&
        std::find(only.begin(), only.end(), i) == only.end())
      continue;
    auto start = std::chrono::steady_clock::now();
    Verdict v;
    try {
      v = criteria[i - 1]();
    } catch (const std::exception& e) {
      v.pass = false;
      v.detail = std::string("exception: ") + e.what();
    }
    double secs = std::chrono::duration<double>(
                      std::chrono::steady_clock::now() - start)
                      .count();
    std::printf("[criterion %d] %s (%.1f s) - %s\n", i,
                v.pass ? "PASS" : "FAIL", secs, v.detail.c_str());
    for (const auto& n : v.notes) std::printf("  %s\n", n.c_str());
    std::fflush(stdout);
    if (!v.pass) ++failures;
  }
  return failures == 0 ? 0 : 1;
}
