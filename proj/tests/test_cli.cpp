#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "fedleak/config.hpp"
#include "fedleak/experiment.hpp"
#include "fedleak/io.hpp"

using namespace fedleak;
namespace fs = std::filesystem;

namespace {

std::string slurp(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  REQUIRE(bool(f));
  std::ostringstream buf;
  buf << f.rdbuf();
  return buf.str();
}

size_t line_count(const std::string& text) {
  size_t n = 0;
  for (char c : text)
    if (c == '\n') ++n;
  return n;
}

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& name)
      : path(fs::temp_directory_path() / name) {
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  std::string str() const { return path.string(); }
};

std::string tiny_fedtrain_config(const std::string& out_dir) {
  return "# smallest useful run\n"
         "experiment = fedtrain\n"
         "seed = 5\n"
         "output_dir = " + out_dir + "\n"
         "dataset.source = synth\n"
         "dataset.synth_train = 200\n"
         "dataset.synth_test = 100\n"
         "model = mnist-mlp\n"
         "fed.clients = 4\n"
         "fed.fraction = 1.0\n"
         "fed.rounds = 2\n"
         "fed.epochs = 1\n"
         "fed.batch_size = 10\n"
         "fed.eta = 0.05\n"
         "partition.samples_per_client = 30\n";
}

}  // namespace

TEST_CASE("sha256 matches the published test vector") {
  CHECK(sha256_hex("abc") ==
        "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
  CHECK(sha256_hex("") ==
        "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
}

TEST_CASE("manifest lists files sorted with their hashes") {
  TempDir tmp("fedleak_manifest_test");
  write_text_file(tmp.str() + "/b.csv", "2\n");
  write_text_file(tmp.str() + "/a.csv", "1\n");
  write_manifest(tmp.str(), {"b.csv", "a.csv"});
  std::string manifest = slurp(tmp.str() + "/manifest.txt");
  CHECK(manifest == sha256_hex("1\n") + "  a.csv\n" + sha256_hex("2\n") +
                        "  b.csv\n");
}

TEST_CASE("config parsing handles comments, sections, and overrides") {
  TempDir tmp("fedleak_config_test");
  const std::string path = tmp.str() + "/c.cfg";
  write_text_file(path,
                  "experiment = attack   # trailing comment\n"
                  "\n"
                  "seed = 42\n"
                  "attack.alphas = 0.1, 1, 10\n"
                  "attack.match_noise = no\n"
                  "noise.kind = laplace\n"
                  "noise.injection = weight-delta\n"
                  "partition.scheme = skewed-8020\n");
  ExperimentConfig c = parse_config_file(path);
  CHECK(c.kind == ExperimentKind::Attack);
  CHECK(c.seed == 42);
  REQUIRE(c.alphas.size() == 3);
  CHECK(c.alphas[1] == 1.0);
  CHECK_FALSE(c.match_noise);
  CHECK(c.noise.kind == NoiseKind::Laplace);
  CHECK(c.noise.injection == NoiseInjection::WeightDelta);
  CHECK(c.scheme == SchemeKind::Skewed8020);

  apply_override(c, "fed.eta=0.5");
  CHECK(c.fed.eta == 0.5);
  CHECK_THROWS(apply_override(c, "fed.step=0.5"));
  CHECK_THROWS(apply_override(c, "no-equals-sign"));
}

TEST_CASE("config parsing is strict and reports every problem at once") {
  TempDir tmp("fedleak_strict_test");
  const std::string path = tmp.str() + "/bad.cfg";
  write_text_file(path,
                  "experiment = fedtrain\n"
                  "fed.clientz = 3\n"
                  "fed.eta = fast\n"
                  "fed.clients = 2\n"
                  "fed.clients = 4\n"
                  "just some words\n");
  try {
    parse_config_file(path);
    FAIL("expected a parse error");
  } catch (const std::runtime_error& e) {
    std::string msg = e.what();
    CHECK(msg.find("line 2: unknown key 'fed.clientz'") != std::string::npos);
    CHECK(msg.find("line 3") != std::string::npos);
    CHECK(msg.find("line 5: duplicate key 'fed.clients'") !=
          std::string::npos);
    CHECK(msg.find("line 6: expected key = value") != std::string::npos);
  }
  CHECK_THROWS(parse_config_file(tmp.str() + "/missing.cfg"));
}

TEST_CASE("validate_config returns all violations") {
  ExperimentConfig c;
  c.kind = ExperimentKind::Attack;
  c.fed.fraction = 0.0;
  c.alphas = {1.0};
  c.train_per_alpha = 5;
  c.pca_dims = 10;  // above the 4 permitted by 5 dummies
  c.predictor_epochs = 0;
  std::vector<std::string> v = validate_config(c);
  auto has = [&](const std::string& needle) {
    for (const std::string& msg : v)
      if (msg.find(needle) != std::string::npos) return true;
    return false;
  };
  CHECK(has("client fraction must be in (0,1]"));
  CHECK(has("pca_dims must be below the dummy-client count"));
  CHECK(has("predictor.epochs"));
  CHECK(v.size() >= 3);

  c.alphas.clear();
  v = validate_config(c);
  CHECK(has("attack.alphas must not be empty"));
  CHECK(has("client fraction must be in (0,1]"));

  ExperimentConfig ok;
  ok.kind = ExperimentKind::GradCheck;
  CHECK(validate_config(ok).empty());
}

TEST_CASE("fedtrain experiment writes a log and reproduces its manifest") {
  TempDir tmp("fedleak_run_test");
  const std::string cfg_path = tmp.str() + "/run.cfg";
  write_text_file(cfg_path, tiny_fedtrain_config(tmp.str() + "/out1"));
  ExperimentConfig c = parse_config_file(cfg_path);
  REQUIRE(validate_config(c).empty());
  REQUIRE(run_experiment(c) == 0);

  std::string rounds = slurp(tmp.str() + "/out1/rounds.csv");
  CHECK(rounds.rfind("round,accuracy,mean_client_loss,selected_ids\n", 0) ==
        0);
  CHECK(line_count(rounds) == 3);  // header + two rounds

  apply_override(c, "output_dir=" + tmp.str() + "/out2");
  REQUIRE(run_experiment(c) == 0);
  CHECK(slurp(tmp.str() + "/out1/manifest.txt") ==
        slurp(tmp.str() + "/out2/manifest.txt"));
}

TEST_CASE("missing dataset files are reported by path") {
  ExperimentConfig c;
  c.kind = ExperimentKind::FedTrain;
  c.source = DatasetSource::Mnist;
  c.data_dir = "/tmp/fedleak_definitely_missing";
  c.synth_train = 10000;
  TempDir out("fedleak_missing_data_test");
  c.output_dir = out.str();
  try {
    run_experiment(c);
    FAIL("expected a load error");
  } catch (const std::exception& e) {
    CHECK(std::string(e.what()).find("/tmp/fedleak_definitely_missing") !=
          std::string::npos);
  }
}

TEST_CASE("FEDLEAK_DATA_DIR supplies the default dataset root") {
  setenv("FEDLEAK_DATA_DIR", "/tmp/fedleak_env_root", 1);
  ExperimentConfig c;
  c.kind = ExperimentKind::FedTrain;
  c.source = DatasetSource::Mnist;
  TempDir out("fedleak_env_test");
  c.output_dir = out.str();
  try {
    run_experiment(c);
    FAIL("expected a load error");
  } catch (const std::exception& e) {
    CHECK(std::string(e.what()).find("/tmp/fedleak_env_root") !=
          std::string::npos);
  }
  unsetenv("FEDLEAK_DATA_DIR");
}

TEST_CASE("cluster-viz emits projection and purity tables") {
  TempDir tmp("fedleak_viz_test");
  ExperimentConfig c;
  c.kind = ExperimentKind::ClusterViz;
  c.seed = 9;
  c.output_dir = tmp.str() + "/out";
  c.synth_train = 400;
  c.synth_test = 100;
  c.fed.clients = 10;
  c.fed.batch_size = 10;
  c.fed.eta = 0.05;
  c.scheme = SchemeKind::Skewed8020;
  c.samples_per_client = 30;
  c.knn_k = 3;
  REQUIRE(validate_config(c).empty());
  REQUIRE(run_experiment(c) == 0);

  std::string proj = slurp(c.output_dir + "/projection.csv");
  CHECK(proj.rfind("client_id,layer,x,y,dominant_label,dominant_fraction\n",
                   0) == 0);
  CHECK(line_count(proj) == 11);  // header + one row per client

  std::string purity = slurp(c.output_dir + "/purity.csv");
  CHECK(purity.rfind("layer,k,purity\n", 0) == 0);
  CHECK(purity.find("\nall,3,") != std::string::npos);
  CHECK(purity.find("\nall-untrained,3,") != std::string::npos);
}

TEST_CASE("layer-viz covers each parameterized layer plus the full model") {
  TempDir tmp("fedleak_layerviz_test");
  ExperimentConfig c;
  c.kind = ExperimentKind::LayerViz;
  c.seed = 10;
  c.output_dir = tmp.str() + "/out";
  c.synth_train = 200;
  c.synth_test = 50;
  c.fed.clients = 5;
  c.fed.batch_size = 10;
  c.fed.eta = 0.05;
  c.samples_per_client = 20;
  c.knn_k = 2;
  REQUIRE(run_experiment(c) == 0);

  // mnist-mlp has dense layers at indices 1 and 3.
  std::string purity = slurp(c.output_dir + "/purity.csv");
  CHECK(purity.find("\n1,2,") != std::string::npos);
  CHECK(purity.find("\n3,2,") != std::string::npos);
  CHECK(purity.find("\nall,2,") != std::string::npos);
  std::string proj = slurp(c.output_dir + "/projection.csv");
  CHECK(line_count(proj) == 1 + 3 * 5);
}

TEST_CASE("attack experiment writes its full artifact set deterministically") {
  TempDir tmp("fedleak_attack_run_test");
  ExperimentConfig c;
  c.kind = ExperimentKind::Attack;
  c.seed = 77;
  c.output_dir = tmp.str() + "/out1";
  c.synth_train = 200;
  c.synth_test = 100;
  c.alphas = {1.0};
  c.train_per_alpha = 8;
  c.test_per_alpha = 3;
  c.samples_per_dummy = 10;
  c.dummy_batch = 5;
  c.dummy_eta = 0.01;
  c.pca_dims = 4;
  c.predictor_hidden_layers = 2;
  c.predictor_hidden_width = 32;
  c.predictor_epochs = 4;
  c.predictor_batch = 4;
  REQUIRE(validate_config(c).empty());
  REQUIRE(run_experiment(c) == 0);

  for (const char* name :
       {"meta.bin", "predictor_curve.csv", "attack_eval.csv",
        "predictions.csv", "manifest.txt"})
    CHECK(fs::exists(fs::path(c.output_dir) / name));

  std::string curve = slurp(c.output_dir + "/predictor_curve.csv");
  CHECK(line_count(curve) == 5);  // header + one row per epoch
  std::string preds = slurp(c.output_dir + "/predictions.csv");
  CHECK(line_count(preds) == 4);  // header + one row per test dummy

  c.output_dir = tmp.str() + "/out2";
  REQUIRE(run_experiment(c) == 0);
  CHECK(slurp(tmp.str() + "/out1/manifest.txt") ==
        slurp(tmp.str() + "/out2/manifest.txt"));
}

TEST_CASE("defense sweep collapses zero scale and logs every entry") {
  TempDir tmp("fedleak_sweep_test");
  ExperimentConfig c;
  c.kind = ExperimentKind::DefenseSweep;
  c.seed = 31;
  c.output_dir = tmp.str() + "/out";
  c.synth_train = 200;
  c.synth_test = 100;
  c.fed.clients = 4;
  c.fed.rounds = 2;
  c.fed.batch_size = 10;
  c.fed.eta = 0.05;
  c.samples_per_client = 30;
  c.sweep_scales = {0.0, 0.01};
  c.alphas = {1.0};
  c.train_per_alpha = 8;
  c.test_per_alpha = 3;
  c.samples_per_dummy = 10;
  c.dummy_batch = 5;
  c.pca_dims = 4;
  c.predictor_hidden_layers = 2;
  c.predictor_hidden_width = 32;
  c.predictor_epochs = 3;
  c.predictor_batch = 4;
  REQUIRE(validate_config(c).empty());
  REQUIRE(run_experiment(c) == 0);

  for (const char* name : {"rounds_none-0.csv", "rounds_gaussian-0.01.csv",
                           "rounds_laplace-0.01.csv", "sweep.csv"})
    CHECK(fs::exists(fs::path(c.output_dir) / name));
  std::string sweep = slurp(c.output_dir + "/sweep.csv");
  CHECK(sweep.rfind("kind,scale,final_accuracy,predictor_test_loss,mean_kl\n",
                    0) == 0);
  CHECK(line_count(sweep) == 4);  // header + none + gaussian + laplace
}

TEST_CASE("gradcheck experiment reports every case under tolerance") {
  TempDir tmp("fedleak_gradcheck_run_test");
  ExperimentConfig c;
  c.kind = ExperimentKind::GradCheck;
  c.output_dir = tmp.str() + "/out";
  REQUIRE(run_experiment(c) == 0);
  std::string csv = slurp(c.output_dir + "/gradcheck.csv");
  CHECK(csv.rfind("case,instances,entries_checked,max_rel_err\n", 0) == 0);
  CHECK(line_count(csv) >= 8);
}
