#include <CLI11.hpp>

#include <cstdio>
#include <exception>
#include <string>
#include <vector>

#include "fedleak/config.hpp"
#include "fedleak/experiment.hpp"
#include "fedleak/gradcheck.hpp"

namespace {

int cmd_run(const std::string& config_path,
            const std::vector<std::string>& overrides) {
  fedleak::ExperimentConfig config = fedleak::parse_config_file(config_path);
  for (const std::string& assignment : overrides)
    fedleak::apply_override(config, assignment);
  int status = fedleak::run_experiment(config);
  std::printf("%s: wrote %s/manifest.txt\n",
              fedleak::experiment_kind_name(config.kind),
              config.output_dir.c_str());
  return status;
}

int cmd_validate(const std::string& config_path) {
  fedleak::ExperimentConfig config = fedleak::parse_config_file(config_path);
  std::vector<std::string> violations = fedleak::validate_config(config);
  if (violations.empty()) {
    std::printf("ok\n");
    return 0;
  }
  for (const std::string& v : violations)
    std::fprintf(stderr, "error: %s\n", v.c_str());
  return 1;
}

int cmd_gradcheck(uint64_t seed) {
  bool ok = true;
  for (const fedleak::GradCheckReport& r :
       fedleak::run_gradient_checks(20, seed)) {
    const bool pass = r.max_rel_err < 1e-4;
    std::printf("%-45s max_rel_err %.3e  %s\n", r.case_name.c_str(),
                r.max_rel_err, pass ? "ok" : "FAIL");
    if (!pass) ok = false;
  }
  return ok ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"federated label-distribution leakage toolkit"};
  app.require_subcommand(1);

  std::string config_path;
  std::vector<std::string> overrides;
  CLI::App* run = app.add_subcommand("run", "run an experiment config");
  run->add_option("config", config_path, "experiment config file")->required();
  run->add_option("--set", overrides, "override, key=value (repeatable)");

  std::string validate_path;
  CLI::App* validate =
      app.add_subcommand("validate", "check a config without running it");
  validate->add_option("config", validate_path, "experiment config file")
      ->required();

  uint64_t gradcheck_seed = 0;
  CLI::App* gradcheck =
      app.add_subcommand("gradcheck", "finite-difference gradient audit");
  gradcheck->add_option("--seed", gradcheck_seed, "rng seed");

  CLI11_PARSE(app, argc, argv);

  try {
    if (run->parsed()) return cmd_run(config_path, overrides);
    if (validate->parsed()) return cmd_validate(validate_path);
    return cmd_gradcheck(gradcheck_seed);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
}
