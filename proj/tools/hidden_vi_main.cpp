#include <cstdlib>
#include <iostream>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "hiddenvi/errors.hpp"
#include "hiddenvi/experiments.hpp"
#include "hiddenvi/verify.hpp"

namespace {

int threads_fallback() {
  if (const char* env = std::getenv("HIDDEN_VI_THREADS")) {
    try {
      return std::stoi(env);
    } catch (...) {
      return 1;
    }
  }
  return 1;
}

int cmd_run(const std::string& config_path, const std::string& out_override,
            long long seed_override, int threads_override, bool threads_set) {
  hiddenvi::ExperimentConfig cfg;
  try {
    cfg = hiddenvi::ExperimentConfig::from_file(config_path);
    if (!out_override.empty()) cfg.out_dir = out_override;
    if (seed_override >= 0) cfg.master_seed = static_cast<std::uint64_t>(seed_override);
    cfg.threads = threads_set ? threads_override : (cfg.raw.contains("threads")
                                                        ? cfg.threads
                                                        : threads_fallback());
    if (cfg.threads < 0) throw hiddenvi::ConfigError("threads must be >= 0");
  } catch (const hiddenvi::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  }

  try {
    const hiddenvi::RunSummary summary = hiddenvi::execute_experiment(cfg);
    hiddenvi::write_outputs(cfg, summary);
    std::cout << cfg.experiment << ": " << summary.runs.size() << " run(s) -> " << cfg.out_dir
              << "\n";
    if (summary.aborted_runs > 0) {
      std::cerr << summary.aborted_runs
                << " run(s) hit a numerical blowup; partial CSV retained\n";
      return 3;
    }
    return 0;
  } catch (const hiddenvi::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
}

int cmd_verify(bool corrupt_jacobian) {
  hiddenvi::VerifyHooks hooks;
  hooks.corrupt_jacobian = corrupt_jacobian;
  const auto results = hiddenvi::run_verification(hooks);

  std::size_t width = 0;
  for (const auto& r : results) width = std::max(width, r.name.size());
  std::size_t failures = 0;
  for (const auto& r : results) {
    std::cout << (r.pass ? "[PASS] " : "[FAIL] ") << r.name;
    for (std::size_t i = r.name.size(); i < width + 2; ++i) std::cout << ' ';
    std::cout << r.detail << "\n";
    if (!r.pass) ++failures;
  }
  std::cout << results.size() - failures << "/" << results.size() << " checks passed\n";
  return failures == 0 ? 0 : 1;
}

int cmd_list(bool as_json) {
  const auto& catalog = hiddenvi::experiment_catalog();
  if (as_json) {
    nlohmann::json j = nlohmann::json::array();
    for (const auto& e : catalog)
      j.push_back({{"name", e.name}, {"figure", e.figure}, {"description", e.description}});
    std::cout << j.dump(2) << "\n";
    return 0;
  }
  for (const auto& e : catalog) {
    std::cout << e.name;
    for (std::size_t i = e.name.size(); i < 18; ++i) std::cout << ' ';
    std::cout << "figure " << e.figure;
    for (std::size_t i = e.figure.size(); i < 6; ++i) std::cout << ' ';
    std::cout << e.description << "\n";
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"hidden-vi: surrogate-loss solvers for variational inequalities with hidden "
               "monotone structure"};
  app.require_subcommand(1);

  std::string config_path, out_override;
  long long seed_override = -1;
  int threads_override = 1;
  auto* run = app.add_subcommand("run", "run an experiment from a config file");
  run->add_option("config", config_path, "JSON experiment config")->required();
  run->add_option("--out", out_override, "output directory override");
  run->add_option("--seed", seed_override, "master seed override");
  auto* threads_opt = run->add_option("--threads", threads_override,
                                      "worker threads across seeds (0 = hardware)");

  bool corrupt_jacobian = false;
  auto* verify = app.add_subcommand("verify", "run every invariant and property suite");
  verify->add_flag("--corrupt-jacobian", corrupt_jacobian, "negative-control hook")
      ->group("");  // hidden

  bool as_json = false;
  auto* list = app.add_subcommand("list", "list available experiments");
  list->add_flag("--json", as_json, "machine-readable output");

  CLI11_PARSE(app, argc, argv);

  if (run->parsed())
    return cmd_run(config_path, out_override, seed_override, threads_override,
                   threads_opt->count() > 0);
  if (verify->parsed()) return cmd_verify(corrupt_jacobian);
  if (list->parsed()) return cmd_list(as_json);
  return 0;
}
