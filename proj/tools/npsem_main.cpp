// Command-line front end: simulate / fit / compare / impute / validate-config.
// Exit codes: 0 success, 2 configuration error, 3 numeric failure.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "npsem/config.hpp"
#include "npsem/csv.hpp"
#include "npsem/errors.hpp"
#include "npsem/estimators.hpp"
#include "npsem/harness.hpp"
#include "npsem/llr.hpp"
#include "npsem/parallel.hpp"
#include "npsem/wave.hpp"

namespace fs = std::filesystem;
using namespace npsem;

namespace {

struct CommonOpts {
  std::string config_path;
  std::string out_dir = ".";
  std::optional<std::uint64_t> seed;
  int snapshot_every = 0;
  int threads = 1;
};

void add_common(CLI::App* cmd, CommonOpts* opts, bool with_snapshots) {
  cmd->add_option("--config", opts->config_path, "experiment config (JSON)")
      ->required();
  cmd->add_option("--seed", opts->seed, "override the config seed");
  cmd->add_option("--out", opts->out_dir, "output directory (created)");
  if (with_snapshots) {
    cmd->add_option("--snapshot-every", opts->snapshot_every,
                    "write the surrogate catalog every n iterations");
  }
  cmd->add_option("--threads", opts->threads,
                  "worker threads (0 = hardware concurrency)");
}

ExperimentConfig load(const CommonOpts& opts) {
  ExperimentConfig cfg = load_config(opts.config_path);
  if (opts.seed) cfg.seeds = *opts.seed;
  cfg.validate();
  set_thread_count(opts.threads);
  fs::create_directories(opts.out_dir);
  return cfg;
}

std::string at(const std::string& dir, const std::string& name) {
  return (fs::path(dir) / name).string();
}

int cmd_validate_config(const CommonOpts& opts) {
  ExperimentConfig cfg = load_config(opts.config_path);
  if (opts.seed) cfg.seeds = *opts.seed;
  cfg.validate();
  std::cout << config_to_json(cfg) << "\n";
  return 0;
}

int cmd_simulate(const CommonOpts& opts) {
  const ExperimentConfig cfg = load(opts);
  for (int rep = 1; rep <= cfg.replications; ++rep) {
    const std::string suffix = "_r" + std::to_string(rep) + ".csv";
    if (cfg.model == "csv-data") {
      RandomStream rng = RandomStream(cfg.seeds)
                             .lane(rng_lane::kReplication,
                                   static_cast<uint64_t>(rep))
                             .lane(rng_lane::kWave, 1);
      const WaveSeries series = synthesize_wave(cfg.T + cfg.T_prime, rng);
      write_wave_csv(at(opts.out_dir, "wave" + suffix), series);
      continue;
    }
    const ReplicationData data = simulate_replication(cfg, rep);
    write_states_csv(at(opts.out_dir, "states" + suffix), data.learning.states);
    write_observations_csv(at(opts.out_dir, "observations" + suffix),
                           data.learning.obs);
    write_states_csv(at(opts.out_dir, "validation_states" + suffix),
                     data.validation.states);
    write_observations_csv(at(opts.out_dir, "validation_observations" + suffix),
                           data.validation.obs);
  }
  return 0;
}

int report_failures(const ReconstructionReport& report) {
  int failed = 0;
  for (const AlgorithmScore& e : report.entries) {
    if (e.ok) continue;
    ++failed;
    std::cerr << "replication " << e.replication << " " << e.algorithm
              << " failed: " << e.error << "\n";
  }
  return failed;
}

int cmd_fit(const CommonOpts& opts) {
  const ExperimentConfig cfg = load(opts);
  if (cfg.algorithms.size() != 1) {
    throw ConfigError("fit needs exactly one entry in algorithms");
  }
  const std::string& tag = cfg.algorithms.front();
  const ReplicationData data = simulate_replication(cfg, 1);
  const InitializationResult init =
      em_initialize(data.learning.obs, default_initial(cfg.model, cfg.state_dim()),
                    cfg.true_theta.parameterization());

  SemResult fit;
  ReconstructionReport report;
  report.entries.push_back(run_algorithm(cfg, 1, tag, data, init, &fit));

  write_trace_csv(at(opts.out_dir, "trace_r1_" + tag + ".csv"), fit.trace,
                  /*include_wallclock=*/true);
  write_report_csv(at(opts.out_dir, "report.csv"), report);
  if (fit.last_ensemble.size() > 0) {
    write_ensemble_csv(at(opts.out_dir, "ensemble.csv"), fit.last_ensemble);
  }
  if (opts.snapshot_every > 0) {
    for (std::size_t i = 0; i < fit.dynamics_by_record.size(); ++i) {
      const int iter = fit.trace.records[i].iter;
      if (iter % opts.snapshot_every != 0) continue;
      const auto* surrogate =
          dynamic_cast<const LlrSurrogate*>(fit.dynamics_by_record[i].get());
      if (!surrogate) continue;
      write_catalog_csv(
          at(opts.out_dir, "catalog_iter" + std::to_string(iter) + ".csv"),
          surrogate->catalog());
    }
  }
  return report_failures(report) > 0 ? 3 : 0;
}

int cmd_compare(const CommonOpts& opts) {
  const ExperimentConfig cfg = load(opts);
  const ReconstructionReport report = run_comparison(cfg);
  write_report_csv(at(opts.out_dir, "report.csv"), report);
  for (const AlgorithmScore& e : report.entries) {
    // wallclock omitted: compare outputs are byte-reproducible
    write_trace_csv(at(opts.out_dir, "trace_r" + std::to_string(e.replication) +
                                         "_" + e.algorithm + ".csv"),
                    e.trace, /*include_wallclock=*/false);
  }
  return report_failures(report) > 0 ? 3 : 0;
}

int cmd_impute(const CommonOpts& opts) {
  const ExperimentConfig cfg = load(opts);
  const std::vector<ImputationEntry> entries = run_imputation(cfg);
  write_imputation_report_csv(at(opts.out_dir, "report.csv"), entries);
  int failed = 0;
  for (const ImputationEntry& e : entries) {
    const std::string stem =
        "r" + std::to_string(e.replication) + "_" + e.algorithm;
    write_trace_csv(at(opts.out_dir, "trace_" + stem + ".csv"), e.trace,
                    /*include_wallclock=*/false);
    if (e.ok) {
      write_imputed_series_csv(at(opts.out_dir, "imputed_" + stem + ".csv"), e);
    } else {
      ++failed;
      std::cerr << "replication " << e.replication << " " << e.algorithm
                << " failed: " << e.error << "\n";
    }
  }
  return failed > 0 ? 3 : 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"nonparametric state-space estimation"};
  app.require_subcommand(1);

  CommonOpts opts;
  CLI::App* c_sim = app.add_subcommand("simulate", "draw data from the model");
  add_common(c_sim, &opts, false);
  CLI::App* c_fit =
      app.add_subcommand("fit", "run one estimation algorithm, keep artifacts");
  add_common(c_fit, &opts, true);
  CLI::App* c_cmp =
      app.add_subcommand("compare", "run the algorithm comparison grid");
  add_common(c_cmp, &opts, false);
  CLI::App* c_imp =
      app.add_subcommand("impute", "fill observation gaps with covariates");
  add_common(c_imp, &opts, false);
  CLI::App* c_val =
      app.add_subcommand("validate-config", "check a config, echo normalized");
  add_common(c_val, &opts, false);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (c_val->parsed()) return cmd_validate_config(opts);
    if (c_sim->parsed()) return cmd_simulate(opts);
    if (c_fit->parsed()) return cmd_fit(opts);
    if (c_cmp->parsed()) return cmd_compare(opts);
    return cmd_impute(opts);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const NumericError& e) {
    std::cerr << "numeric failure: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
}
