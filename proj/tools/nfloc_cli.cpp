// SPDX-License-Identifier: Apache-2.0
//
// nfloc - near-field multi-source localization with RF-chain-reduced arrays
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
// http://www.apache.org/licenses/LICENSE-2.0
//
// Batch CLI: scenario configs in, CSV tables out. Exit codes: 0 success,
// 2 config error, 3 numerical failure.

#include <cstdint>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <thread>

#include <CLI11.hpp>

#include "nfloc/csv_writer.hpp"
#include "nfloc/nfloc.hpp"

namespace {

struct CommonArgs {
  std::string config_path;
  std::string out_dir = ".";
  int workers = 0;  // 0 = available parallelism
  std::optional<std::uint64_t> seed_override;
};

void add_common_options(CLI::App* cmd, CommonArgs& args) {
  cmd->add_option("--config", args.config_path, "Path to the JSON run configuration")
      ->required();
  cmd->add_option("--out", args.out_dir, "Output directory for CSV files");
  cmd->add_option("--workers", args.workers,
                  "Worker threads (0 = available parallelism)");
  cmd->add_option("--seed-override", args.seed_override,
                  "Replace the config's base seed");
}

nfloc::RunConfig load(const CommonArgs& args) {
  nfloc::RunConfig rc = nfloc::load_run_config(args.config_path);
  if (args.seed_override) {
    rc.spec.base_seed = *args.seed_override;
    rc.resolved["estimation"]["base_seed"] = *args.seed_override;
  }
  return rc;
}

int effective_workers(const CommonArgs& args) {
  if (args.workers > 0) return args.workers;
  const unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : static_cast<int>(hw);
}

void common_header(nfloc::CsvWriter& csv, const char* command, const nfloc::RunConfig& rc) {
  csv.comment(std::string("nfloc ") + command);
  csv.comment("config: " + rc.resolved.dump());
  csv.comment("base_seed: " + std::to_string(rc.spec.base_seed));
}

std::string out_path(const CommonArgs& args, const char* file_name) {
  std::filesystem::create_directories(args.out_dir);
  return (std::filesystem::path(args.out_dir) / file_name).string();
}

void note_written(const nfloc::RunConfig& rc, const std::string& path) {
  if (rc.verbosity > 0) std::cerr << "wrote " << path << "\n";
}

int cmd_snr_sweep(const CommonArgs& args) {
  const nfloc::RunConfig rc = load(args);
  const auto rows = nfloc::snr_sweep(rc.spec, effective_workers(args));
  nfloc::CsvWriter csv;
  common_header(csv, "snr-sweep", rc);
  csv.header({"scheme", "snr_db", "rmse_m", "ci95_m", "n_trials", "seed"});
  for (const auto& r : rows)
    csv.row({r.scheme, nfloc::csv_number(r.snr_db), nfloc::csv_number(r.rmse_m),
             nfloc::csv_number(r.ci95_m), nfloc::csv_number(r.n_trials),
             nfloc::csv_number(r.seed)});
  const std::string path = out_path(args, "snr_sweep.csv");
  csv.write_file(path);
  note_written(rc, path);
  return 0;
}

int cmd_heatmap(const CommonArgs& args) {
  const nfloc::RunConfig rc = load(args);
  if (!rc.heatmap)
    throw nfloc::ConfigError("config error: heatmap command needs a $.heatmap section");
  const auto cells = nfloc::heatmap_sweep(rc.spec, *rc.heatmap, effective_workers(args));
  nfloc::CsvWriter csv;
  common_header(csv, "heatmap", rc);
  if (rc.heatmap->mode == nfloc::HeatmapSpec::Mode::FixedFocus) {
    const auto f = rc.heatmap->focus.cartesian();
    csv.comment("focus: d_m=" + nfloc::csv_number(rc.heatmap->focus.distance_m) +
                " theta_rad=" + nfloc::csv_number(rc.heatmap->focus.azimuth_rad) +
                " x_m=" + nfloc::csv_number(f.x()) + " y_m=" + nfloc::csv_number(f.y()));
  }
  csv.header({"x_m", "y_m", "rmse_m"});
  for (const auto& c : cells)
    csv.row({nfloc::csv_number(c.x_m), nfloc::csv_number(c.y_m),
             nfloc::csv_number(c.rmse_m)});
  const std::string path = out_path(args, "heatmap.csv");
  csv.write_file(path);
  note_written(rc, path);
  return 0;
}

int cmd_converge(const CommonArgs& args) {
  const nfloc::RunConfig rc = load(args);
  const auto rows = nfloc::convergence_track(rc.spec, effective_workers(args));
  nfloc::CsvWriter csv;
  common_header(csv, "converge", rc);
  csv.header({"scheme", "iteration", "rmse_m"});
  for (const auto& r : rows)
    csv.row({r.scheme, nfloc::csv_number(r.iteration), nfloc::csv_number(r.rmse_m)});
  const std::string path = out_path(args, "converge.csv");
  csv.write_file(path);
  note_written(rc, path);
  return 0;
}

int cmd_rf_sweep(const CommonArgs& args) {
  const nfloc::RunConfig rc = load(args);
  if (rc.rf_counts.empty())
    throw nfloc::ConfigError("config error: rf-sweep command needs a $.rf_sweep section");
  const auto rows = nfloc::rf_sweep(rc.spec, rc.rf_counts, effective_workers(args));
  nfloc::CsvWriter csv;
  common_header(csv, "rf-sweep", rc);
  csv.header({"scheme", "rf_count", "snr_db", "rmse_m", "ci95_m", "n_trials", "seed"});
  for (const auto& r : rows)
    csv.row({r.scheme, nfloc::csv_number(r.rf_count), nfloc::csv_number(r.snr_db),
             nfloc::csv_number(r.rmse_m), nfloc::csv_number(r.ci95_m),
             nfloc::csv_number(r.n_trials), nfloc::csv_number(r.seed)});
  const std::string path = out_path(args, "rf_sweep.csv");
  csv.write_file(path);
  note_written(rc, path);
  return 0;
}

int cmd_single_run(const CommonArgs& args) {
  const nfloc::RunConfig rc = load(args);
  if (!rc.single_run)
    throw nfloc::ConfigError("config error: single-run command needs a $.single_run section");

  const nfloc::SchemeConfig* scheme = nullptr;
  for (const auto& s : rc.spec.schemes)
    if (s.label == rc.single_run->scheme_label) scheme = &s;
  if (!scheme)
    throw nfloc::ConfigError("config error: unknown scheme " + rc.single_run->scheme_label);

  const std::uint64_t seed = nfloc::mix_seed(rc.spec.base_seed, 424242);
  const nfloc::TrialOutcome trial =
      nfloc::run_scheme_trial(rc.spec, *scheme, rc.single_run->snr_db, seed);

  nfloc::CsvWriter csv;
  common_header(csv, "single-run", rc);
  csv.comment("scheme: " + scheme->label +
              " snr_db: " + nfloc::csv_number(rc.single_run->snr_db) +
              " trial_seed: " + std::to_string(seed));
  csv.header({"iteration", "user_index", "d_m", "theta_rad", "x_m", "y_m", "objective"});
  const auto& track = trial.localization.per_iteration_track;
  for (std::size_t k = 0; k < track.size(); ++k) {
    const double objective = trial.localization.objective_track[k];
    for (int u = 0; u < track[k].size(); ++u) {
      const nfloc::SourcePosition& p = track[k].hypotheses[static_cast<std::size_t>(u)];
      const auto xy = p.cartesian();
      csv.row({nfloc::csv_number(static_cast<int>(k)), nfloc::csv_number(u),
               nfloc::csv_number(p.distance_m), nfloc::csv_number(p.azimuth_rad),
               nfloc::csv_number(xy.x()), nfloc::csv_number(xy.y()),
               nfloc::csv_number(objective)});
    }
  }
  const std::string path = out_path(args, "single_run.csv");
  csv.write_file(path);
  note_written(rc, path);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Near-field multi-source localization experiments"};
  app.require_subcommand(1);

  CommonArgs args;
  int (*handler)(const CommonArgs&) = nullptr;

  auto* snr = app.add_subcommand("snr-sweep", "RMSE vs SNR per scheme");
  add_common_options(snr, args);
  snr->callback([&]() { handler = cmd_snr_sweep; });

  auto* heat = app.add_subcommand("heatmap", "Spatial RMSE map");
  add_common_options(heat, args);
  heat->callback([&]() { handler = cmd_heatmap; });

  auto* conv = app.add_subcommand("converge", "Per-iteration RMSE per scheme");
  add_common_options(conv, args);
  conv->callback([&]() { handler = cmd_converge; });

  auto* rf = app.add_subcommand("rf-sweep", "RMSE vs RF-chain count");
  add_common_options(rf, args);
  rf->callback([&]() { handler = cmd_rf_sweep; });

  auto* single = app.add_subcommand("single-run", "One trial with its estimate track");
  add_common_options(single, args);
  single->callback([&]() { handler = cmd_single_run; });

  CLI11_PARSE(app, argc, argv);

  try {
    return handler(args);
  } catch (const nfloc::ConfigError& e) {
    std::cerr << e.what() << "\n";
    return 2;
  } catch (const nfloc::NumericalError& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
}
