// SPDX-License-Identifier: Apache-2.0
//
// nfloc - near-field multi-source localization with RF-chain-reduced arrays
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
// http://www.apache.org/licenses/LICENSE-2.0

#ifndef NFLOC_PIPELINE_HPP
#define NFLOC_PIPELINE_HPP

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>
#include <vector>

#include "nfloc/localizer.hpp"
#include "nfloc/tuning.hpp"

namespace nfloc {

/// How the analog weights are obtained over a trial.
enum class QMode {
  Alternating,    // joint localization and tuning, random initial weights
  GivenPosition,  // oracle tuning at the true positions, then localization only
  FixedRandom,    // random weights held fixed
};

inline const char* to_string(QMode m) {
  switch (m) {
    case QMode::Alternating: return "alternating";
    case QMode::GivenPosition: return "given_position";
    case QMode::FixedRandom: return "fixed_random";
  }
  return "?";
}

/// One curve of an experiment: an architecture with its tuning policy and
/// optional element-spacing override (e.g. quarter-wavelength DMA rows).
struct SchemeConfig {
  std::string label;
  ArchitectureKind architecture = ArchitectureKind::FullyDigital;
  TuningMethod tuning = TuningMethod::None;
  QMode q_mode = QMode::Alternating;
  int n_cols_override = 0;              // 0 = use the experiment default
  double col_spacing_override_m = 0.0;  // 0 = use the experiment default
};

/// Full scenario description driving reproducible runs.
struct ExperimentSpec {
  int n_rows = 4;
  int n_cols = 8;
  double row_spacing_m = 0.025;
  double col_spacing_m = 0.005;
  double wavelength_m = 0.01;

  double carrier_frequency_hz = 28e9;
  double speed_of_light_m_s = kSpeedOfLight;
  double pilot_phase_rad = 0.0;
  int n_snapshots = 50;

  double waveguide_attenuation_per_m = 0.6;
  double waveguide_wavenumber_per_m = 827.67;

  std::vector<SourcePosition> users;
  std::vector<double> snr_grid_db;
  int monte_carlo_trials = 50;
  SearchGrid grid;
  int max_outer_iterations = 6;
  RcgSettings rcg;
  std::uint64_t base_seed = 1;

  std::vector<SchemeConfig> schemes;

  void validate() const {
    if (users.empty()) throw std::invalid_argument("ExperimentSpec: no users");
    if (monte_carlo_trials < 1)
      throw std::invalid_argument("ExperimentSpec: trials must be >= 1");
    if (n_snapshots < 1)
      throw std::invalid_argument("ExperimentSpec: n_snapshots must be >= 1");
    grid.validate();
    rcg.validate();
  }
};

inline ArrayLayout layout_for(const ExperimentSpec& spec, const SchemeConfig& scheme) {
  const int n_cols = scheme.n_cols_override > 0 ? scheme.n_cols_override : spec.n_cols;
  const double col_spacing = scheme.col_spacing_override_m > 0.0
                                 ? scheme.col_spacing_override_m
                                 : spec.col_spacing_m;
  return build_layout(spec.n_rows, n_cols, spec.wavelength_m, spec.row_spacing_m,
                      col_spacing);
}

inline Architecture architecture_for(const ExperimentSpec& spec, const SchemeConfig& scheme,
                                     const ArrayLayout& layout) {
  Architecture arch;
  arch.kind = scheme.architecture;
  if (arch.kind == ArchitectureKind::Dma)
    arch.waveguide = default_waveguide(layout, spec.waveguide_attenuation_per_m,
                                       spec.waveguide_wavenumber_per_m);
  return arch;
}

// ---------------------------------------------------------------------------
// Estimate-to-truth matching and error metrics (errors live in the XY plane).

namespace detail {

inline double squared_xy_error(const SourcePosition& a, const SourcePosition& b) {
  const Eigen::Vector3d pa = a.cartesian();
  const Eigen::Vector3d pb = b.cartesian();
  const double dx = pa.x() - pb.x();
  const double dy = pa.y() - pb.y();
  return dx * dx + dy * dy;
}

/// Minimum-total-cost bijection truth -> estimate, by exhaustive permutation
/// (user counts here are small).
inline std::vector<int> optimal_assignment(const PositionHypothesisSet& estimates,
                                           const std::vector<SourcePosition>& truth) {
  const int m = static_cast<int>(truth.size());
  if (estimates.size() != m)
    throw std::invalid_argument("optimal_assignment: estimate/truth count mismatch");
  if (m > 9) throw std::invalid_argument("optimal_assignment: too many users");
  std::vector<int> perm(static_cast<std::size_t>(m));
  std::iota(perm.begin(), perm.end(), 0);
  std::vector<int> best = perm;
  double best_cost = std::numeric_limits<double>::infinity();
  do {
    double cost = 0.0;
    for (int t = 0; t < m; ++t)
      cost += squared_xy_error(
          estimates.hypotheses[static_cast<std::size_t>(perm[static_cast<std::size_t>(t)])],
          truth[static_cast<std::size_t>(t)]);
    if (cost < best_cost) {
      best_cost = cost;
      best = perm;
    }
  } while (std::next_permutation(perm.begin(), perm.end()));
  return best;
}

}  // namespace detail

/// Per-user squared XY errors after optimal matching, in truth order.
inline std::vector<double> per_user_squared_xy_error(
    const PositionHypothesisSet& estimates, const std::vector<SourcePosition>& truth) {
  const std::vector<int> match = detail::optimal_assignment(estimates, truth);
  std::vector<double> errors(truth.size());
  for (std::size_t t = 0; t < truth.size(); ++t)
    errors[t] = detail::squared_xy_error(
        estimates.hypotheses[static_cast<std::size_t>(match[t])], truth[t]);
  return errors;
}

/// e_n^2 of one trial: matched squared XY error averaged across users.
inline double mean_squared_xy_error(const PositionHypothesisSet& estimates,
                                    const std::vector<SourcePosition>& truth) {
  const std::vector<double> errors = per_user_squared_xy_error(estimates, truth);
  return std::accumulate(errors.begin(), errors.end(), 0.0) /
         static_cast<double>(errors.size());
}

// ---------------------------------------------------------------------------
// Alternating localization and tuning (joint scheme).

struct AlternatingOutcome {
  LocalizationResult localization;
  AnalogWeights final_weights;
};

/// Joint localization and weight tuning: start from random weights, obtain
/// initial estimates, then per outer iteration refresh every hypothesis,
/// retune the weights at the current estimates, and re-observe a fresh
/// window through the new weights (same channel, new noise). Fully digital
/// input short-circuits to plain localization; so does tuning method None.
inline AlternatingOutcome alternating_localize(
    const ArrayLayout& layout, const Architecture& arch, const ChannelMatrix& channel,
    const SimulationConfig& cfg, int n_sources, const SearchGrid& grid, int max_iterations,
    TuningMethod method, const RcgSettings& rcg_settings, std::uint64_t weights_seed) {
  if (arch.kind == ArchitectureKind::FullyDigital) {
    const Frontend fe = digital_frontend(layout);
    const SnapshotBatch batch = simulate_snapshots(channel, cfg, fe);
    return {ap_localize(batch, fe, layout, cfg, n_sources, grid, max_iterations),
            identity_weights(layout)};
  }

  AnalogWeights q = random_weights(layout, native_constraint(arch.kind), weights_seed);
  Frontend fe = make_frontend(arch, layout, q);
  SnapshotBatch batch = simulate_snapshots(channel, cfg, fe);
  if (method == TuningMethod::None)
    return {ap_localize(batch, fe, layout, cfg, n_sources, grid, max_iterations), q};

  AlternatingOutcome out;
  LocalizationResult& result = out.localization;
  result.estimates = initialize_positions(batch, fe, layout, cfg, n_sources, grid,
                                          &result.degenerate_init);
  result.per_iteration_track.push_back(result.estimates);
  result.objective_track.push_back(
      focusing_objective(result.estimates, fe, batch, layout, cfg));

  for (int k = 1; k <= max_iterations; ++k) {
    detail::ApSweepObjective sweep(batch, fe, layout, cfg);
    const bool moved = detail::refresh_pass(result.estimates, sweep, grid);
    result.per_iteration_track.push_back(result.estimates);
    result.objective_track.push_back(
        focusing_objective(result.estimates, fe, batch, layout, cfg));
    result.iterations_used = k;
    q = tune(result.estimates, layout, cfg, arch, method, rcg_settings,
             mix_seed(weights_seed, static_cast<std::uint64_t>(k)));
    if (!moved) {
      result.converged = true;
      break;
    }
    if (k < max_iterations) {
      fe = make_frontend(arch, layout, q);
      SimulationConfig cfg_k = cfg;
      cfg_k.rng_seed = mix_seed(cfg.rng_seed, static_cast<std::uint64_t>(k));
      batch = simulate_snapshots(channel, cfg_k, fe);
    }
  }
  out.final_weights = q;
  return out;
}

// ---------------------------------------------------------------------------
// Monte-Carlo evaluation.

struct TrialOutcome {
  LocalizationResult localization;
  AnalogWeights final_weights;
  std::vector<double> iteration_mean_sq_error_m2;  // aligned with the track
  std::vector<double> final_per_user_sq_error_m2;
  double final_mean_sq_error_m2 = 0.0;
};

/// Runs one Monte-Carlo trial of a scheme at one SNR point.
inline TrialOutcome run_scheme_trial(const ExperimentSpec& spec, const SchemeConfig& scheme,
                                     double snr_db, std::uint64_t trial_seed) {
  const ArrayLayout layout = layout_for(spec, scheme);
  const Architecture arch = architecture_for(spec, scheme, layout);

  SimulationConfig cfg;
  cfg.carrier_frequency_hz = spec.carrier_frequency_hz;
  cfg.speed_of_light_m_s = spec.speed_of_light_m_s;
  cfg.pilot_symbol = std::polar(1.0, spec.pilot_phase_rad);
  cfg.n_snapshots = spec.n_snapshots;
  cfg.rng_seed = mix_seed(trial_seed, 1);

  const ChannelMatrix channel = channel_matrix(layout, spec.users, cfg);
  const VecC clean =
      channel.entries * VecC::Constant(channel.user_count(), cfg.pilot_symbol);
  cfg.noise_variance = snr_to_noise_variance(snr_db, clean);

  const int n_sources = static_cast<int>(spec.users.size());
  const std::uint64_t q_seed = mix_seed(trial_seed, 2);

  TrialOutcome out;
  if (arch.kind == ArchitectureKind::FullyDigital ||
      scheme.q_mode == QMode::Alternating) {
    AlternatingOutcome alt = alternating_localize(layout, arch, channel, cfg, n_sources,
                                                  spec.grid, spec.max_outer_iterations,
                                                  scheme.tuning, spec.rcg, q_seed);
    out.localization = std::move(alt.localization);
    out.final_weights = std::move(alt.final_weights);
  } else {
    AnalogWeights q =
        scheme.q_mode == QMode::GivenPosition
            ? tune(PositionHypothesisSet{spec.users}, layout, cfg, arch, scheme.tuning,
                   spec.rcg, q_seed)
            : random_weights(layout, native_constraint(arch.kind), q_seed);
    const Frontend fe = make_frontend(arch, layout, q);
    const SnapshotBatch batch = simulate_snapshots(channel, cfg, fe);
    out.localization =
        ap_localize(batch, fe, layout, cfg, n_sources, spec.grid, spec.max_outer_iterations);
    out.final_weights = std::move(q);
  }

  out.iteration_mean_sq_error_m2.reserve(out.localization.per_iteration_track.size());
  for (const PositionHypothesisSet& track : out.localization.per_iteration_track)
    out.iteration_mean_sq_error_m2.push_back(mean_squared_xy_error(track, spec.users));
  out.final_per_user_sq_error_m2 =
      per_user_squared_xy_error(out.localization.estimates, spec.users);
  out.final_mean_sq_error_m2 = mean_squared_xy_error(out.localization.estimates, spec.users);
  return out;
}

inline std::uint64_t scheme_point_seed(const ExperimentSpec& spec, std::size_t scheme_index,
                                       std::size_t snr_index) {
  return mix_seed(mix_seed(spec.base_seed, scheme_index + 101), snr_index + 577);
}

struct RmseSummary {
  std::string scheme;
  double snr_db = 0.0;
  double rmse_m = 0.0;
  double ci95_m = 0.0;
  int n_trials = 0;
  std::uint64_t seed = 0;
  std::vector<double> per_trial_sq_error_m2;
};

inline double rmse_from_sq_errors(const std::vector<double>& sq_errors) {
  if (sq_errors.empty()) return 0.0;
  const double mean = std::accumulate(sq_errors.begin(), sq_errors.end(), 0.0) /
                      static_cast<double>(sq_errors.size());
  return std::sqrt(mean);
}

/// Half-width of the RMSE 95% interval via the delta method on mean(e^2).
inline double rmse_ci95(const std::vector<double>& sq_errors) {
  const std::size_t n = sq_errors.size();
  if (n < 2) return 0.0;
  const double mean = std::accumulate(sq_errors.begin(), sq_errors.end(), 0.0) /
                      static_cast<double>(n);
  double var = 0.0;
  for (double e : sq_errors) var += (e - mean) * (e - mean);
  var /= static_cast<double>(n - 1);
  const double rmse = std::sqrt(mean);
  if (rmse == 0.0) return 0.0;
  return 1.96 * std::sqrt(var / static_cast<double>(n)) / (2.0 * rmse);
}

/// RMSE over Monte-Carlo trials of one (scheme, SNR) configuration;
/// deterministic given the spec's base seed.
inline RmseSummary monte_carlo_rmse(const ExperimentSpec& spec, const SchemeConfig& scheme,
                                    double snr_db, std::uint64_t point_seed,
                                    int workers = 1) {
  RmseSummary summary;
  summary.scheme = scheme.label;
  summary.snr_db = snr_db;
  summary.n_trials = spec.monte_carlo_trials;
  summary.seed = point_seed;
  summary.per_trial_sq_error_m2.assign(static_cast<std::size_t>(spec.monte_carlo_trials),
                                       0.0);
  parallel_for(static_cast<std::size_t>(spec.monte_carlo_trials), workers,
               [&](std::size_t trial) {
                 const std::uint64_t seed = mix_seed(point_seed, trial + 1);
                 summary.per_trial_sq_error_m2[trial] =
                     run_scheme_trial(spec, scheme, snr_db, seed).final_mean_sq_error_m2;
               });
  summary.rmse_m = rmse_from_sq_errors(summary.per_trial_sq_error_m2);
  summary.ci95_m = rmse_ci95(summary.per_trial_sq_error_m2);
  return summary;
}

/// RMSE vs SNR for every configured scheme; rows ordered scheme-major then
/// SNR ascending-by-grid-order.
inline std::vector<RmseSummary> snr_sweep(const ExperimentSpec& spec, int workers = 1) {
  spec.validate();
  if (spec.schemes.empty() || spec.snr_grid_db.empty())
    throw std::invalid_argument("snr_sweep: need schemes and an SNR grid");
  std::vector<RmseSummary> rows;
  rows.reserve(spec.schemes.size() * spec.snr_grid_db.size());
  for (std::size_t s = 0; s < spec.schemes.size(); ++s)
    for (std::size_t j = 0; j < spec.snr_grid_db.size(); ++j)
      rows.push_back(monte_carlo_rmse(spec, spec.schemes[s], spec.snr_grid_db[j],
                                      scheme_point_seed(spec, s, j), workers));
  return rows;
}

// ---------------------------------------------------------------------------
// Convergence tracks (per-iteration RMSE).

struct ConvergenceRow {
  std::string scheme;
  int iteration = 0;  // 0 = initialization
  double rmse_m = 0.0;
};

/// Per-iteration RMSE per scheme at the first SNR grid point. Trials that
/// converge early carry their final estimate forward so every iteration
/// column aggregates the same trial count.
inline std::vector<ConvergenceRow> convergence_track(const ExperimentSpec& spec,
                                                     int workers = 1) {
  spec.validate();
  if (spec.snr_grid_db.empty() || spec.schemes.empty())
    throw std::invalid_argument("convergence_track: need schemes and an SNR grid");
  const double snr_db = spec.snr_grid_db.front();
  const std::size_t iterations = static_cast<std::size_t>(spec.max_outer_iterations) + 1;

  std::vector<ConvergenceRow> rows;
  for (std::size_t s = 0; s < spec.schemes.size(); ++s) {
    const std::uint64_t point_seed = scheme_point_seed(spec, s, 0);
    std::vector<std::vector<double>> per_trial(
        static_cast<std::size_t>(spec.monte_carlo_trials));
    parallel_for(static_cast<std::size_t>(spec.monte_carlo_trials), workers,
                 [&](std::size_t trial) {
                   const std::uint64_t seed = mix_seed(point_seed, trial + 1);
                   std::vector<double> track =
                       run_scheme_trial(spec, spec.schemes[s], snr_db, seed)
                           .iteration_mean_sq_error_m2;
                   track.resize(iterations, track.back());
                   per_trial[trial] = std::move(track);
                 });
    for (std::size_t k = 0; k < iterations; ++k) {
      std::vector<double> sq;
      sq.reserve(per_trial.size());
      for (const auto& track : per_trial) sq.push_back(track[k]);
      rows.push_back({spec.schemes[s].label, static_cast<int>(k), rmse_from_sq_errors(sq)});
    }
  }
  return rows;
}

// ---------------------------------------------------------------------------
// RF-chain sweep (fixed aperture, varying microstrip density).

struct RfSweepRow {
  std::string scheme;
  int rf_count = 0;
  double snr_db = 0.0;
  double rmse_m = 0.0;
  double ci95_m = 0.0;
  int n_trials = 0;
  std::uint64_t seed = 0;
};

/// Rebuilds the array at fixed vertical aperture with the requested
/// microstrip counts and evaluates every scheme at each count.
inline std::vector<RfSweepRow> rf_sweep(const ExperimentSpec& spec,
                                        const std::vector<int>& rf_counts, int workers = 1) {
  spec.validate();
  if (rf_counts.empty()) throw std::invalid_argument("rf_sweep: no RF-chain counts");
  const double aperture_z = static_cast<double>(spec.n_rows) * spec.row_spacing_m;
  std::vector<RfSweepRow> rows;
  for (std::size_t c = 0; c < rf_counts.size(); ++c) {
    const int count = rf_counts[c];
    if (count < 1) throw std::invalid_argument("rf_sweep: RF-chain count must be >= 1");
    const double spacing = aperture_z / static_cast<double>(count);
    if (!(spacing > 0.0)) throw std::invalid_argument("rf_sweep: infeasible geometry");
    ExperimentSpec derived = spec;
    derived.n_rows = count;
    derived.row_spacing_m = spacing;
    derived.base_seed = mix_seed(spec.base_seed, c + 3001);
    for (std::size_t s = 0; s < derived.schemes.size(); ++s) {
      for (std::size_t j = 0; j < derived.snr_grid_db.size(); ++j) {
        const RmseSummary r =
            monte_carlo_rmse(derived, derived.schemes[s], derived.snr_grid_db[j],
                             scheme_point_seed(derived, s, j), workers);
        rows.push_back({r.scheme, count, r.snr_db, r.rmse_m, r.ci95_m, r.n_trials, r.seed});
      }
    }
  }
  return rows;
}

// ---------------------------------------------------------------------------
// Spatial RMSE maps.

struct HeatmapSpec {
  enum class Mode { LocalizeEverywhere, FixedFocus };
  double x_min_m = 0.0, x_max_m = 0.0;
  double y_min_m = 0.0, y_max_m = 0.0;
  double resolution_m = 1.0;
  Mode mode = Mode::LocalizeEverywhere;
  SourcePosition focus;  // FixedFocus only
  SchemeConfig scheme;
  double snr_db = 0.0;
  int trials = 1;
};

struct HeatmapCell {
  double x_m = 0.0;
  double y_m = 0.0;
  double rmse_m = 0.0;  // NaN on excluded cells (array plane, d = 0)
};

/// RMSE over a rectangle of candidate user positions. LocalizeEverywhere
/// runs the scheme's full pipeline per cell; FixedFocus tunes the weights
/// once for the declared focus and localizes every cell through that fixed
/// front end.
inline std::vector<HeatmapCell> heatmap_sweep(const ExperimentSpec& spec,
                                              const HeatmapSpec& hm, int workers = 1) {
  if (hm.resolution_m <= 0.0)
    throw std::invalid_argument("heatmap_sweep: resolution must be > 0");
  if (hm.trials < 1) throw std::invalid_argument("heatmap_sweep: trials must be >= 1");

  const int nx = static_cast<int>(std::floor((hm.x_max_m - hm.x_min_m) / hm.resolution_m +
                                             1.0 + 1e-9));
  const int ny = static_cast<int>(std::floor((hm.y_max_m - hm.y_min_m) / hm.resolution_m +
                                             1.0 + 1e-9));
  if (nx < 1 || ny < 1) throw std::invalid_argument("heatmap_sweep: empty region");

  const ArrayLayout layout = layout_for(spec, hm.scheme);
  const Architecture arch = architecture_for(spec, hm.scheme, layout);

  // FixedFocus: one oracle-tuned front end shared by every cell.
  AnalogWeights focus_weights;
  if (hm.mode == HeatmapSpec::Mode::FixedFocus) {
    SimulationConfig cfg;
    cfg.carrier_frequency_hz = spec.carrier_frequency_hz;
    cfg.speed_of_light_m_s = spec.speed_of_light_m_s;
    focus_weights = tune(PositionHypothesisSet{{hm.focus}}, layout, cfg, arch,
                         hm.scheme.tuning, spec.rcg, mix_seed(spec.base_seed, 9001));
  }

  std::vector<HeatmapCell> cells(static_cast<std::size_t>(nx) * ny);
  parallel_for(cells.size(), workers, [&](std::size_t idx) {
    const int ix = static_cast<int>(idx) / ny;
    const int iy = static_cast<int>(idx) % ny;
    const double x = hm.x_min_m + hm.resolution_m * ix;
    const double y = hm.y_min_m + hm.resolution_m * iy;
    HeatmapCell& cell = cells[idx];
    cell.x_m = x;
    cell.y_m = y;

    const double d = std::hypot(x, y);
    if (d < 1e-9) {
      cell.rmse_m = std::numeric_limits<double>::quiet_NaN();
      return;
    }
    const SourcePosition truth{d, std::atan2(y, x), kPi / 2.0};

    ExperimentSpec cell_spec = spec;
    cell_spec.users = {truth};
    cell_spec.monte_carlo_trials = hm.trials;

    std::vector<double> sq_errors(static_cast<std::size_t>(hm.trials));
    const std::uint64_t cell_seed = mix_seed(spec.base_seed, 50000 + idx);
    for (int trial = 0; trial < hm.trials; ++trial) {
      const std::uint64_t seed = mix_seed(cell_seed, static_cast<std::uint64_t>(trial) + 1);
      if (hm.mode == HeatmapSpec::Mode::LocalizeEverywhere) {
        sq_errors[static_cast<std::size_t>(trial)] =
            run_scheme_trial(cell_spec, hm.scheme, hm.snr_db, seed).final_mean_sq_error_m2;
      } else {
        SimulationConfig cfg;
        cfg.carrier_frequency_hz = spec.carrier_frequency_hz;
        cfg.speed_of_light_m_s = spec.speed_of_light_m_s;
        cfg.pilot_symbol = std::polar(1.0, spec.pilot_phase_rad);
        cfg.n_snapshots = spec.n_snapshots;
        cfg.rng_seed = mix_seed(seed, 1);
        const ChannelMatrix channel = channel_matrix(layout, {truth}, cfg);
        const VecC clean = channel.entries * VecC::Constant(1, cfg.pilot_symbol);
        cfg.noise_variance = snr_to_noise_variance(hm.snr_db, clean);
        const Frontend fe = make_frontend(arch, layout, focus_weights);
        const SnapshotBatch batch = simulate_snapshots(channel, cfg, fe);
        const LocalizationResult res = ap_localize(batch, fe, layout, cfg, 1, spec.grid,
                                                   spec.max_outer_iterations);
        sq_errors[static_cast<std::size_t>(trial)] =
            mean_squared_xy_error(res.estimates, {truth});
      }
    }
    cell.rmse_m = rmse_from_sq_errors(sq_errors);
  });
  return cells;
}

}  // namespace nfloc

#endif  // NFLOC_PIPELINE_HPP
