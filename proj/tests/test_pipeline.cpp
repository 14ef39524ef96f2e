// SPDX-License-Identifier: Apache-2.0
//
// nfloc - near-field multi-source localization with RF-chain-reduced arrays
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
// http://www.apache.org/licenses/LICENSE-2.0

#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "nfloc/pipeline.hpp"

using namespace nfloc;

namespace {

// Small desk spec tuned for test runtime, grid aligned so that d = 0.35 m,
// theta in {pi/6, pi/4} are exact coarse grid points.
ExperimentSpec desk_spec() {
  ExperimentSpec spec;
  spec.n_rows = 4;
  spec.n_cols = 8;
  spec.n_snapshots = 16;
  spec.monte_carlo_trials = 2;
  spec.max_outer_iterations = 4;
  spec.base_seed = 20260809;
  spec.grid.distance = {0.1, 0.1 + 39 * 0.025, 40};
  spec.grid.azimuth = {kPi / 12.0, kPi / 12.0 + 59.0 * kPi / 120.0, 60};
  spec.grid.fix_elevation = kPi / 2.0;
  spec.grid.refine_levels = 2;
  const double d_step = (spec.grid.distance.hi - spec.grid.distance.lo) / 39.0;
  const double az_step = (spec.grid.azimuth.hi - spec.grid.azimuth.lo) / 59.0;
  spec.users = {{0.1 + 10 * d_step, kPi / 12.0 + 10 * az_step, kPi / 2.0},
                {0.1 + 10 * d_step, kPi / 12.0 + 20 * az_step, kPi / 2.0}};
  spec.snr_grid_db = {0.0};
  return spec;
}

SchemeConfig scheme(const char* label, ArchitectureKind arch, TuningMethod tuning,
                    QMode mode) {
  SchemeConfig s;
  s.label = label;
  s.architecture = arch;
  s.tuning = tuning;
  s.q_mode = mode;
  return s;
}

}  // namespace

TEST_CASE("matched XY error metrics", "[pipeline]") {
  SECTION("single known error vector (3,4) gives RMSE 5") {
    const SourcePosition truth{10.0, 0.2, kPi / 2};
    const double x = truth.x_m() + 3.0;
    const double y = truth.y_m() + 4.0;
    const SourcePosition estimate{std::hypot(x, y), std::atan2(y, x), kPi / 2};
    const PositionHypothesisSet est{{estimate}};
    const double e2 = mean_squared_xy_error(est, {truth});
    REQUIRE(std::sqrt(e2) == Catch::Approx(5.0).epsilon(1e-12));
    REQUIRE(rmse_from_sq_errors({e2}) == Catch::Approx(5.0).epsilon(1e-12));
  }

  SECTION("all-exact estimates give zero RMSE") {
    const SourcePosition a{1.0, 0.3, kPi / 2};
    const SourcePosition b{2.0, -0.4, kPi / 2};
    REQUIRE(mean_squared_xy_error({{a, b}}, {a, b}) == 0.0);
  }

  SECTION("matching is invariant to user labeling") {
    const SourcePosition a{1.0, 0.3, kPi / 2};
    const SourcePosition b{2.0, -0.4, kPi / 2};
    const SourcePosition a_hat{1.05, 0.31, kPi / 2};
    const SourcePosition b_hat{2.1, -0.42, kPi / 2};
    const double swapped = mean_squared_xy_error({{b_hat, a_hat}}, {a, b});
    const double direct = mean_squared_xy_error({{a_hat, b_hat}}, {a, b});
    REQUIRE(direct == Catch::Approx(swapped).epsilon(1e-14));
    const double truth_swapped = mean_squared_xy_error({{a_hat, b_hat}}, {b, a});
    REQUIRE(direct == Catch::Approx(truth_swapped).epsilon(1e-14));
  }

  SECTION("count mismatch is rejected") {
    const SourcePosition a{1.0, 0.3, kPi / 2};
    REQUIRE_THROWS_AS(mean_squared_xy_error({{a}}, {a, a}), std::invalid_argument);
  }
}

TEST_CASE("alternating_localize with tuning none is plain localization",
          "[pipeline]") {
  ExperimentSpec spec = desk_spec();
  const SchemeConfig dma_none =
      scheme("dma_none", ArchitectureKind::Dma, TuningMethod::None, QMode::Alternating);
  const std::uint64_t trial_seed = mix_seed(spec.base_seed, 42);

  const TrialOutcome via_pipeline = run_scheme_trial(spec, dma_none, 0.0, trial_seed);

  // replicate by hand: same layout, weights seed, and observation seed
  const ArrayLayout layout = layout_for(spec, dma_none);
  const Architecture arch = architecture_for(spec, dma_none, layout);
  SimulationConfig cfg;
  cfg.carrier_frequency_hz = spec.carrier_frequency_hz;
  cfg.n_snapshots = spec.n_snapshots;
  cfg.rng_seed = mix_seed(trial_seed, 1);
  const ChannelMatrix g = channel_matrix(layout, spec.users, cfg);
  cfg.noise_variance =
      snr_to_noise_variance(0.0, VecC(g.entries * VecC::Constant(2, cfg.pilot_symbol)));
  const AnalogWeights q = random_weights(layout, WeightConstraint::Lorentzian,
                                         mix_seed(trial_seed, 2));
  const Frontend fe = make_frontend(arch, layout, q);
  const SnapshotBatch batch = simulate_snapshots(g, cfg, fe);
  const LocalizationResult direct =
      ap_localize(batch, fe, layout, cfg, 2, spec.grid, spec.max_outer_iterations);

  REQUIRE(via_pipeline.localization.estimates.size() == direct.estimates.size());
  for (int m = 0; m < direct.estimates.size(); ++m) {
    REQUIRE(via_pipeline.localization.estimates.hypotheses[m].distance_m ==
            direct.estimates.hypotheses[m].distance_m);
    REQUIRE(via_pipeline.localization.estimates.hypotheses[m].azimuth_rad ==
            direct.estimates.hypotheses[m].azimuth_rad);
  }
}

TEST_CASE("alternating_localize converges on the noiseless single user",
          "[pipeline]") {
  ExperimentSpec spec = desk_spec();
  spec.users = {spec.users[0]};

  const ArrayLayout layout = build_layout(4, 8, 0.01, 0.025, 0.005);
  Architecture arch{ArchitectureKind::Dma, default_waveguide(layout, 0.6, 827.67)};
  SimulationConfig cfg;
  cfg.carrier_frequency_hz = spec.carrier_frequency_hz;
  cfg.n_snapshots = spec.n_snapshots;
  cfg.noise_variance = 0.0;
  cfg.rng_seed = 3;
  const ChannelMatrix g = channel_matrix(layout, spec.users, cfg);

  const AlternatingOutcome out = alternating_localize(
      layout, arch, g, cfg, 1, spec.grid, 6, TuningMethod::Rcg, spec.rcg, 77);

  const double err =
      std::sqrt(mean_squared_xy_error(out.localization.estimates, spec.users));
  const double tol = spec.grid.final_distance_step() +
                     spec.users[0].distance_m * spec.grid.final_azimuth_step();
  REQUIRE(err <= tol);

  // final weights behave like oracle tuning at the truth
  const ReducedObjective ro =
      build_reduced_objective({spec.users}, layout, cfg, &*arch.waveguide);
  VecC q_final(ro.weight_count());
  VecC q_oracle(ro.weight_count());
  const AnalogWeights oracle =
      tune({spec.users}, layout, cfg, arch, TuningMethod::Rcg, spec.rcg, 1);
  for (int i = 0; i < ro.n_rows; ++i)
    for (int l = 0; l < ro.n_cols; ++l) {
      q_final(i * ro.n_cols + l) = out.final_weights.element(i, l);
      q_oracle(i * ro.n_cols + l) = oracle.element(i, l);
    }
  REQUIRE(ro.objective(q_final) >= 0.98 * ro.objective(q_oracle));
}

TEST_CASE("monte_carlo_rmse is deterministic and worker-invariant", "[pipeline]") {
  ExperimentSpec spec = desk_spec();
  spec.monte_carlo_trials = 3;
  const SchemeConfig s =
      scheme("dma_rcg", ArchitectureKind::Dma, TuningMethod::Rcg, QMode::Alternating);

  const RmseSummary serial = monte_carlo_rmse(spec, s, 0.0, 1234, 1);
  const RmseSummary threaded = monte_carlo_rmse(spec, s, 0.0, 1234, 4);
  REQUIRE(serial.rmse_m == threaded.rmse_m);
  REQUIRE(serial.per_trial_sq_error_m2 == threaded.per_trial_sq_error_m2);
  REQUIRE(serial.n_trials == 3);
}

TEST_CASE("noiseless pipeline recovers on-grid users exactly", "[pipeline]") {
  ExperimentSpec spec = desk_spec();
  spec.monte_carlo_trials = 1;
  spec.snr_grid_db = {std::numeric_limits<double>::infinity()};

  const double tol = spec.grid.final_distance_step() +
                     spec.users[0].distance_m * spec.grid.final_azimuth_step();
  for (const SchemeConfig& s :
       {scheme("digital", ArchitectureKind::FullyDigital, TuningMethod::None,
               QMode::Alternating),
        scheme("hybrid_proj", ArchitectureKind::HybridPhaseShifter,
               TuningMethod::Projection, QMode::Alternating),
        scheme("dma_rcg", ArchitectureKind::Dma, TuningMethod::Rcg, QMode::Alternating)}) {
    const RmseSummary r =
        monte_carlo_rmse(spec, s, spec.snr_grid_db[0], scheme_point_seed(spec, 0, 0), 1);
    INFO(s.label);
    REQUIRE(r.rmse_m <= tol);
  }
}

TEST_CASE("snr_sweep emits one row per scheme and SNR", "[pipeline]") {
  ExperimentSpec spec = desk_spec();
  spec.monte_carlo_trials = 2;
  spec.snr_grid_db = {0.0, 10.0};
  spec.schemes = {
      scheme("digital", ArchitectureKind::FullyDigital, TuningMethod::None,
             QMode::Alternating),
      scheme("dma_random", ArchitectureKind::Dma, TuningMethod::None, QMode::FixedRandom)};

  const std::vector<RmseSummary> rows = snr_sweep(spec, 1);
  REQUIRE(rows.size() == 4);
  REQUIRE(rows[0].scheme == "digital");
  REQUIRE(rows[0].snr_db == 0.0);
  REQUIRE(rows[1].snr_db == 10.0);
  REQUIRE(rows[2].scheme == "dma_random");
  for (const auto& r : rows) REQUIRE(std::isfinite(r.rmse_m));

  const std::vector<RmseSummary> rerun = snr_sweep(spec, 1);
  for (std::size_t i = 0; i < rows.size(); ++i)
    REQUIRE(rows[i].rmse_m == rerun[i].rmse_m);
}

TEST_CASE("convergence_track covers every iteration column", "[pipeline]") {
  ExperimentSpec spec = desk_spec();
  spec.monte_carlo_trials = 2;
  spec.max_outer_iterations = 3;
  spec.schemes = {
      scheme("dma_given", ArchitectureKind::Dma, TuningMethod::Rcg, QMode::GivenPosition),
      scheme("dma_rcg", ArchitectureKind::Dma, TuningMethod::Rcg, QMode::Alternating)};

  const std::vector<ConvergenceRow> rows = convergence_track(spec, 1);
  REQUIRE(rows.size() == 2 * 4);  // schemes x (iteration 0..3)
  for (int k = 0; k < 4; ++k) {
    REQUIRE(rows[static_cast<std::size_t>(k)].iteration == k);
    REQUIRE(rows[static_cast<std::size_t>(k)].scheme == "dma_given");
    REQUIRE(std::isfinite(rows[static_cast<std::size_t>(k)].rmse_m));
  }
}

TEST_CASE("rf_sweep rebuilds layouts at fixed aperture", "[pipeline]") {
  ExperimentSpec spec = desk_spec();
  spec.monte_carlo_trials = 1;
  spec.schemes = {
      scheme("dma_rcg", ArchitectureKind::Dma, TuningMethod::Rcg, QMode::Alternating)};

  SECTION("single count gives one row per scheme/snr") {
    const std::vector<RfSweepRow> rows = rf_sweep(spec, {4}, 1);
    REQUIRE(rows.size() == 1);
    REQUIRE(rows[0].rf_count == 4);
    REQUIRE(std::isfinite(rows[0].rmse_m));
  }

  SECTION("derived layouts preserve the aperture height") {
    const double aperture = spec.n_rows * spec.row_spacing_m;
    for (int count : {2, 5, 8}) {
      ExperimentSpec derived = spec;
      derived.n_rows = count;
      derived.row_spacing_m = aperture / count;
      const ArrayLayout layout = layout_for(derived, spec.schemes[0]);
      REQUIRE(layout.n_rows * layout.row_spacing_m == Catch::Approx(aperture));
    }
  }

  SECTION("infeasible counts are rejected") {
    REQUIRE_THROWS_AS(rf_sweep(spec, {0}, 1), std::invalid_argument);
  }
}

TEST_CASE("heatmap_sweep maps the region row-major", "[pipeline]") {
  ExperimentSpec spec = desk_spec();
  spec.users = {spec.users[0]};
  HeatmapSpec hm;
  hm.scheme = scheme("dma_proj", ArchitectureKind::Dma, TuningMethod::Projection,
                     QMode::Alternating);
  hm.snr_db = 10.0;
  hm.trials = 1;

  SECTION("one-cell region gives a single finite cell") {
    hm.x_min_m = hm.x_max_m = 0.3;
    hm.y_min_m = hm.y_max_m = 0.2;
    hm.resolution_m = 0.1;
    const auto cells = heatmap_sweep(spec, hm, 1);
    REQUIRE(cells.size() == 1);
    REQUIRE(cells[0].x_m == 0.3);
    REQUIRE(cells[0].y_m == 0.2);
    REQUIRE(std::isfinite(cells[0].rmse_m));
  }

  SECTION("the array-plane cell is excluded as NaN") {
    hm.x_min_m = 0.0;
    hm.x_max_m = 0.3;
    hm.y_min_m = 0.0;
    hm.y_max_m = 0.0;
    hm.resolution_m = 0.3;
    const auto cells = heatmap_sweep(spec, hm, 1);
    REQUIRE(cells.size() == 2);
    REQUIRE(std::isnan(cells[0].rmse_m));
    REQUIRE(std::isfinite(cells[1].rmse_m));
  }

  SECTION("fixed-focus mode shares one tuned front end") {
    hm.mode = HeatmapSpec::Mode::FixedFocus;
    hm.focus = spec.users[0];
    hm.scheme.q_mode = QMode::GivenPosition;
    hm.x_min_m = 0.25;
    hm.x_max_m = 0.35;
    hm.y_min_m = 0.15;
    hm.y_max_m = 0.15;
    hm.resolution_m = 0.1;
    const auto cells = heatmap_sweep(spec, hm, 1);
    REQUIRE(cells.size() == 2);
    for (const auto& c : cells) REQUIRE(std::isfinite(c.rmse_m));
  }
}
