// SPDX-License-Identifier: Apache-2.0
//
// nfloc - near-field multi-source localization with RF-chain-reduced arrays
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
// http://www.apache.org/licenses/LICENSE-2.0

#ifndef NFLOC_LOCALIZER_HPP
#define NFLOC_LOCALIZER_HPP

#include <algorithm>
#include <cmath>
#include <optional>
#include <vector>

#include "nfloc/likelihood.hpp"

namespace nfloc {

struct AxisSpec {
  double lo = 0.0;
  double hi = 0.0;
  int points = 2;
};

/// Coarse-to-fine search region. The full coarse grid is scanned
/// exhaustively, then each refinement level shrinks the window to 1/3 of the
/// previous extent around the incumbent, re-sampled at the same per-axis
/// counts. Elevation is pinned to fix_elevation when set.
struct SearchGrid {
  AxisSpec distance;
  AxisSpec azimuth;
  AxisSpec elevation{kPi / 2.0, kPi / 2.0, 2};
  std::optional<double> fix_elevation = kPi / 2.0;
  int refine_levels = 2;

  void validate() const {
    auto check_axis = [](const AxisSpec& a, const char* name) {
      if (!(a.hi > a.lo))
        throw std::invalid_argument(std::string("SearchGrid: empty ") + name + " range");
      if (a.points < 2)
        throw std::invalid_argument(std::string("SearchGrid: need >= 2 points on ") + name);
    };
    if (distance.lo <= 0.0)
      throw std::invalid_argument("SearchGrid: distances must be > 0");
    check_axis(distance, "distance");
    check_axis(azimuth, "azimuth");
    if (!fix_elevation) check_axis(elevation, "elevation");
    if (refine_levels < 0)
      throw std::invalid_argument("SearchGrid: refine_levels must be >= 0");
  }

  static double axis_step(const AxisSpec& a, int refine_levels) {
    return (a.hi - a.lo) / std::pow(3.0, refine_levels) /
           static_cast<double>(a.points - 1);
  }

  double final_distance_step() const { return axis_step(distance, refine_levels); }
  double final_azimuth_step() const { return axis_step(azimuth, refine_levels); }
  double final_elevation_step() const {
    return fix_elevation ? 0.0 : axis_step(elevation, refine_levels);
  }
};

namespace detail {

inline std::vector<double> sample_axis(double lo, double hi, int points) {
  std::vector<double> xs(static_cast<std::size_t>(points));
  if (points == 1) {
    xs[0] = lo;
    return xs;
  }
  const double step = (hi - lo) / static_cast<double>(points - 1);
  for (int i = 0; i < points; ++i) xs[static_cast<std::size_t>(i)] = lo + step * i;
  return xs;
}

/// Window of the given extent centered on `center`, shifted to stay inside
/// [lo, hi].
inline std::pair<double, double> refine_window(double lo, double hi, double center,
                                               double extent) {
  if (extent >= hi - lo) return {lo, hi};
  double w_lo = center - extent / 2.0;
  w_lo = std::min(std::max(w_lo, lo), hi - extent);
  return {w_lo, w_lo + extent};
}

}  // namespace detail

/// Exhaustive coarse scan plus local refinement. Strictly-greater objective
/// wins; on exact ties the earlier point in ascending (distance, azimuth,
/// elevation) order is kept. The incumbent survives refinement levels, so
/// the returned value never regresses. Throws NumericalError when every
/// coarse point evaluates non-finite.
template <typename Objective>
SourcePosition grid_maximize(Objective&& objective, const SearchGrid& grid) {
  grid.validate();

  const bool search_elevation = !grid.fix_elevation.has_value();
  const double fixed_el = grid.fix_elevation.value_or(0.0);

  SourcePosition best{};
  double best_value = -std::numeric_limits<double>::infinity();
  bool found = false;

  auto scan = [&](const std::vector<double>& ds, const std::vector<double>& azs,
                  const std::vector<double>& els) {
    for (double d : ds) {
      for (double az : azs) {
        for (double el : els) {
          const SourcePosition p{d, az, el};
          const double value = objective(p);
          if (!std::isfinite(value)) continue;
          if (!found || value > best_value) {
            best = p;
            best_value = value;
            found = true;
          }
        }
      }
    }
  };

  scan(detail::sample_axis(grid.distance.lo, grid.distance.hi, grid.distance.points),
       detail::sample_axis(grid.azimuth.lo, grid.azimuth.hi, grid.azimuth.points),
       search_elevation
           ? detail::sample_axis(grid.elevation.lo, grid.elevation.hi, grid.elevation.points)
           : std::vector<double>{fixed_el});
  if (!found)
    throw NumericalError("grid_maximize: objective non-finite on the whole coarse grid");

  for (int level = 1; level <= grid.refine_levels; ++level) {
    const double shrink = std::pow(3.0, level);
    const auto [d_lo, d_hi] = detail::refine_window(
        grid.distance.lo, grid.distance.hi, best.distance_m,
        (grid.distance.hi - grid.distance.lo) / shrink);
    const auto [a_lo, a_hi] = detail::refine_window(
        grid.azimuth.lo, grid.azimuth.hi, best.azimuth_rad,
        (grid.azimuth.hi - grid.azimuth.lo) / shrink);
    std::vector<double> els{fixed_el};
    if (search_elevation) {
      const auto [e_lo, e_hi] = detail::refine_window(
          grid.elevation.lo, grid.elevation.hi, best.elevation_rad,
          (grid.elevation.hi - grid.elevation.lo) / shrink);
      els = detail::sample_axis(e_lo, e_hi, grid.elevation.points);
    }
    scan(detail::sample_axis(d_lo, d_hi, grid.distance.points),
         detail::sample_axis(a_lo, a_hi, grid.azimuth.points), els);
  }
  return best;
}

namespace detail {

/// Cached per-sweep state: the other-hypotheses projector is built once and
/// reused for every grid point.
class ApSweepObjective {
 public:
  ApSweepObjective(const SnapshotBatch& batch, const Frontend& frontend,
                   const ArrayLayout& layout, const SimulationConfig& cfg)
      : batch_(&batch), frontend_(&frontend), layout_(&layout), cfg_(&cfg) {}

  void set_others(const PositionHypothesisSet& others) {
    if (others.empty()) {
      has_others_ = false;
      return;
    }
    const MatC s = effective_steering(others, *frontend_, *layout_, *cfg_);
    projector_ = projection_operator(s, default_ridge(s));
    has_others_ = true;
  }

  double operator()(const SourcePosition& p, bool* degenerate = nullptr) const {
    const VecC v = frontend_->compress(steering_vector(*layout_, p, *cfg_));
    return residual_projection_energy(v, has_others_ ? &projector_ : nullptr, *batch_,
                                      degenerate);
  }

 private:
  const SnapshotBatch* batch_;
  const Frontend* frontend_;
  const ArrayLayout* layout_;
  const SimulationConfig* cfg_;
  MatC projector_;
  bool has_others_ = false;
};

}  // namespace detail

/// Greedy initialization: users are added one at a time, each maximizing the
/// residual objective against the projector of the already-found set.
/// `degenerate` is set when a newly added user explains essentially none of
/// the observed energy (residual collapse).
inline PositionHypothesisSet initialize_positions(const SnapshotBatch& batch,
                                                  const Frontend& frontend,
                                                  const ArrayLayout& layout,
                                                  const SimulationConfig& cfg, int n_sources,
                                                  const SearchGrid& grid,
                                                  bool* degenerate = nullptr) {
  if (n_sources < 1)
    throw std::invalid_argument("initialize_positions: need at least one source");
  if (degenerate) *degenerate = false;
  const double total_energy = batch.samples.squaredNorm();

  detail::ApSweepObjective sweep(batch, frontend, layout, cfg);
  PositionHypothesisSet found;
  for (int m = 0; m < n_sources; ++m) {
    sweep.set_others(found);
    const SourcePosition p = grid_maximize(sweep, grid);
    bool collapsed = false;
    const double value = sweep(p, &collapsed);
    if (degenerate && (collapsed || value <= 1e-12 * total_energy)) *degenerate = true;
    found.hypotheses.push_back(p);
  }
  return found;
}

struct LocalizationResult {
  PositionHypothesisSet estimates;
  std::vector<PositionHypothesisSet> per_iteration_track;  // entry 0 = initialization
  std::vector<double> objective_track;                     // f(p_M, Q) per entry
  int iterations_used = 0;
  bool converged = false;
  bool degenerate_init = false;
};

namespace detail {

/// One outer pass: refresh every hypothesis against the projector of the
/// others, never accepting a grid candidate that scores below the
/// incumbent. Returns true when some hypothesis moved by more than the
/// final grid resolution.
inline bool refresh_pass(PositionHypothesisSet& estimates, ApSweepObjective& sweep,
                         const SearchGrid& grid) {
  const double d_step = grid.final_distance_step();
  const double az_step = grid.final_azimuth_step();
  const double el_step = grid.final_elevation_step();
  bool moved = false;
  for (int m = 0; m < estimates.size(); ++m) {
    sweep.set_others(estimates.without(m));
    const SourcePosition incumbent = estimates.hypotheses[static_cast<std::size_t>(m)];
    SourcePosition candidate = grid_maximize(sweep, grid);
    if (sweep(candidate) <= sweep(incumbent)) candidate = incumbent;
    if (std::abs(candidate.distance_m - incumbent.distance_m) > d_step ||
        std::abs(candidate.azimuth_rad - incumbent.azimuth_rad) > az_step ||
        std::abs(candidate.elevation_rad - incumbent.elevation_rad) > el_step)
      moved = true;
    estimates.hypotheses[static_cast<std::size_t>(m)] = candidate;
  }
  return moved;
}

}  // namespace detail

/// Alternating-projection localization with a fixed front end: greedy
/// initialization, then outer passes that refresh each hypothesis against
/// the projector of the others. The whole-set objective is coordinate
/// ascent, so it never decreases across outer passes (up to ridge slack).
/// Stops after `max_iterations` passes or when no hypothesis moves by more
/// than the final grid resolution on any axis.
inline LocalizationResult ap_localize(const SnapshotBatch& batch, const Frontend& frontend,
                                      const ArrayLayout& layout, const SimulationConfig& cfg,
                                      int n_sources, const SearchGrid& grid,
                                      int max_iterations) {
  if (max_iterations < 0)
    throw std::invalid_argument("ap_localize: max_iterations must be >= 0");
  grid.validate();

  LocalizationResult result;
  result.estimates = initialize_positions(batch, frontend, layout, cfg, n_sources, grid,
                                          &result.degenerate_init);
  result.per_iteration_track.push_back(result.estimates);
  result.objective_track.push_back(
      focusing_objective(result.estimates, frontend, batch, layout, cfg));

  detail::ApSweepObjective sweep(batch, frontend, layout, cfg);
  for (int k = 1; k <= max_iterations; ++k) {
    const bool moved = detail::refresh_pass(result.estimates, sweep, grid);
    result.per_iteration_track.push_back(result.estimates);
    result.objective_track.push_back(
        focusing_objective(result.estimates, frontend, batch, layout, cfg));
    result.iterations_used = k;
    if (!moved) {
      result.converged = true;
      break;
    }
  }
  return result;
}

}  // namespace nfloc

#endif  // NFLOC_LOCALIZER_HPP
