// SPDX-License-Identifier: Apache-2.0
//
// nfloc - near-field multi-source localization with RF-chain-reduced arrays
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
// http://www.apache.org/licenses/LICENSE-2.0

#ifndef NFLOC_TUNING_HPP
#define NFLOC_TUNING_HPP

#include <cmath>
#include <utility>
#include <vector>

#include "nfloc/likelihood.hpp"

namespace nfloc {

enum class TuningMethod { Projection, Rcg, Random, None };

inline const char* to_string(TuningMethod m) {
  switch (m) {
    case TuningMethod::Projection: return "projection";
    case TuningMethod::Rcg: return "rcg";
    case TuningMethod::Random: return "random";
    case TuningMethod::None: return "none";
  }
  return "?";
}

struct RcgSettings {
  int max_iters = 300;
  double grad_tolerance = 1e-6;  // stop when ||grad|| <= tol * |objective|
  double armijo_initial_step = 1.0;  // arc length along the normalized direction
  double armijo_shrink = 0.5;
  double armijo_sufficient_decrease = 1e-4;
  int max_backtracks = 30;
  double pr_restart_threshold = 0.0;  // Polak-Ribiere coefficients below this restart

  void validate() const {
    if (max_iters < 0) throw std::invalid_argument("RcgSettings: max_iters must be >= 0");
    if (armijo_shrink <= 0.0 || armijo_shrink >= 1.0)
      throw std::invalid_argument("RcgSettings: shrink must lie in (0,1)");
    if (armijo_sufficient_decrease <= 0.0 || armijo_sufficient_decrease >= 1.0)
      throw std::invalid_argument("RcgSettings: sufficient-decrease must lie in (0,1)");
    if (armijo_initial_step <= 0.0)
      throw std::invalid_argument("RcgSettings: initial step must be > 0");
  }
};

/// Per-element phase aligning every microstrip with the (hypothesized)
/// users: psi*_il = mean_m v_{m,i,l} + rho_il beta_i. The waveguide term is
/// dropped when no model is supplied (hybrid/digital rows). Phases are the
/// unwrapped propagation phases, monotone in range.
inline MatR centroid_phases(const PositionHypothesisSet& positions, const ArrayLayout& layout,
                            const SimulationConfig& cfg,
                            const WaveguideModel* waveguide = nullptr) {
  if (positions.empty())
    throw std::invalid_argument("centroid_phases: need at least one position");
  MatR psi = MatR::Zero(layout.n_rows, layout.n_cols);
  for (const SourcePosition& p : positions.hypotheses) {
    for (int i = 0; i < layout.n_rows; ++i)
      for (int l = 0; l < layout.n_cols; ++l)
        psi(i, l) += phase_shift(source_element_distance(layout, i, l, p), cfg);
  }
  psi /= static_cast<double>(positions.size());
  if (waveguide)
    psi += waveguide->wavenumber_per_m * waveguide->tap_positions_m;
  return psi;
}

/// Closed-form tuning: centroid phases, with DMA weights projected onto the
/// Lorentzian circle. Fully digital returns the identity unchanged.
inline AnalogWeights projection_tuning(const PositionHypothesisSet& positions,
                                       const ArrayLayout& layout, const SimulationConfig& cfg,
                                       const Architecture& arch) {
  switch (arch.kind) {
    case ArchitectureKind::FullyDigital:
      return identity_weights(layout);
    case ArchitectureKind::HybridPhaseShifter:
      return weights_from_phases(layout, centroid_phases(positions, layout, cfg, nullptr),
                                 WeightConstraint::PhaseOnly);
    case ArchitectureKind::Dma: {
      if (!arch.waveguide)
        throw std::invalid_argument("projection_tuning: DMA architecture needs a waveguide model");
      return weights_from_phases(
          layout, centroid_phases(positions, layout, cfg, &*arch.waveguide),
          WeightConstraint::Lorentzian);
    }
  }
  throw std::invalid_argument("projection_tuning: unknown architecture");
}

/// The tuning objective sum_m ||Wbar_m qbar||^2 =
/// sum_m sum_i |sum_l q_il h_il g_mil|^2 over the stacked nonzero weights,
/// held in per-strip form instead of the N_d N Kronecker operator.
struct ReducedObjective {
  std::vector<MatC> strip_gains;  // per user: n_rows x n_cols entries h.g
  int n_rows = 0;
  int n_cols = 0;

  int weight_count() const { return n_rows * n_cols; }
  int user_count() const { return static_cast<int>(strip_gains.size()); }

  double objective(const VecC& qbar) const {
    double acc = 0.0;
    for (const MatC& w : strip_gains) {
      for (int i = 0; i < n_rows; ++i) {
        cplx row_sum = 0.0;
        for (int l = 0; l < n_cols; ++l) row_sum += w(i, l) * qbar(i * n_cols + l);
        acc += std::norm(row_sum);
      }
    }
    return acc;
  }

  /// Dense N_d x N materialization of Wbar_m (test oracle; zero off-block).
  MatC dense_map(int m) const {
    MatC w = MatC::Zero(n_rows, weight_count());
    for (int i = 0; i < n_rows; ++i)
      for (int l = 0; l < n_cols; ++l)
        w(i, i * n_cols + l) = strip_gains[static_cast<std::size_t>(m)](i, l);
    return w;
  }

  /// Applies A = sum_m Wbar_m^H Wbar_m, block diagonal with one
  /// n_cols x n_cols block per strip.
  VecC gram_apply(const VecC& x) const {
    VecC out = VecC::Zero(weight_count());
    for (const MatC& w : strip_gains) {
      for (int i = 0; i < n_rows; ++i) {
        cplx row_sum = 0.0;
        for (int l = 0; l < n_cols; ++l) row_sum += w(i, l) * x(i * n_cols + l);
        for (int l = 0; l < n_cols; ++l)
          out(i * n_cols + l) += std::conj(w(i, l)) * row_sum;
      }
    }
    return out;
  }
};

inline ReducedObjective build_reduced_objective(const PositionHypothesisSet& positions,
                                                const ArrayLayout& layout,
                                                const SimulationConfig& cfg,
                                                const WaveguideModel* waveguide = nullptr) {
  ReducedObjective ro;
  ro.n_rows = layout.n_rows;
  ro.n_cols = layout.n_cols;
  const VecC h = waveguide ? waveguide_response_matrix(layout, *waveguide)
                           : VecC::Ones(layout.element_count());
  ro.strip_gains.reserve(static_cast<std::size_t>(positions.size()));
  for (const SourcePosition& p : positions.hypotheses) {
    const VecC g = steering_vector(layout, p, cfg);
    MatC w(layout.n_rows, layout.n_cols);
    for (int i = 0; i < layout.n_rows; ++i)
      for (int l = 0; l < layout.n_cols; ++l) {
        const int r = layout.flat_index(i, l);
        w(i, l) = h(r) * g(r);
      }
    ro.strip_gains.push_back(std::move(w));
  }
  return ro;
}

/// Euclidean gradient of g(b) = sum_m ||Wbar_m (b + j 1)/2||^2 on the
/// ambient space, under the Lorentzian-to-circle change of variables
/// qbar = (b + j 1)/2:  grad = (1/2) A (b + j 1).
inline VecC euclidean_gradient(const VecC& b, const ReducedObjective& ro) {
  const VecC shifted = b + VecC::Constant(b.size(), cplx(0.0, 1.0));
  return 0.5 * ro.gram_apply(shifted);
}

/// Tangent component on the product-of-circles manifold:
/// grad - Re(grad . conj(b)) . b.
inline VecC riemannian_gradient(const VecC& b, const VecC& euclid_grad) {
  VecC out(b.size());
  for (Eigen::Index r = 0; r < b.size(); ++r) {
    const double radial = (euclid_grad(r) * std::conj(b(r))).real();
    out(r) = euclid_grad(r) - radial * b(r);
  }
  return out;
}

struct RcgResult {
  AnalogWeights weights;
  int accepted_steps = 0;
  bool converged = false;
  std::vector<double> objective_track;  // objective after init and each accepted step
  double init_objective = 0.0;
  double final_objective = 0.0;
  double max_modulus_error = 0.0;  // max | |b_r| - 1 | over all accepted iterates
};

namespace detail {

inline double tangent_inner(const VecC& a, const VecC& b) {
  return (a.adjoint() * b)(0, 0).real();
}

inline VecC tangent_project(const VecC& b, const VecC& v) {
  return riemannian_gradient(b, v);  // same orthogonal projection
}

inline VecC retract_to_circles(const VecC& v) {
  VecC out(v.size());
  for (Eigen::Index r = 0; r < v.size(); ++r) {
    const double mag = std::abs(v(r));
    out(r) = (mag == 0.0) ? cplx(1.0, 0.0) : v(r) / mag;
  }
  return out;
}

}  // namespace detail

/// Riemannian conjugate gradient ascent of the tuning objective over the
/// product of unit circles, with Armijo backtracking, Polak-Ribiere
/// directions (vector transport by tangent projection), and per-entry
/// normalization as retraction. Init defaults to the projection solution;
/// the final objective never falls below the initial one.
inline RcgResult rcg_tuning(const PositionHypothesisSet& positions, const ArrayLayout& layout,
                            const SimulationConfig& cfg, const Architecture& arch,
                            const RcgSettings& settings,
                            const AnalogWeights* init = nullptr) {
  settings.validate();

  RcgResult result;
  if (arch.kind == ArchitectureKind::FullyDigital) {
    result.weights = identity_weights(layout);
    result.converged = true;
    return result;
  }

  const bool lorentzian = arch.kind == ArchitectureKind::Dma;
  const WaveguideModel* waveguide = nullptr;
  if (lorentzian) {
    if (!arch.waveguide)
      throw std::invalid_argument("rcg_tuning: DMA architecture needs a waveguide model");
    waveguide = &*arch.waveguide;
  }

  AnalogWeights start = init ? *init : projection_tuning(positions, layout, cfg, arch);
  {
    const WeightValidation v = validate_weights(start);
    if (!v.ok) throw std::invalid_argument("rcg_tuning: infeasible init: " + v.message);
    if (start.constraint != native_constraint(arch.kind))
      throw std::invalid_argument("rcg_tuning: init constraint does not match architecture");
  }

  const ReducedObjective ro = build_reduced_objective(positions, layout, cfg, waveguide);
  const int n = ro.weight_count();
  const VecC j_ones = VecC::Constant(n, cplx(0.0, 1.0));

  // Circle variable: b = 2 qbar - j on the Lorentzian circle, b = qbar for
  // phase-only weights.
  VecC b(n);
  for (int i = 0; i < layout.n_rows; ++i)
    for (int l = 0; l < layout.n_cols; ++l) {
      const cplx q = start.element(i, l);
      b(i * layout.n_cols + l) = lorentzian ? 2.0 * q - cplx(0.0, 1.0) : q;
    }
  b = detail::retract_to_circles(b);

  auto qbar_of = [&](const VecC& bb) -> VecC {
    return lorentzian ? VecC(0.5 * (bb + j_ones)) : bb;
  };
  auto value_of = [&](const VecC& bb) { return ro.objective(qbar_of(bb)); };
  auto euclid_grad_of = [&](const VecC& bb) -> VecC {
    return lorentzian ? euclidean_gradient(bb, ro) : VecC(2.0 * ro.gram_apply(bb));
  };

  double f = value_of(b);
  result.init_objective = f;
  result.objective_track.push_back(f);

  VecC grad = riemannian_gradient(b, euclid_grad_of(b));
  VecC direction = grad;
  VecC grad_prev = grad;
  bool have_prev = false;
  result.converged = false;

  for (int t = 0; t < settings.max_iters; ++t) {
    const double grad_norm = grad.norm();
    if (grad_norm <= settings.grad_tolerance * std::max(std::abs(f), 1e-30)) {
      result.converged = true;
      break;
    }

    if (have_prev) {
      const VecC transported_prev = detail::tangent_project(b, grad_prev);
      double zeta = detail::tangent_inner(grad, grad - transported_prev) /
                    grad_prev.squaredNorm();
      if (!(zeta > settings.pr_restart_threshold)) zeta = 0.0;
      direction = grad + zeta * detail::tangent_project(b, direction);
      if (detail::tangent_inner(grad, direction) <= 0.0) direction = grad;  // restart
    } else {
      direction = grad;
    }

    // Step lengths measure arc length: the search moves along the unit
    // tangent direction so the Armijo schedule is scale free in the gains.
    const VecC unit_direction = direction / direction.norm();
    const double slope = detail::tangent_inner(grad, unit_direction);
    double step = settings.armijo_initial_step;
    bool accepted = false;
    for (int bt = 0; bt < settings.max_backtracks; ++bt) {
      const VecC candidate = detail::retract_to_circles(b + step * unit_direction);
      const double f_new = value_of(candidate);
      if (f_new >= f + settings.armijo_sufficient_decrease * step * slope) {
        b = candidate;
        f = f_new;
        accepted = true;
        break;
      }
      step *= settings.armijo_shrink;
    }
    if (!accepted) break;  // line search exhausted; return the incumbent

    result.accepted_steps += 1;
    result.objective_track.push_back(f);
    for (Eigen::Index r = 0; r < b.size(); ++r)
      result.max_modulus_error =
          std::max(result.max_modulus_error, std::abs(std::abs(b(r)) - 1.0));
    grad_prev = grad;
    have_prev = true;
    grad = riemannian_gradient(b, euclid_grad_of(b));
  }

  MatR phases(layout.n_rows, layout.n_cols);
  for (int i = 0; i < layout.n_rows; ++i)
    for (int l = 0; l < layout.n_cols; ++l)
      phases(i, l) = std::arg(b(i * layout.n_cols + l));
  result.weights = weights_from_phases(
      layout, phases,
      lorentzian ? WeightConstraint::Lorentzian : WeightConstraint::PhaseOnly);
  result.final_objective = f;
  return result;
}

/// Method dispatch for one architecture. Fully digital always yields the
/// identity. `current` feeds method None (keep the weights in use).
inline AnalogWeights tune(const PositionHypothesisSet& positions, const ArrayLayout& layout,
                          const SimulationConfig& cfg, const Architecture& arch,
                          TuningMethod method, const RcgSettings& rcg_settings,
                          std::uint64_t seed, const AnalogWeights* current = nullptr) {
  if (arch.kind == ArchitectureKind::FullyDigital) return identity_weights(layout);
  switch (method) {
    case TuningMethod::Projection:
      return projection_tuning(positions, layout, cfg, arch);
    case TuningMethod::Rcg:
      return rcg_tuning(positions, layout, cfg, arch, rcg_settings).weights;
    case TuningMethod::Random:
      return random_weights(layout, native_constraint(arch.kind), seed);
    case TuningMethod::None:
      if (!current)
        throw std::invalid_argument("tune: method 'none' requires current weights");
      return *current;
  }
  throw std::invalid_argument("tune: unknown method");
}

}  // namespace nfloc

#endif  // NFLOC_TUNING_HPP
