// SPDX-License-Identifier: Apache-2.0
//
// nfloc - near-field multi-source localization with RF-chain-reduced arrays
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
// http://www.apache.org/licenses/LICENSE-2.0

#ifndef NFLOC_LIKELIHOOD_HPP
#define NFLOC_LIKELIHOOD_HPP

#include <cmath>
#include <vector>

#include "nfloc/channel.hpp"
#include "nfloc/frontend.hpp"
#include "nfloc/geometry.hpp"

namespace nfloc {

/// Ordered candidate positions p_M; empty while the estimate set is being
/// grown during initialization.
struct PositionHypothesisSet {
  std::vector<SourcePosition> hypotheses;

  int size() const { return static_cast<int>(hypotheses.size()); }
  bool empty() const { return hypotheses.empty(); }

  bool has_duplicates() const {
    for (std::size_t a = 0; a < hypotheses.size(); ++a)
      for (std::size_t b = a + 1; b < hypotheses.size(); ++b)
        if (hypotheses[a] == hypotheses[b]) return true;
    return false;
  }

  /// Copy with hypothesis m removed (the p_{M-m} difference set).
  PositionHypothesisSet without(int m) const {
    PositionHypothesisSet out;
    out.hypotheses.reserve(hypotheses.size() - 1);
    for (int i = 0; i < size(); ++i)
      if (i != m) out.hypotheses.push_back(hypotheses[static_cast<std::size_t>(i)]);
    return out;
  }
};

/// Ridge used to keep near-collinear hypothesis sets solvable:
/// 1e-12 tr(X^H X) / k.
inline double default_ridge(const MatC& x) {
  if (x.cols() == 0) return 0.0;
  return 1e-12 * x.squaredNorm() / static_cast<double>(x.cols());
}

/// P = X (X^H X + ridge I)^{-1} X^H. With ridge = 0 the Gram matrix must be
/// well conditioned; a singular Gram raises NumericalError.
inline MatC projection_operator(const MatC& x, double ridge) {
  const Eigen::Index k = x.cols();
  if (k == 0) return MatC::Zero(x.rows(), x.rows());
  MatC gram = x.adjoint() * x;
  if (ridge == 0.0) {
    Eigen::JacobiSVD<MatC> svd(gram);
    const auto& sv = svd.singularValues();
    const double smax = sv(0);
    const double smin = sv(sv.size() - 1);
    if (smax == 0.0 || smin < 1e-13 * static_cast<double>(k) * smax)
      throw NumericalError("projection_operator: ill-conditioned basis with zero ridge");
  } else {
    gram += ridge * MatC::Identity(k, k);
  }
  return x * gram.ldlt().solve(x.adjoint());
}

/// S(p_M, Q) = Q H S_a(p_M): column m is the compressed steering vector of
/// hypothesis m.
inline MatC effective_steering(const PositionHypothesisSet& set, const Frontend& frontend,
                               const ArrayLayout& layout, const SimulationConfig& cfg) {
  MatC s(frontend.output_count(), set.size());
  for (int m = 0; m < set.size(); ++m)
    s.col(m) = frontend.compress(
        steering_vector(layout, set.hypotheses[static_cast<std::size_t>(m)], cfg));
  return s;
}

namespace detail {

/// Energy captured by the rank-1 projector of the residual direction:
/// sum_t |u^H y(t)|^2 / ||u||^2 with u = (I - P_others) v. Uses the stored
/// covariance when the window is longer than the channel count, raw
/// snapshots otherwise; the two forms agree identically.
inline double residual_projection_energy(const VecC& effective, const MatC* others_projector,
                                         const SnapshotBatch& batch,
                                         bool* degenerate = nullptr) {
  if (degenerate) *degenerate = false;
  VecC u = effective;
  if (others_projector) u -= *others_projector * effective;
  const double u_norm2 = u.squaredNorm();
  const double v_norm2 = effective.squaredNorm();
  // The collapse threshold sits above the ridge floor: a ridged projector
  // leaves a parallel remainder of relative size ~1e-12 on annihilated
  // directions, which must still count as collapsed.
  if (v_norm2 == 0.0 || u_norm2 <= 1e-20 * v_norm2) {
    if (degenerate) *degenerate = true;
    return 0.0;
  }
  if (batch.snapshot_count() > batch.channel_count()) {
    const cplx quad = (u.adjoint() * batch.covariance * u)(0, 0);
    return static_cast<double>(batch.snapshot_count()) * quad.real() / u_norm2;
  }
  double acc = 0.0;
  for (int t = 0; t < batch.snapshot_count(); ++t)
    acc += std::norm((u.adjoint() * batch.samples.col(t))(0, 0));
  return acc / u_norm2;
}

}  // namespace detail

/// Residual of the compressed steering vector of p_m after projecting out
/// the span of the other hypotheses (zero projector when `others` is empty).
inline VecC residual_steering(const SourcePosition& p_m, const PositionHypothesisSet& others,
                              const Frontend& frontend, const ArrayLayout& layout,
                              const SimulationConfig& cfg) {
  const VecC v = frontend.compress(steering_vector(layout, p_m, cfg));
  if (others.empty()) return v;
  const MatC s_others = effective_steering(others, frontend, layout, cfg);
  const MatC p = projection_operator(s_others, default_ridge(s_others));
  return v - p * v;
}

/// Per-user alternating-projection sub-objective
/// sum_t ||P[residual] y(t)||^2; 0 with the degeneracy flag set when the
/// residual collapses.
inline double ap_objective(const SourcePosition& p_m, const PositionHypothesisSet& others,
                           const SnapshotBatch& batch, const Frontend& frontend,
                           const ArrayLayout& layout, const SimulationConfig& cfg,
                           bool* degenerate = nullptr) {
  const VecC v = frontend.compress(steering_vector(layout, p_m, cfg));
  if (others.empty())
    return detail::residual_projection_energy(v, nullptr, batch, degenerate);
  const MatC s_others = effective_steering(others, frontend, layout, cfg);
  const MatC p = projection_operator(s_others, default_ridge(s_others));
  return detail::residual_projection_energy(v, &p, batch, degenerate);
}

/// Whole-set likelihood surrogate f(p_M, Q) = tr(P[S(p_M, Q)] R). Equals the
/// snapshot-sum form divided by N_T.
inline double focusing_objective(const PositionHypothesisSet& set, const Frontend& frontend,
                                 const SnapshotBatch& batch, const ArrayLayout& layout,
                                 const SimulationConfig& cfg) {
  if (set.empty()) return 0.0;
  const MatC s = effective_steering(set, frontend, layout, cfg);
  MatC gram = s.adjoint() * s;
  gram += default_ridge(s) * MatC::Identity(s.cols(), s.cols());
  const MatC cross = s.adjoint() * batch.covariance * s;
  return gram.ldlt().solve(cross).trace().real();
}

}  // namespace nfloc

#endif  // NFLOC_LIKELIHOOD_HPP
