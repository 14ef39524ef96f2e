// SPDX-License-Identifier: Apache-2.0
//
// nfloc - near-field multi-source localization with RF-chain-reduced arrays
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
// http://www.apache.org/licenses/LICENSE-2.0

#ifndef NFLOC_FRONTEND_HPP
#define NFLOC_FRONTEND_HPP

#include <cmath>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <utility>

#include "nfloc/geometry.hpp"

namespace nfloc {

enum class ArchitectureKind { FullyDigital, HybridPhaseShifter, Dma };

inline const char* to_string(ArchitectureKind k) {
  switch (k) {
    case ArchitectureKind::FullyDigital: return "fully_digital";
    case ArchitectureKind::HybridPhaseShifter: return "hybrid";
    case ArchitectureKind::Dma: return "dma";
  }
  return "?";
}

/// Propagation inside a microstrip: element (i,l) reaches the output port
/// through h_il = exp(-rho_il (alpha_i + j beta_i)).
struct WaveguideModel {
  double attenuation_per_m = 0.0;  // alpha
  double wavenumber_per_m = 0.0;   // beta
  MatR tap_positions_m;            // rho, n_rows x n_cols, nondecreasing per row
};

/// Taps placed at the element's along-strip offset from the output port.
inline WaveguideModel default_waveguide(const ArrayLayout& layout, double alpha_per_m,
                                        double beta_per_m) {
  if (alpha_per_m < 0.0)
    throw std::invalid_argument("default_waveguide: attenuation must be >= 0");
  WaveguideModel w;
  w.attenuation_per_m = alpha_per_m;
  w.wavenumber_per_m = beta_per_m;
  w.tap_positions_m.resize(layout.n_rows, layout.n_cols);
  for (int i = 0; i < layout.n_rows; ++i)
    for (int l = 0; l < layout.n_cols; ++l)
      w.tap_positions_m(i, l) = static_cast<double>(l) * layout.col_spacing_m;
  return w;
}

struct Architecture {
  ArchitectureKind kind = ArchitectureKind::FullyDigital;
  std::optional<WaveguideModel> waveguide;  // DMA only
};

enum class WeightConstraint { PhaseOnly, Lorentzian, Identity };

/// Analog combining matrix Q. For hybrid/DMA arrays, values is N_d x N and
/// block sparse: entry (n, i*N_e + l) may be nonzero only when i == n.
/// The fully digital array is the degenerate case values = I_N.
struct AnalogWeights {
  MatC values;
  WeightConstraint constraint = WeightConstraint::Identity;
  int n_rows = 0;  // N_d (strip count); equals N for Identity
  int n_cols = 0;  // N_e (elements per strip); 1 for Identity

  /// Nonzero weight of element (row, col), hybrid/DMA layouts.
  cplx element(int row, int col) const { return values(row, row * n_cols + col); }

  int input_count() const { return static_cast<int>(values.cols()); }
  int output_count() const { return static_cast<int>(values.rows()); }
};

/// Diagonal of the waveguide response matrix H (flat row-major element order).
inline VecC waveguide_response_matrix(const ArrayLayout& layout, const WaveguideModel& model) {
  if (model.tap_positions_m.rows() != layout.n_rows ||
      model.tap_positions_m.cols() != layout.n_cols)
    throw std::invalid_argument("waveguide_response_matrix: tap positions missing for some elements");
  VecC h(layout.element_count());
  for (int i = 0; i < layout.n_rows; ++i) {
    for (int l = 0; l < layout.n_cols; ++l) {
      const double rho = model.tap_positions_m(i, l);
      h(layout.flat_index(i, l)) =
          std::exp(-rho * model.attenuation_per_m) *
          std::polar(1.0, -rho * model.wavenumber_per_m);
    }
  }
  return h;
}

/// Maps a unit-modulus weight onto the Lorentzian circle |q - j/2| = 1/2,
/// preserving the phase direction: out = (j + in) / 2.
inline cplx lorentzian_project(cplx phase_only_weight) {
  if (std::abs(std::abs(phase_only_weight) - 1.0) > 1e-9)
    throw std::invalid_argument("lorentzian_project: input must be unit modulus");
  return (cplx(0.0, 1.0) + phase_only_weight) * 0.5;
}

struct WeightValidation {
  bool ok = true;
  std::string message;
};

/// Reports the first violated structural or constraint-set invariant.
inline WeightValidation validate_weights(const AnalogWeights& w) {
  constexpr double tol = 1e-9;
  auto fail = [](std::string msg) { return WeightValidation{false, std::move(msg)}; };

  if (w.constraint == WeightConstraint::Identity) {
    const auto n = w.values.rows();
    if (w.values.cols() != n) return fail("identity weights must be square");
    for (Eigen::Index r = 0; r < n; ++r)
      for (Eigen::Index c = 0; c < n; ++c) {
        const cplx want = (r == c) ? cplx(1.0, 0.0) : cplx(0.0, 0.0);
        if (std::abs(w.values(r, c) - want) > tol) {
          std::ostringstream os;
          os << "identity violated at (" << r << "," << c << ")";
          return fail(os.str());
        }
      }
    return {};
  }

  if (w.values.rows() != w.n_rows ||
      w.values.cols() != static_cast<Eigen::Index>(w.n_rows) * w.n_cols)
    return fail("weight matrix shape does not match strip dimensions");

  for (int n = 0; n < w.n_rows; ++n) {
    for (int i = 0; i < w.n_rows; ++i) {
      for (int l = 0; l < w.n_cols; ++l) {
        const cplx q = w.values(n, i * w.n_cols + l);
        if (i != n) {
          if (std::abs(q) > tol) {
            std::ostringstream os;
            os << "off-block entry nonzero at row " << n << ", element (" << i << "," << l << ")";
            return fail(os.str());
          }
          continue;
        }
        if (w.constraint == WeightConstraint::PhaseOnly &&
            std::abs(std::abs(q) - 1.0) > tol) {
          std::ostringstream os;
          os << "phase-only violated at (" << i << "," << l << "): |q| = " << std::abs(q);
          return fail(os.str());
        }
        if (w.constraint == WeightConstraint::Lorentzian &&
            std::abs(std::abs(q - cplx(0.0, 0.5)) - 0.5) > tol) {
          std::ostringstream os;
          os << "Lorentzian violated at (" << i << "," << l << "): |q - j/2| = "
             << std::abs(q - cplx(0.0, 0.5));
          return fail(os.str());
        }
      }
    }
  }
  return {};
}

inline AnalogWeights identity_weights(const ArrayLayout& layout) {
  AnalogWeights w;
  const int n = layout.element_count();
  w.values = MatC::Identity(n, n);
  w.constraint = WeightConstraint::Identity;
  w.n_rows = n;
  w.n_cols = 1;
  return w;
}

/// Builds block-sparse weights from per-element phases: e^{j psi} for
/// PhaseOnly, (j + e^{j psi})/2 for Lorentzian.
inline AnalogWeights weights_from_phases(const ArrayLayout& layout, const MatR& phases_rad,
                                         WeightConstraint constraint) {
  if (constraint == WeightConstraint::Identity)
    throw std::invalid_argument("weights_from_phases: identity carries no phases");
  if (phases_rad.rows() != layout.n_rows || phases_rad.cols() != layout.n_cols)
    throw std::invalid_argument("weights_from_phases: phase matrix shape mismatch");
  AnalogWeights w;
  w.constraint = constraint;
  w.n_rows = layout.n_rows;
  w.n_cols = layout.n_cols;
  w.values = MatC::Zero(layout.n_rows, layout.element_count());
  for (int i = 0; i < layout.n_rows; ++i) {
    for (int l = 0; l < layout.n_cols; ++l) {
      const cplx unit = std::polar(1.0, phases_rad(i, l));
      w.values(i, layout.flat_index(i, l)) =
          (constraint == WeightConstraint::Lorentzian) ? lorentzian_project(unit) : unit;
    }
  }
  return w;
}

/// Seeded draw with phases uniform on [0, 2pi), mapped into the constraint set.
inline AnalogWeights random_weights(const ArrayLayout& layout, WeightConstraint constraint,
                                    std::uint64_t seed) {
  if (constraint == WeightConstraint::Identity) return identity_weights(layout);
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 2.0 * kPi);
  MatR phases(layout.n_rows, layout.n_cols);
  for (int i = 0; i < layout.n_rows; ++i)
    for (int l = 0; l < layout.n_cols; ++l) phases(i, l) = u(rng);
  return weights_from_phases(layout, phases, constraint);
}

/// y = Q H x (H given as its diagonal).
inline VecC apply_frontend(const AnalogWeights& w, const VecC& h_diag, const VecC& x) {
  if (x.size() != w.values.cols() || h_diag.size() != x.size())
    throw std::invalid_argument("apply_frontend: dimension mismatch");
  return w.values * h_diag.cwiseProduct(x);
}

/// Weights plus waveguide response of one concrete receive chain, with the
/// combined map B = Q H cached for repeated application.
class Frontend {
 public:
  Frontend(AnalogWeights weights, VecC h_diag)
      : weights_(std::move(weights)), h_diag_(std::move(h_diag)) {
    if (h_diag_.size() != weights_.values.cols())
      throw std::invalid_argument("Frontend: waveguide diagonal size mismatch");
    identity_ = weights_.constraint == WeightConstraint::Identity &&
                (h_diag_.array() == cplx(1.0, 0.0)).all();
    if (!identity_) combine_ = weights_.values * h_diag_.asDiagonal();
  }

  int input_count() const { return static_cast<int>(weights_.values.cols()); }
  int output_count() const { return static_cast<int>(weights_.values.rows()); }
  bool is_identity() const { return identity_; }
  const AnalogWeights& weights() const { return weights_; }
  const VecC& waveguide_diag() const { return h_diag_; }

  /// B = Q H as a dense matrix (identity materialized on demand).
  MatC combiner() const {
    return identity_ ? MatC(MatC::Identity(input_count(), input_count())) : combine_;
  }

  VecC compress(const VecC& x) const {
    if (x.size() != input_count())
      throw std::invalid_argument("Frontend::compress: dimension mismatch");
    return identity_ ? x : VecC(combine_ * x);
  }

 private:
  AnalogWeights weights_;
  VecC h_diag_;
  MatC combine_;
  bool identity_ = false;
};

inline Frontend digital_frontend(const ArrayLayout& layout) {
  return Frontend(identity_weights(layout), VecC::Ones(layout.element_count()));
}

/// Assembles the receive chain of an architecture around the given weights.
/// Fully digital ignores the weights argument and uses the identity.
inline Frontend make_frontend(const Architecture& arch, const ArrayLayout& layout,
                              const AnalogWeights& weights) {
  switch (arch.kind) {
    case ArchitectureKind::FullyDigital:
      return digital_frontend(layout);
    case ArchitectureKind::HybridPhaseShifter:
      return Frontend(weights, VecC::Ones(layout.element_count()));
    case ArchitectureKind::Dma: {
      if (!arch.waveguide)
        throw std::invalid_argument("make_frontend: DMA architecture needs a waveguide model");
      return Frontend(weights, waveguide_response_matrix(layout, *arch.waveguide));
    }
  }
  throw std::invalid_argument("make_frontend: unknown architecture");
}

/// Constraint set the architecture's tunable weights live in.
inline WeightConstraint native_constraint(ArchitectureKind kind) {
  switch (kind) {
    case ArchitectureKind::FullyDigital: return WeightConstraint::Identity;
    case ArchitectureKind::HybridPhaseShifter: return WeightConstraint::PhaseOnly;
    case ArchitectureKind::Dma: return WeightConstraint::Lorentzian;
  }
  return WeightConstraint::Identity;
}

}  // namespace nfloc

#endif  // NFLOC_FRONTEND_HPP
