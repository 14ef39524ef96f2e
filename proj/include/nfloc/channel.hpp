// SPDX-License-Identifier: Apache-2.0
//
// nfloc - near-field multi-source localization with RF-chain-reduced arrays
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
// http://www.apache.org/licenses/LICENSE-2.0

#ifndef NFLOC_CHANNEL_HPP
#define NFLOC_CHANNEL_HPP

#include <cmath>
#include <random>
#include <vector>

#include "nfloc/frontend.hpp"
#include "nfloc/geometry.hpp"

namespace nfloc {

/// Pilot signaling and noise parameters of one observation window.
/// Phase terms are always derived from carrier frequency and c, never from
/// the layout's nominal wavelength.
struct SimulationConfig {
  double carrier_frequency_hz = 28e9;
  double speed_of_light_m_s = kSpeedOfLight;
  cplx pilot_symbol{1.0, 0.0};  // |x0| = 1
  int n_snapshots = 1;          // N_T
  double noise_variance = 0.0;  // sigma^2, per element
  std::uint64_t rng_seed = 0;

  void validate() const {
    if (carrier_frequency_hz <= 0.0 || speed_of_light_m_s <= 0.0)
      throw std::invalid_argument("SimulationConfig: frequency and c must be > 0");
    if (std::abs(std::abs(pilot_symbol) - 1.0) > 1e-9)
      throw std::invalid_argument("SimulationConfig: pilot symbol must be unit modulus");
    if (n_snapshots < 1)
      throw std::invalid_argument("SimulationConfig: n_snapshots must be >= 1");
    if (noise_variance < 0.0)
      throw std::invalid_argument("SimulationConfig: noise variance must be >= 0");
  }
};

/// Propagation phase v = 2 pi f d / c.
inline double phase_shift(double distance_m, const SimulationConfig& cfg) {
  if (distance_m <= 0.0)
    throw std::invalid_argument("phase_shift: distance must be > 0");
  return 2.0 * kPi * cfg.carrier_frequency_hz * distance_m / cfg.speed_of_light_m_s;
}

/// Free-space amplitude a = c / (4 pi f d).
inline double path_gain(double distance_m, const SimulationConfig& cfg) {
  if (distance_m <= 0.0)
    throw std::invalid_argument("path_gain: distance must be > 0");
  return cfg.speed_of_light_m_s / (4.0 * kPi * cfg.carrier_frequency_hz * distance_m);
}

/// Near-field steering vector: entry (i,l) = a(d_il) e^{-j v(d_il)} at the
/// exact element range. Coincides with the channel column when p is the
/// true source position.
inline VecC steering_vector(const ArrayLayout& layout, const SourcePosition& p,
                            const SimulationConfig& cfg) {
  VecC s(layout.element_count());
  for (int i = 0; i < layout.n_rows; ++i) {
    for (int l = 0; l < layout.n_cols; ++l) {
      const double d = source_element_distance(layout, i, l, p);
      s(layout.flat_index(i, l)) = std::polar(path_gain(d, cfg), -phase_shift(d, cfg));
    }
  }
  return s;
}

/// Spherical-wave channel G; column m is the m-th user's channel vector.
struct ChannelMatrix {
  MatC entries;  // N x M

  int element_count() const { return static_cast<int>(entries.rows()); }
  int user_count() const { return static_cast<int>(entries.cols()); }
};

inline ChannelMatrix channel_matrix(const ArrayLayout& layout,
                                    const std::vector<SourcePosition>& positions,
                                    const SimulationConfig& cfg) {
  if (positions.empty())
    throw std::invalid_argument("channel_matrix: need at least one source");
  for (std::size_t a = 0; a < positions.size(); ++a)
    for (std::size_t b = a + 1; b < positions.size(); ++b)
      if (positions[a] == positions[b])
        throw std::invalid_argument("channel_matrix: duplicate source positions (degenerate rank)");
  ChannelMatrix g;
  g.entries.resize(layout.element_count(), static_cast<Eigen::Index>(positions.size()));
  for (std::size_t m = 0; m < positions.size(); ++m)
    g.entries.col(static_cast<Eigen::Index>(m)) = steering_vector(layout, positions[m], cfg);
  return g;
}

/// sigma^2 from SNR = 10 log10(||x||^2 / (N sigma^2)) with x the noiseless
/// element-level signal; averaged over snapshot columns.
inline double snr_to_noise_variance(double snr_db, const MatC& noiseless_signal) {
  const double total = noiseless_signal.squaredNorm();
  if (total == 0.0)
    throw std::invalid_argument("snr_to_noise_variance: signal is identically zero");
  const double n_elements = static_cast<double>(noiseless_signal.rows());
  const double n_snapshots = static_cast<double>(noiseless_signal.cols());
  const double mean_energy = total / n_snapshots;
  return mean_energy / (n_elements * std::pow(10.0, snr_db / 10.0));
}

inline double snr_to_noise_variance(double snr_db, const VecC& noiseless_signal) {
  return snr_to_noise_variance(snr_db, MatC(noiseless_signal));
}

/// One observation window after the analog front end.
struct SnapshotBatch {
  MatC samples;     // channel_count x N_T
  MatC covariance;  // empirical (1/N_T) sum y y^H

  int channel_count() const { return static_cast<int>(samples.rows()); }
  int snapshot_count() const { return static_cast<int>(samples.cols()); }
};

/// Draws x(t) = G x0 1_M + z(t) with element-level circularly-symmetric
/// Gaussian noise (variance sigma^2, i.e. sigma^2/2 per real part), then
/// applies the front end: y(t) = Q H x(t).
inline SnapshotBatch simulate_snapshots(const ChannelMatrix& channel,
                                        const SimulationConfig& cfg,
                                        const Frontend& frontend) {
  cfg.validate();
  if (channel.element_count() != frontend.input_count())
    throw std::invalid_argument("simulate_snapshots: channel/front-end dimension mismatch");

  const int n = channel.element_count();
  const int n_t = cfg.n_snapshots;
  const VecC clean =
      channel.entries * VecC::Constant(channel.user_count(), cfg.pilot_symbol);

  std::mt19937_64 rng(cfg.rng_seed);
  std::normal_distribution<double> gauss(0.0, std::sqrt(cfg.noise_variance / 2.0));

  SnapshotBatch batch;
  batch.samples.resize(frontend.output_count(), n_t);
  VecC x(n);
  for (int t = 0; t < n_t; ++t) {
    if (cfg.noise_variance > 0.0) {
      for (int e = 0; e < n; ++e) {
        const double re = gauss(rng);
        const double im = gauss(rng);
        x(e) = clean(e) + cplx(re, im);
      }
    } else {
      x = clean;
    }
    batch.samples.col(t) = frontend.compress(x);
  }
  batch.covariance =
      (batch.samples * batch.samples.adjoint()) / static_cast<double>(n_t);
  return batch;
}

}  // namespace nfloc

#endif  // NFLOC_CHANNEL_HPP
