// SPDX-License-Identifier: Apache-2.0
//
// nfloc - near-field multi-source localization with RF-chain-reduced arrays
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
// http://www.apache.org/licenses/LICENSE-2.0

#ifndef NFLOC_COMMON_HPP
#define NFLOC_COMMON_HPP

#include <Eigen/Dense>

#include <atomic>
#include <complex>
#include <cstdint>
#include <stdexcept>
#include <thread>
#include <vector>

namespace nfloc {

using cplx = std::complex<double>;
using VecC = Eigen::VectorXcd;
using MatC = Eigen::MatrixXcd;
using MatR = Eigen::MatrixXd;

inline constexpr double kPi = 3.141592653589793238462643383279502884;
inline constexpr double kSpeedOfLight = 299792458.0;  // m/s

/// Raised when a computation degenerates (non-finite objective,
/// ill-conditioned projector with zero ridge, ...).
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

namespace detail {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

}  // namespace detail

/// Derives an independent child seed from a base seed and a salt.
/// Chain calls to key sub-streams by (trial, snr index, iteration, ...).
inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t salt) {
  return detail::splitmix64(seed ^ detail::splitmix64(salt + 0x632be59bd9b4e019ull));
}

/// Runs fn(i) for i in [0, count) on up to `workers` threads.
/// Results must be written to preallocated, task-owned slots; the caller
/// aggregates after return so output stays order-independent.
template <typename Fn>
void parallel_for(std::size_t count, int workers, Fn&& fn) {
  if (workers <= 1 || count <= 1) {
    for (std::size_t i = 0; i < count; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  auto worker = [&]() {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= count) return;
      fn(i);
    }
  };
  const int n_threads = static_cast<int>(
      std::min<std::size_t>(static_cast<std::size_t>(workers), count));
  std::vector<std::thread> pool;
  pool.reserve(static_cast<std::size_t>(n_threads));
  for (int t = 0; t < n_threads; ++t) pool.emplace_back(worker);
  for (auto& th : pool) th.join();
}

}  // namespace nfloc

#endif  // NFLOC_COMMON_HPP
