// SPDX-License-Identifier: Apache-2.0
//
// nfloc - near-field multi-source localization with RF-chain-reduced arrays
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
// http://www.apache.org/licenses/LICENSE-2.0

#ifndef NFLOC_GEOMETRY_HPP
#define NFLOC_GEOMETRY_HPP

#include <cmath>
#include <stdexcept>
#include <string>

#include "nfloc/common.hpp"

namespace nfloc {

/// Rectangular array on the YZ plane. Rows (microstrips) run along z,
/// columns along y; the reference element sits at the origin corner.
/// Each element carries its polar pair (r, phi) relative to the reference:
/// r = sqrt(y^2 + z^2), cos(phi) = z/r, sin(phi) = y/r.
struct ArrayLayout {
  int n_rows = 0;  // microstrip / RF-chain count
  int n_cols = 0;  // elements per row
  double row_spacing_m = 0.0;
  double col_spacing_m = 0.0;
  double wavelength_m = 0.0;
  MatR radius_m;   // n_rows x n_cols, r of each element
  MatR angle_rad;  // n_rows x n_cols, phi of each element (0 at reference)

  int element_count() const { return n_rows * n_cols; }

  /// Row-major flat index, matching the stacking order of signal vectors.
  int flat_index(int row, int col) const { return row * n_cols + col; }

  Eigen::Vector3d element_position_m(int row, int col) const {
    return {0.0, static_cast<double>(col) * col_spacing_m,
            static_cast<double>(row) * row_spacing_m};
  }

  /// Diagonal extent D of the element bounding box.
  double aperture_diagonal_m() const {
    const double z_extent = static_cast<double>(n_rows - 1) * row_spacing_m;
    const double y_extent = static_cast<double>(n_cols - 1) * col_spacing_m;
    return std::hypot(y_extent, z_extent);
  }
};

/// Source location in polar form relative to the array reference element.
struct SourcePosition {
  double distance_m = 0.0;
  double azimuth_rad = 0.0;
  double elevation_rad = 0.0;

  Eigen::Vector3d cartesian() const {
    const double se = std::sin(elevation_rad);
    return {distance_m * se * std::cos(azimuth_rad),
            distance_m * se * std::sin(azimuth_rad),
            distance_m * std::cos(elevation_rad)};
  }

  double x_m() const { return cartesian().x(); }
  double y_m() const { return cartesian().y(); }

  bool operator==(const SourcePosition& o) const {
    return distance_m == o.distance_m && azimuth_rad == o.azimuth_rad &&
           elevation_rad == o.elevation_rad;
  }
};

inline ArrayLayout build_layout(int n_rows, int n_cols, double wavelength_m,
                                double row_spacing_m, double col_spacing_m) {
  if (n_rows < 1 || n_cols < 1)
    throw std::invalid_argument("build_layout: element counts must be >= 1");
  if (wavelength_m <= 0.0 || row_spacing_m <= 0.0 || col_spacing_m <= 0.0)
    throw std::invalid_argument("build_layout: spacings and wavelength must be > 0");

  ArrayLayout a;
  a.n_rows = n_rows;
  a.n_cols = n_cols;
  a.row_spacing_m = row_spacing_m;
  a.col_spacing_m = col_spacing_m;
  a.wavelength_m = wavelength_m;
  a.radius_m.resize(n_rows, n_cols);
  a.angle_rad.resize(n_rows, n_cols);
  for (int i = 0; i < n_rows; ++i) {
    for (int l = 0; l < n_cols; ++l) {
      const double y = static_cast<double>(l) * col_spacing_m;
      const double z = static_cast<double>(i) * row_spacing_m;
      const double r = std::hypot(y, z);
      a.radius_m(i, l) = r;
      a.angle_rad(i, l) = (r == 0.0) ? 0.0 : std::atan2(y, z);
    }
  }
  return a;
}

/// Exact source-to-element range from the triangular relation
/// d_il = sqrt(r^2 + d^2 - 2 r d g) with
/// g = sin(phi) sin(theta) sin(gamma) + cos(phi) cos(gamma).
inline double source_element_distance(const ArrayLayout& layout, int row, int col,
                                      const SourcePosition& p) {
  if (p.distance_m <= 0.0)
    throw std::invalid_argument("source_element_distance: source distance must be > 0");
  const double r = layout.radius_m(row, col);
  const double phi = layout.angle_rad(row, col);
  const double g = std::sin(phi) * std::sin(p.azimuth_rad) * std::sin(p.elevation_rad) +
                   std::cos(phi) * std::cos(p.elevation_rad);
  const double d = p.distance_m;
  return std::sqrt(r * r + d * d - 2.0 * r * d * g);
}

/// Fraunhofer limit 2 D^2 / lambda with D the aperture diagonal.
inline double fraunhofer_distance(const ArrayLayout& layout) {
  const double d_diag = layout.aperture_diagonal_m();
  return 2.0 * d_diag * d_diag / layout.wavelength_m;
}

}  // namespace nfloc

#endif  // NFLOC_GEOMETRY_HPP
