// Copyright 2026 The dvr Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cmath>
#include <concepts>
#include <cstddef>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "dvr/common.hpp"

namespace dvr {

// Lower-left-rear corner of a cell plus the fractional offset of a point
// inside it. All eight corners base + {0,1}^3 are valid grid indices.
struct CellCoords {
  Index3 base;
  Vec3 frac;
};

struct IntensityRange {
  double min = 0.0;
  double max = 1.0;
  friend constexpr bool operator==(const IntensityRange&, const IntensityRange&) = default;
};

// Immutable scalar field sampled on a regular grid. Grid point (i,j,k) sits at
// world position (i*dx, j*dy, k*dz), so the bounding box is
// [0, (n-1)*spacing] per axis. Values are normalized intensities in [0,1]
// stored x-fastest.
template <std::floating_point T>
class BasicVolumeGrid {
 public:
  using value_type = T;

  BasicVolumeGrid(Index3 dims, Vec3 spacing, std::vector<T> values,
                  IntensityRange intensity_range = {})
      : dims_(dims), spacing_(spacing), values_(std::move(values)), range_(intensity_range) {
    if (dims_.i < 2 || dims_.j < 2 || dims_.k < 2)
      throw ValidationError("dims", "every axis needs at least 2 samples");
    if (!(spacing_.x > 0.0 && spacing_.y > 0.0 && spacing_.z > 0.0) || !is_finite(spacing_))
      throw ValidationError("spacing_mm", "spacing components must be positive");
    const std::size_t expected = voxel_count();
    if (values_.size() != expected)
      throw ValidationError("values", "expected " + std::to_string(expected) + " samples, got " +
                                          std::to_string(values_.size()));
    for (const T v : values_) {
      if (!(v >= T(0) && v <= T(1)))
        throw ValidationError("values", "intensity outside [0,1]");
    }
  }

  const Index3& dims() const noexcept { return dims_; }
  const Vec3& spacing() const noexcept { return spacing_; }
  const IntensityRange& intensity_range() const noexcept { return range_; }
  std::span<const T> values() const noexcept { return values_; }

  std::size_t voxel_count() const noexcept {
    return static_cast<std::size_t>(dims_.i) * static_cast<std::size_t>(dims_.j) *
           static_cast<std::size_t>(dims_.k);
  }

  // Upper corner of the bounding box in millimeters.
  Vec3 extent() const noexcept {
    return {(dims_.i - 1) * spacing_.x, (dims_.j - 1) * spacing_.y, (dims_.k - 1) * spacing_.z};
  }

  bool contains(const Vec3& p) const noexcept {
    const Vec3 e = extent();
    return p.x >= 0.0 && p.y >= 0.0 && p.z >= 0.0 && p.x <= e.x && p.y <= e.y && p.z <= e.z;
  }

  std::size_t linear_index(int i, int j, int k) const noexcept {
    return static_cast<std::size_t>(i) +
           static_cast<std::size_t>(dims_.i) *
               (static_cast<std::size_t>(j) + static_cast<std::size_t>(dims_.j) * static_cast<std::size_t>(k));
  }

  // Unchecked read; callers guarantee the index is on the grid.
  T operator()(int i, int j, int k) const noexcept { return values_[linear_index(i, j, k)]; }

 private:
  Index3 dims_;
  Vec3 spacing_;
  std::vector<T> values_;
  IntensityRange range_;
};

using VolumeGrid = BasicVolumeGrid<double>;
using VolumeGridF = BasicVolumeGrid<float>;

template <std::floating_point T>
double value_at(const BasicVolumeGrid<T>& grid, Index3 ijk) {
  const Index3& d = grid.dims();
  if (ijk.i < 0 || ijk.j < 0 || ijk.k < 0 || ijk.i >= d.i || ijk.j >= d.j || ijk.k >= d.k)
    throw IndexError("voxel index (" + std::to_string(ijk.i) + "," + std::to_string(ijk.j) + "," +
                     std::to_string(ijk.k) + ") outside grid");
  return static_cast<double>(grid(ijk.i, ijk.j, ijk.k));
}

namespace detail {

// Largest double strictly below one; the max face maps to this fraction.
inline constexpr double kFracCeiling = 1.0 - std::numeric_limits<double>::epsilon() / 2;

inline void locate_axis(double p, double spacing, int n, int& base, double& frac) {
  const double u = p / spacing;
  double b = std::floor(u);
  if (b < 0.0) b = 0.0;
  if (b > n - 2) b = n - 2;
  base = static_cast<int>(b);
  frac = std::clamp(u - b, 0.0, kFracCeiling);
}

// No bounds check: p must be inside (or on) the bounding box.
template <std::floating_point T>
CellCoords locate_cell_unchecked(const BasicVolumeGrid<T>& grid, const Vec3& p) {
  CellCoords c;
  const Index3& d = grid.dims();
  const Vec3& s = grid.spacing();
  locate_axis(p.x, s.x, d.i, c.base.i, c.frac.x);
  locate_axis(p.y, s.y, d.j, c.base.j, c.frac.y);
  locate_axis(p.z, s.z, d.k, c.base.k, c.frac.z);
  return c;
}

// Exact at t == 0 and for a == b.
inline double lerp(double a, double b, double t) { return a + t * (b - a); }

// Three stages of separable linear interpolation: four along x, two along y,
// one along z.
template <std::floating_point T>
double interpolate_cell(const BasicVolumeGrid<T>& grid, const CellCoords& c) {
  const int i = c.base.i;
  const int j = c.base.j;
  const int k = c.base.k;
  const double u = c.frac.x;
  const double v = c.frac.y;
  const double w = c.frac.z;

  const std::size_t sx = 1;
  const std::size_t sy = static_cast<std::size_t>(grid.dims().i);
  const std::size_t sz = sy * static_cast<std::size_t>(grid.dims().j);
  const T* p = grid.values().data() + grid.linear_index(i, j, k);

  const double c00 = lerp(p[0], p[sx], u);
  const double c10 = lerp(p[sy], p[sy + sx], u);
  const double c01 = lerp(p[sz], p[sz + sx], u);
  const double c11 = lerp(p[sz + sy], p[sz + sy + sx], u);

  const double c0 = lerp(c00, c10, v);
  const double c1 = lerp(c01, c11, v);

  return lerp(c0, c1, w);
}

template <std::floating_point T>
double sample_clamped(const BasicVolumeGrid<T>& grid, const Vec3& p) {
  return interpolate_cell(grid, locate_cell_unchecked(grid, p));
}

// Central difference with h = spacing/2 per axis, falling back to a one-sided
// difference when a probe would leave the box.
template <std::floating_point T>
Vec3 gradient_clamped(const BasicVolumeGrid<T>& grid, const Vec3& p) {
  const Vec3& s = grid.spacing();
  const Vec3 e = grid.extent();
  Vec3 g;
  for (std::size_t a = 0; a < 3; ++a) {
    const double h = 0.5 * s[a];
    double lo = p[a] - h;
    double hi = p[a] + h;
    if (lo < 0.0) lo = p[a];
    if (hi > e[a]) hi = p[a];
    const double span = hi - lo;
    if (span <= 0.0) {
      g[a] = 0.0;
      continue;
    }
    Vec3 plo = p;
    Vec3 phi = p;
    plo[a] = lo;
    phi[a] = hi;
    g[a] = (sample_clamped(grid, phi) - sample_clamped(grid, plo)) / span;
  }
  return g;
}

}  // namespace detail

// Empty when p lies outside the closed bounding box.
template <std::floating_point T>
std::optional<CellCoords> locate_cell(const BasicVolumeGrid<T>& grid, const Vec3& p) {
  if (!is_finite(p) || !grid.contains(p)) return std::nullopt;
  return detail::locate_cell_unchecked(grid, p);
}

template <std::floating_point T>
std::optional<double> trilinear_sample(const BasicVolumeGrid<T>& grid, const Vec3& p) {
  const auto cell = locate_cell(grid, p);
  if (!cell) return std::nullopt;
  return detail::interpolate_cell(grid, *cell);
}

// Gradient of the trilinear reconstruction, in intensity per millimeter.
template <std::floating_point T>
std::optional<Vec3> gradient_at(const BasicVolumeGrid<T>& grid, const Vec3& p) {
  if (!is_finite(p) || !grid.contains(p)) return std::nullopt;
  return detail::gradient_clamped(grid, p);
}

}  // namespace dvr
