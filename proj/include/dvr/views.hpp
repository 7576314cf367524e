// Copyright 2026 The dvr Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <cmath>
#include <concepts>
#include <numbers>
#include <string>
#include <string_view>

#include "dvr/common.hpp"
#include "dvr/raycaster.hpp"
#include "dvr/volume.hpp"

namespace dvr {

// Anatomical slicing planes: axial holds z fixed, coronal y, sagittal x.
enum class SliceAxis { axial, coronal, sagittal };

inline std::string_view to_string(SliceAxis a) {
  switch (a) {
    case SliceAxis::axial: return "axial";
    case SliceAxis::coronal: return "coronal";
    case SliceAxis::sagittal: return "sagittal";
  }
  return "axial";
}

inline SliceAxis parse_slice_axis(std::string_view s) {
  if (s == "axial") return SliceAxis::axial;
  if (s == "coronal") return SliceAxis::coronal;
  if (s == "sagittal") return SliceAxis::sagittal;
  throw ValidationError("axis", "unknown axis '" + std::string(s) + "' (expected axial, coronal or sagittal)");
}

// Volume axis held constant by the slice (0=x, 1=y, 2=z), and the axes
// mapped to image columns and rows.
struct SliceLayout {
  int normal_axis;
  int col_axis;
  int row_axis;
};

inline SliceLayout slice_layout(SliceAxis a) {
  switch (a) {
    case SliceAxis::axial: return {2, 0, 1};
    case SliceAxis::coronal: return {1, 0, 2};
    case SliceAxis::sagittal: return {0, 1, 2};
  }
  return {2, 0, 1};
}

// Camera basis for a preset view. Looking along `forward` with `up` as given,
// image columns run along the slice's column axis and rows along its row
// axis, top row at the lowest coordinate, matching extract_slice.
struct ViewBasis {
  Vec3 forward;
  Vec3 up;
};

inline ViewBasis preset_basis(SliceAxis a) {
  switch (a) {
    case SliceAxis::axial: return {{0, 0, 1}, {0, -1, 0}};
    case SliceAxis::coronal: return {{0, -1, 0}, {0, 0, -1}};
    case SliceAxis::sagittal: return {{1, 0, 0}, {0, 0, -1}};
  }
  return {{0, 0, 1}, {0, -1, 0}};
}

inline constexpr double kPresetFovDeg = 5.0;

// Narrow-fov perspective camera on the preset axis, framing the whole volume.
template <std::floating_point T>
Camera preset_camera(const BasicVolumeGrid<T>& grid, SliceAxis axis, int width, int height) {
  const ViewBasis b = preset_basis(axis);
  const SliceLayout l = slice_layout(axis);
  const Vec3 e = grid.extent();
  const Vec3 center = e * 0.5;
  const double aspect = static_cast<double>(width) / height;
  const double half_rows = 0.5 * e[static_cast<std::size_t>(l.row_axis)];
  const double half_cols = 0.5 * e[static_cast<std::size_t>(l.col_axis)] / aspect;
  const double half_extent = 1.05 * std::max(half_rows, half_cols);
  const double distance =
      half_extent / std::tan(kPresetFovDeg * std::numbers::pi / 360.0) + 0.5 * e[static_cast<std::size_t>(l.normal_axis)];
  return Camera(center - b.forward * distance, center, b.up, kPresetFovDeg, width, height);
}

// Three-quarter perspective view used when no preset axis is requested.
template <std::floating_point T>
Camera free_camera(const BasicVolumeGrid<T>& grid, int width, int height) {
  const Vec3 e = grid.extent();
  const Vec3 center = e * 0.5;
  const double radius = 0.5 * length(e);
  const Vec3 dir = normalize(Vec3{1.0, -0.6, 0.8});
  const double fov = 30.0;
  const double distance = 1.1 * radius / std::sin(fov * std::numbers::pi / 360.0);
  return Camera(center + dir * distance, center, {0, 0, 1}, fov, width, height);
}

}  // namespace dvr
