// Copyright 2026 The dvr Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <set>
#include <string>
#include <vector>

#include "dvr/common.hpp"

namespace dvr {

struct ControlPoint {
  double intensity = 0.0;
  Rgba rgba;
  friend constexpr bool operator==(const ControlPoint&, const ControlPoint&) = default;
};

// Piecewise-linear map from normalized intensity to color and opacity.
//
// Control points must have strictly increasing intensities in [0,1] and
// channels in [0,1]. Missing endpoints at 0 and 1 are synthesized by copying
// the nearest control point, so the function is always defined on [0,1].
class TransferFunction {
 public:
  explicit TransferFunction(std::vector<ControlPoint> points) : points_(std::move(points)) {
    if (points_.empty()) throw ValidationError("tf", "at least one control point is required");
    for (std::size_t i = 0; i < points_.size(); ++i) {
      const ControlPoint& p = points_[i];
      const std::string where = "tf[" + std::to_string(i) + "]";
      if (!(p.intensity >= 0.0 && p.intensity <= 1.0))
        throw ValidationError(where + ".intensity", "must lie in [0,1]");
      for (const double ch : {p.rgba.r, p.rgba.g, p.rgba.b, p.rgba.a}) {
        if (!(ch >= 0.0 && ch <= 1.0)) throw ValidationError(where, "channel outside [0,1]");
      }
      if (i > 0 && !(p.intensity > points_[i - 1].intensity))
        throw ValidationError(where + ".intensity", "intensities must be strictly increasing");
    }
    if (points_.front().intensity > 0.0) points_.insert(points_.begin(), {0.0, points_.front().rgba});
    if (points_.back().intensity < 1.0) points_.push_back({1.0, points_.back().rgba});
  }

  // Linear ramp from transparent black to opaque white.
  static TransferFunction ramp() {
    return TransferFunction({{0.0, {0, 0, 0, 0}}, {1.0, {1, 1, 1, 1}}});
  }

  const std::vector<ControlPoint>& control_points() const noexcept { return points_; }

  // Interpolated RGBA; s is clamped to [0,1].
  Rgba evaluate(double s) const noexcept {
    s = std::isnan(s) ? 0.0 : clamp01(s);
    auto hi = std::upper_bound(points_.begin(), points_.end(), s,
                               [](double v, const ControlPoint& p) { return v < p.intensity; });
    if (hi == points_.end()) return points_.back().rgba;
    auto lo = hi - 1;
    const double t = (s - lo->intensity) / (hi->intensity - lo->intensity);
    const Rgba& a = lo->rgba;
    const Rgba& b = hi->rgba;
    return {a.r + t * (b.r - a.r), a.g + t * (b.g - a.g), a.b + t * (b.b - a.b), a.a + t * (b.a - a.a)};
  }

  double opacity_at(double s) const noexcept { return evaluate(s).a; }
  Rgb color_at(double s) const noexcept { return evaluate(s).rgb(); }

  friend bool operator==(const TransferFunction&, const TransferFunction&) = default;

 private:
  std::vector<ControlPoint> points_;
};

inline double opacity_at(const TransferFunction& tf, double s) { return tf.opacity_at(s); }
inline Rgb color_at(const TransferFunction& tf, double s) { return tf.color_at(s); }

// Keeps the colors of `tf` and replaces opacity with a trapezoid: zero outside
// [center - width/2, center + width/2], alpha_peak on the inner plateau, and
// linear ramps of width/4 at both edges inside the band.
inline TransferFunction isolate_band(const TransferFunction& tf, double center, double width,
                                     double alpha_peak) {
  if (!(width > 0.0)) throw ValidationError("width", "band width must be positive");
  if (!(alpha_peak >= 0.0 && alpha_peak <= 1.0))
    throw ValidationError("alpha_peak", "must lie in [0,1]");
  const double lo = center - width / 2;
  const double hi = center + width / 2;
  constexpr double kSlack = 1e-12;
  if (lo < -kSlack || hi > 1.0 + kSlack) throw ValidationError("center", "band must lie within [0,1]");

  const double ramp = width / 4;
  const double knots[] = {std::max(lo, 0.0), lo + ramp, hi - ramp, std::min(hi, 1.0)};
  auto band_alpha = [&](double s) {
    if (s <= lo || s >= hi) return 0.0;
    if (s < lo + ramp) return alpha_peak * (s - lo) / ramp;
    if (s > hi - ramp) return alpha_peak * (hi - s) / ramp;
    return alpha_peak;
  };

  std::set<double> positions{0.0, 1.0};
  for (const ControlPoint& p : tf.control_points()) positions.insert(p.intensity);
  for (const double k : knots) positions.insert(std::clamp(k, 0.0, 1.0));

  std::vector<ControlPoint> out;
  out.reserve(positions.size());
  for (const double s : positions) {
    if (!out.empty() && s - out.back().intensity <= 0.0) continue;
    const Rgb c = tf.color_at(s);
    // The plateau knots are evaluated exactly so the peak is hit without rounding.
    double a = band_alpha(s);
    if (s == knots[1] || s == knots[2]) a = alpha_peak;
    out.push_back({s, {c.x, c.y, c.z, a}});
  }
  return TransferFunction(std::move(out));
}

}  // namespace dvr
