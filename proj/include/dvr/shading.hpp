// Copyright 2026 The dvr Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cmath>
#include <optional>
#include <string>
#include <string_view>

#include "dvr/common.hpp"

namespace dvr {

enum class ShadingModel { phong, cel, none };

inline std::string_view to_string(ShadingModel m) {
  switch (m) {
    case ShadingModel::phong: return "phong";
    case ShadingModel::cel: return "cel";
    case ShadingModel::none: return "none";
  }
  return "phong";
}

inline ShadingModel parse_shading_model(std::string_view s) {
  if (s == "phong") return ShadingModel::phong;
  if (s == "cel") return ShadingModel::cel;
  if (s == "none") return ShadingModel::none;
  throw ValidationError("model", "unknown shading model '" + std::string(s) + "'");
}

// Light and material parameters for local illumination. A directional light
// is used; when light_dir is empty the light rides with the camera
// (headlight, L == V). Otherwise light_dir is the world-space direction from
// a sample toward the light.
struct ShadingConfig {
  ShadingModel model = ShadingModel::phong;
  double ambient = 0.1;
  double diffuse = 0.6;
  double specular = 0.3;
  std::optional<Vec3> light_dir;
  double shininess = 60.0;
  int cel_bands = 3;

  // Normalizes light_dir in place and rejects out-of-range parameters.
  void validate() {
    auto check_unit = [](double v, const char* field) {
      if (!(v >= 0.0 && v <= 1.0)) throw ValidationError(field, "must lie in [0,1]");
    };
    check_unit(ambient, "ambient");
    check_unit(diffuse, "diffuse");
    check_unit(specular, "specular");
    if (!(shininess > 0.0) || !std::isfinite(shininess))
      throw ValidationError("shininess", "must be positive");
    if (cel_bands < 2) throw ValidationError("cel_bands", "must be at least 2");
    if (light_dir) {
      if (!is_finite(*light_dir) || length(*light_dir) == 0.0)
        throw ValidationError("light_dir", "must be a finite non-zero vector");
      light_dir = normalize(*light_dir);
    }
  }

  friend bool operator==(const ShadingConfig&, const ShadingConfig&) = default;
};

// N may be the zero vector when the gradient vanishes; V and L are unit
// vectors pointing from the sample toward the eye and the light.
struct ShadingInputs {
  Rgb base_color;
  Vec3 normal;
  Vec3 view;
  Vec3 light;
};

inline Vec3 reflect(const Vec3& l, const Vec3& n) { return 2.0 * dot(n, l) * n - l; }

inline bool has_normal(const Vec3& n) { return n.x != 0.0 || n.y != 0.0 || n.z != 0.0; }

inline Rgb phong_shade(const ShadingInputs& in, const ShadingConfig& cfg) {
  const Rgb& c = in.base_color;
  Rgb g = c * cfg.ambient;
  if (has_normal(in.normal)) {
    const double n_dot_l = std::max(dot(in.normal, in.light), 0.0);
    const Vec3 r = reflect(in.light, in.normal);
    const double r_dot_v = std::max(dot(r, in.view), 0.0);
    g += c * (cfg.diffuse * n_dot_l);
    if (cfg.specular > 0.0 && r_dot_v > 0.0) g += c * (cfg.specular * std::pow(r_dot_v, cfg.shininess));
  }
  return clamp01(g);
}

// Quantizes a diffuse factor in [0,1] to the midpoint of one of `bands`
// equal steps. Non-positive input stays 0 (unlit side).
inline double cel_quantize(double n_dot_l, int bands) {
  if (!(n_dot_l > 0.0)) return 0.0;
  const double x = std::min(n_dot_l, 1.0);
  const int band = std::min(static_cast<int>(std::floor(x * bands)), bands - 1);
  return (band + 0.5) / bands;
}

inline Rgb cel_shade(const ShadingInputs& in, const ShadingConfig& cfg) {
  const Rgb& c = in.base_color;
  Rgb g = c * cfg.ambient;
  if (has_normal(in.normal)) {
    const double q = cel_quantize(dot(in.normal, in.light), cfg.cel_bands);
    g += c * (cfg.diffuse * q);
  }
  return clamp01(g);
}

inline Rgb shade(const ShadingInputs& in, const ShadingConfig& cfg) {
  switch (cfg.model) {
    case ShadingModel::phong: return phong_shade(in, cfg);
    case ShadingModel::cel: return cel_shade(in, cfg);
    case ShadingModel::none: return clamp01(in.base_color);
  }
  return in.base_color;
}

}  // namespace dvr
