// Copyright 2026 The dvr Authors
// SPDX-License-Identifier: Apache-2.0

// JSON documents shared by the CLI and the render service: transfer
// functions, shading, camera and sampling configs, and whole scenes.

#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "dvr/common.hpp"
#include "dvr/io.hpp"
#include "dvr/raycaster.hpp"
#include "dvr/shading.hpp"
#include "dvr/transfer_function.hpp"

namespace dvr {

using nlohmann::json;

namespace detail {

inline double json_number(const json& j, const std::string& field) {
  if (!j.is_number()) throw ValidationError(field, "expected a number");
  return j.get<double>();
}

inline int json_int(const json& j, const std::string& field) {
  if (!j.is_number_integer()) throw ValidationError(field, "expected an integer");
  return j.get<int>();
}

inline json vec3_json(const Vec3& v) { return json::array({v.x, v.y, v.z}); }

}  // namespace detail

// ---- transfer function: [{intensity, r, g, b, a}, ...]

inline json to_json(const TransferFunction& tf) {
  json arr = json::array();
  for (const ControlPoint& p : tf.control_points())
    arr.push_back({{"intensity", p.intensity}, {"r", p.rgba.r}, {"g", p.rgba.g}, {"b", p.rgba.b}, {"a", p.rgba.a}});
  return arr;
}

inline TransferFunction transfer_function_from_json(const json& j) {
  if (!j.is_array()) throw ValidationError("tf", "expected an array of control points");
  std::vector<ControlPoint> points;
  for (std::size_t i = 0; i < j.size(); ++i) {
    const json& p = j[i];
    const std::string where = "tf[" + std::to_string(i) + "]";
    if (!p.is_object()) throw ValidationError(where, "expected an object");
    auto field = [&](const char* key) {
      if (!p.contains(key)) throw ValidationError(where + "." + key, "missing");
      return detail::json_number(p.at(key), where + "." + key);
    };
    points.push_back({field("intensity"), {field("r"), field("g"), field("b"), field("a")}});
  }
  return TransferFunction(std::move(points));
}

// ---- shading: {model, ambient, diffuse, specular, light_dir, shininess, cel_bands}

inline json to_json(const ShadingConfig& s) {
  json j{{"model", std::string(to_string(s.model))},
         {"ambient", s.ambient},
         {"diffuse", s.diffuse},
         {"specular", s.specular},
         {"shininess", s.shininess},
         {"cel_bands", s.cel_bands}};
  j["light_dir"] = s.light_dir ? detail::vec3_json(*s.light_dir) : json(nullptr);
  return j;
}

// Overlays the keys present in `j` onto `base`, then validates.
inline ShadingConfig shading_from_json(const json& j, ShadingConfig base = {}) {
  if (!j.is_object()) throw ValidationError("shading", "expected an object");
  if (j.contains("model")) {
    if (!j.at("model").is_string()) throw ValidationError("model", "expected a string");
    base.model = parse_shading_model(j.at("model").get<std::string>());
  }
  if (j.contains("ambient")) base.ambient = detail::json_number(j.at("ambient"), "ambient");
  if (j.contains("diffuse")) base.diffuse = detail::json_number(j.at("diffuse"), "diffuse");
  if (j.contains("specular")) base.specular = detail::json_number(j.at("specular"), "specular");
  if (j.contains("shininess")) base.shininess = detail::json_number(j.at("shininess"), "shininess");
  if (j.contains("cel_bands")) base.cel_bands = detail::json_int(j.at("cel_bands"), "cel_bands");
  if (j.contains("light_dir")) {
    if (j.at("light_dir").is_null())
      base.light_dir.reset();
    else
      base.light_dir = detail::json_vec3(j.at("light_dir"), "light_dir");
  }
  base.validate();
  return base;
}

// ---- sampling: {step, early_termination_alpha, background}

inline json to_json(const SamplingConfig& s) {
  json j{{"early_termination_alpha", s.early_termination_alpha}, {"background", detail::vec3_json(s.background)}};
  j["step"] = s.step ? json(*s.step) : json(nullptr);
  return j;
}

inline SamplingConfig sampling_from_json(const json& j, SamplingConfig base = {}) {
  if (!j.is_object()) throw ValidationError("sampling", "expected an object");
  if (j.contains("step")) {
    if (j.at("step").is_null())
      base.step.reset();
    else
      base.step = detail::json_number(j.at("step"), "step");
  }
  if (j.contains("early_termination_alpha"))
    base.early_termination_alpha = detail::json_number(j.at("early_termination_alpha"), "early_termination_alpha");
  if (j.contains("background")) base.background = detail::json_vec3(j.at("background"), "background");
  base.validate();
  return base;
}

// ---- camera: {eye, target, up, fov, width, height[, projection, ortho_height]}

inline json to_json(const Camera& c) {
  json j{{"eye", detail::vec3_json(c.eye())},
         {"target", detail::vec3_json(c.target())},
         {"up", detail::vec3_json(c.up())},
         {"fov", c.vertical_fov()},
         {"width", c.width()},
         {"height", c.height()}};
  if (c.projection() == Projection::orthographic) {
    j["projection"] = "orthographic";
    j["ortho_height"] = c.ortho_height();
  }
  return j;
}

inline Camera camera_from_json(const json& j, const std::optional<Camera>& base = std::nullopt) {
  if (!j.is_object()) throw ValidationError("camera", "expected an object");
  auto vec = [&](const char* key, std::optional<Vec3> fallback) {
    if (j.contains(key)) return detail::json_vec3(j.at(key), std::string("camera.") + key);
    if (!fallback) throw ValidationError(std::string("camera.") + key, "missing");
    return *fallback;
  };
  const Vec3 eye = vec("eye", base ? std::optional(base->eye()) : std::nullopt);
  const Vec3 target = vec("target", base ? std::optional(base->target()) : std::nullopt);
  const Vec3 up = vec("up", base ? base->up() : Vec3{0, 0, 1});
  const double fov = j.contains("fov") ? detail::json_number(j.at("fov"), "camera.fov") : (base ? base->vertical_fov() : 30.0);
  const int width = j.contains("width") ? detail::json_int(j.at("width"), "camera.width") : (base ? base->width() : 512);
  const int height = j.contains("height") ? detail::json_int(j.at("height"), "camera.height") : (base ? base->height() : 512);
  Projection projection = base ? base->projection() : Projection::perspective;
  if (j.contains("projection")) {
    const std::string p = j.at("projection").get<std::string>();
    if (p == "perspective")
      projection = Projection::perspective;
    else if (p == "orthographic")
      projection = Projection::orthographic;
    else
      throw ValidationError("camera.projection", "expected perspective or orthographic");
  }
  const double ortho = j.contains("ortho_height") ? detail::json_number(j.at("ortho_height"), "camera.ortho_height")
                                                  : (base ? base->ortho_height() : 0.0);
  return Camera(eye, target, up, fov, width, height, projection, ortho);
}

// A full render description. Any part may be absent from a document; the
// consumer supplies defaults.
struct SceneDoc {
  std::optional<Camera> camera;
  std::optional<SamplingConfig> sampling;
  std::optional<TransferFunction> tf;
  std::optional<ShadingConfig> shading;
};

inline SceneDoc scene_from_json(const json& j) {
  if (!j.is_object()) throw ValidationError("scene", "expected an object");
  SceneDoc s;
  if (j.contains("camera")) s.camera = camera_from_json(j.at("camera"));
  if (j.contains("sampling")) s.sampling = sampling_from_json(j.at("sampling"));
  if (j.contains("tf")) s.tf = transfer_function_from_json(j.at("tf"));
  if (j.contains("shading")) s.shading = shading_from_json(j.at("shading"));
  return s;
}

inline json to_json(const SceneDoc& s) {
  json j = json::object();
  if (s.camera) j["camera"] = to_json(*s.camera);
  if (s.sampling) j["sampling"] = to_json(*s.sampling);
  if (s.tf) j["tf"] = to_json(*s.tf);
  if (s.shading) j["shading"] = to_json(*s.shading);
  return j;
}

// Parses text and converts nlohmann type errors into ValidationError.
template <typename F>
auto parse_document(std::string_view text, const std::string& what, F&& convert) {
  const json j = detail::parse_json_text(text, what);
  try {
    return convert(j);
  } catch (const json::exception& e) {
    throw ValidationError(what, e.what());
  }
}

}  // namespace dvr
