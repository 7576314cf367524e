// Copyright 2026 The dvr Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <cmath>
#include <concepts>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

#include "dvr/common.hpp"
#include "dvr/image.hpp"
#include "dvr/volume.hpp"

namespace dvr {

enum class SampleType { u8, u16le };

inline int bytes_per_sample(SampleType t) { return t == SampleType::u8 ? 1 : 2; }

inline std::string_view to_string(SampleType t) { return t == SampleType::u8 ? "u8" : "u16le"; }

inline SampleType parse_sample_type(std::string_view s) {
  if (s == "u8") return SampleType::u8;
  if (s == "u16le" || s == "u16-little-endian") return SampleType::u16le;
  throw UnsupportedFormatError("unsupported sample_type '" + std::string(s) + "'");
}

// Sidecar description of a headerless RAW volume.
struct VolumeMeta {
  Index3 dims;
  Vec3 spacing{1.0, 1.0, 1.0};
  SampleType sample_type = SampleType::u8;
  std::optional<IntensityRange> source_range;

  std::size_t voxel_count() const {
    return static_cast<std::size_t>(dims.i) * static_cast<std::size_t>(dims.j) * static_cast<std::size_t>(dims.k);
  }
  std::size_t byte_count() const { return voxel_count() * static_cast<std::size_t>(bytes_per_sample(sample_type)); }
};

namespace detail {

inline Vec3 json_vec3(const nlohmann::json& j, const std::string& field) {
  if (!j.is_array() || j.size() != 3) throw ValidationError(field, "expected an array of 3 numbers");
  Vec3 v;
  for (std::size_t a = 0; a < 3; ++a) {
    if (!j[a].is_number()) throw ValidationError(field, "expected an array of 3 numbers");
    v[a] = j[a].get<double>();
  }
  return v;
}

inline Index3 json_index3(const nlohmann::json& j, const std::string& field) {
  if (!j.is_array() || j.size() != 3) throw ValidationError(field, "expected an array of 3 integers");
  int v[3];
  for (std::size_t a = 0; a < 3; ++a) {
    if (!j[a].is_number_integer()) throw ValidationError(field, "expected an array of 3 integers");
    v[a] = j[a].get<int>();
  }
  return {v[0], v[1], v[2]};
}

inline nlohmann::json parse_json_text(std::string_view text, const std::string& what) {
  try {
    return nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw FormatError(what + ": invalid JSON (" + e.what() + ")");
  }
}

}  // namespace detail

// Parses {dims, spacing_mm, sample_type, source_range}. Unknown keys are
// reported through `warnings` and otherwise ignored.
inline VolumeMeta parse_volume_meta(const nlohmann::json& j, std::vector<std::string>* warnings = nullptr) {
  if (!j.is_object()) throw ValidationError("meta", "expected a JSON object");
  VolumeMeta m;
  if (!j.contains("dims")) throw ValidationError("dims", "missing");
  m.dims = detail::json_index3(j.at("dims"), "dims");
  if (m.dims.i <= 0 || m.dims.j <= 0 || m.dims.k <= 0) throw ValidationError("dims", "must be positive");
  if (j.contains("spacing_mm")) m.spacing = detail::json_vec3(j.at("spacing_mm"), "spacing_mm");
  if (!(m.spacing.x > 0 && m.spacing.y > 0 && m.spacing.z > 0))
    throw ValidationError("spacing_mm", "must be positive");
  if (j.contains("sample_type")) {
    if (!j.at("sample_type").is_string()) throw ValidationError("sample_type", "expected a string");
    m.sample_type = parse_sample_type(j.at("sample_type").get<std::string>());
  }
  if (j.contains("source_range") && !j.at("source_range").is_null()) {
    const auto& r = j.at("source_range");
    if (!r.is_array() || r.size() != 2 || !r[0].is_number() || !r[1].is_number())
      throw ValidationError("source_range", "expected [min, max]");
    IntensityRange range{r[0].get<double>(), r[1].get<double>()};
    if (!(range.max > range.min)) throw ValidationError("source_range", "max must exceed min");
    m.source_range = range;
  }
  for (const auto& [key, value] : j.items()) {
    if (key != "dims" && key != "spacing_mm" && key != "sample_type" && key != "source_range" && warnings)
      warnings->push_back("ignoring unknown meta key '" + key + "'");
  }
  return m;
}

inline VolumeMeta parse_volume_meta_text(std::string_view text, std::vector<std::string>* warnings = nullptr) {
  return parse_volume_meta(detail::parse_json_text(text, "meta"), warnings);
}

inline nlohmann::json to_json(const VolumeMeta& m) {
  nlohmann::json j;
  j["dims"] = {m.dims.i, m.dims.j, m.dims.k};
  j["spacing_mm"] = {m.spacing.x, m.spacing.y, m.spacing.z};
  j["sample_type"] = std::string(to_string(m.sample_type));
  if (m.source_range) j["source_range"] = {m.source_range->min, m.source_range->max};
  return j;
}

// Decodes x-fastest samples and normalizes them to [0,1] with the declared
// source range, or with the observed min/max when none is given. A constant
// volume with no declared range normalizes to all zeros.
template <std::floating_point T = double>
BasicVolumeGrid<T> load_raw_volume(std::span<const std::uint8_t> data, const VolumeMeta& meta) {
  const std::size_t bps = static_cast<std::size_t>(bytes_per_sample(meta.sample_type));
  const std::size_t n = meta.voxel_count();
  if (data.size() != n * bps)
    throw FormatError("RAW size mismatch: expected " + std::to_string(n * bps) + " bytes, got " +
                      std::to_string(data.size()));
  std::vector<double> raw(n);
  for (std::size_t i = 0; i < n; ++i) {
    raw[i] = bps == 1 ? data[i] : static_cast<double>(data[2 * i] | (data[2 * i + 1] << 8));
  }
  IntensityRange range;
  if (meta.source_range) {
    range = *meta.source_range;
  } else if (n > 0) {
    const auto [lo, hi] = std::minmax_element(raw.begin(), raw.end());
    range = {*lo, *hi};
  }
  const double span = range.max - range.min;
  std::vector<T> values(n);
  for (std::size_t i = 0; i < n; ++i)
    values[i] = span > 0.0 ? static_cast<T>(clamp01((raw[i] - range.min) / span)) : T(0);
  return BasicVolumeGrid<T>(meta.dims, meta.spacing, std::move(values), range);
}

// Inverse of load_raw_volume: maps intensities back through `range` (the
// grid's own intensity range by default) and rounds to the sample type.
template <std::floating_point T>
std::vector<std::uint8_t> write_raw_volume(const BasicVolumeGrid<T>& grid, SampleType type,
                                           std::optional<IntensityRange> range = std::nullopt) {
  const IntensityRange r = range.value_or(grid.intensity_range());
  const double limit = type == SampleType::u8 ? 255.0 : 65535.0;
  std::vector<std::uint8_t> out;
  out.reserve(grid.voxel_count() * static_cast<std::size_t>(bytes_per_sample(type)));
  for (const T v : grid.values()) {
    const double raw = std::clamp(std::round(r.min + static_cast<double>(v) * (r.max - r.min)), 0.0, limit);
    const auto q = static_cast<std::uint32_t>(raw);
    out.push_back(static_cast<std::uint8_t>(q & 0xFF));
    if (type == SampleType::u16le) out.push_back(static_cast<std::uint8_t>(q >> 8));
  }
  return out;
}

// Stacks 8-bit grayscale slices along z: pixel (col,row) of slice k becomes
// voxel (col,row,k). Intensities are pixel/255.
template <std::floating_point T = double>
BasicVolumeGrid<T> load_slice_stack(std::span<const Image8> slices, Vec3 spacing = {1.0, 1.0, 1.0}) {
  if (slices.size() < 2) throw FormatError("slice stack needs at least 2 slices");
  const int w = slices[0].width;
  const int h = slices[0].height;
  for (std::size_t k = 0; k < slices.size(); ++k) {
    if (slices[k].channels != 1)
      throw UnsupportedFormatError("slice " + std::to_string(k) + " is not 8-bit grayscale");
    if (slices[k].width != w || slices[k].height != h)
      throw FormatError("slice " + std::to_string(k) + " is " + std::to_string(slices[k].width) + "x" +
                        std::to_string(slices[k].height) + ", expected " + std::to_string(w) + "x" +
                        std::to_string(h));
  }
  std::vector<T> values;
  values.reserve(static_cast<std::size_t>(w) * h * slices.size());
  for (const Image8& s : slices)
    for (const std::uint8_t px : s.data) values.push_back(static_cast<T>(px / 255.0));
  return BasicVolumeGrid<T>({w, h, static_cast<int>(slices.size())}, spacing, std::move(values), {0.0, 255.0});
}

template <std::floating_point T = double>
BasicVolumeGrid<T> load_slice_stack_files(std::span<const std::string> paths, Vec3 spacing = {1.0, 1.0, 1.0}) {
  std::vector<Image8> slices;
  slices.reserve(paths.size());
  for (std::size_t k = 0; k < paths.size(); ++k) {
    try {
      slices.push_back(decode_png(read_file_bytes(paths[k])));
    } catch (const FormatError& e) {
      throw FormatError("slice " + std::to_string(k) + " (" + paths[k] + "): " + e.what());
    }
  }
  return load_slice_stack<T>(slices, spacing);
}

// ---------------------------------------------------------------------------
// Synthetic phantoms. Geometry is given in voxel index units; a voxel belongs
// to a primitive when its grid point lies inside the primitive.

struct Sphere {
  Vec3 center;
  double radius = 1.0;
};

// Spherical shell between two radii. Listing several shells with shared
// centers builds onion-like nested layers.
struct Shell {
  Vec3 center;
  double inner_radius = 0.0;
  double outer_radius = 1.0;
};

struct Box {
  Vec3 min;
  Vec3 max;
};

// Axis-aligned rectangular base in the plane z = base_z, tapering linearly to
// the apex.
struct Pyramid {
  double base_min_x = 0, base_min_y = 0;
  double base_max_x = 1, base_max_y = 1;
  double base_z = 0;
  Vec3 apex;
};

using Shape = std::variant<Sphere, Shell, Box, Pyramid>;

struct Primitive {
  std::string name;
  Shape shape;
  double intensity = 1.0;
};

struct PhantomSpec {
  Index3 dims{64, 64, 64};
  Vec3 spacing{1.0, 1.0, 1.0};
  double background = 0.0;
  std::vector<Primitive> primitives;
};

// Binary voxel mask in the grid's x-fastest layout.
struct VoxelMask {
  Index3 dims;
  std::vector<std::uint8_t> bits;

  bool at(int i, int j, int k) const {
    return bits[static_cast<std::size_t>(i) + static_cast<std::size_t>(dims.i) *
                                                   (static_cast<std::size_t>(j) + static_cast<std::size_t>(dims.j) * k)] != 0;
  }
  std::size_t count() const { return static_cast<std::size_t>(std::count(bits.begin(), bits.end(), 1)); }
};

template <std::floating_point T = double>
struct Phantom {
  BasicVolumeGrid<T> grid;
  std::vector<VoxelMask> masks;
};

inline bool shape_contains(const Shape& shape, const Vec3& p) {
  return std::visit(
      [&](const auto& s) -> bool {
        using S = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<S, Sphere>) {
          const Vec3 d = p - s.center;
          return dot(d, d) <= s.radius * s.radius;
        } else if constexpr (std::is_same_v<S, Shell>) {
          const Vec3 d = p - s.center;
          const double r2 = dot(d, d);
          return r2 >= s.inner_radius * s.inner_radius && r2 <= s.outer_radius * s.outer_radius;
        } else if constexpr (std::is_same_v<S, Box>) {
          return p.x >= s.min.x && p.x <= s.max.x && p.y >= s.min.y && p.y <= s.max.y && p.z >= s.min.z &&
                 p.z <= s.max.z;
        } else {
          const double height = s.apex.z - s.base_z;
          const double t = (p.z - s.base_z) / height;
          if (!(t >= 0.0 && t <= 1.0)) return false;
          const double x0 = s.base_min_x + t * (s.apex.x - s.base_min_x);
          const double x1 = s.base_max_x + t * (s.apex.x - s.base_max_x);
          const double y0 = s.base_min_y + t * (s.apex.y - s.base_min_y);
          const double y1 = s.base_max_y + t * (s.apex.y - s.base_max_y);
          return p.x >= x0 && p.x <= x1 && p.y >= y0 && p.y <= y1;
        }
      },
      shape);
}

// Axis-aligned bounds of a shape, used to check it fits inside the grid.
inline Box shape_bounds(const Shape& shape) {
  return std::visit(
      [](const auto& s) -> Box {
        using S = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<S, Sphere>) {
          const Vec3 r{s.radius, s.radius, s.radius};
          return {s.center - r, s.center + r};
        } else if constexpr (std::is_same_v<S, Shell>) {
          const Vec3 r{s.outer_radius, s.outer_radius, s.outer_radius};
          return {s.center - r, s.center + r};
        } else if constexpr (std::is_same_v<S, Box>) {
          return s;
        } else {
          return {{std::min(s.base_min_x, s.apex.x), std::min(s.base_min_y, s.apex.y), std::min(s.base_z, s.apex.z)},
                  {std::max(s.base_max_x, s.apex.x), std::max(s.base_max_y, s.apex.y), std::max(s.base_z, s.apex.z)}};
        }
      },
      shape);
}

inline void validate(const PhantomSpec& spec) {
  if (spec.dims.i < 2 || spec.dims.j < 2 || spec.dims.k < 2)
    throw ValidationError("dims", "every axis needs at least 2 voxels");
  if (!(spec.background >= 0.0 && spec.background <= 1.0))
    throw ValidationError("background", "must lie in [0,1]");
  const Vec3 hi{spec.dims.i - 1.0, spec.dims.j - 1.0, spec.dims.k - 1.0};
  for (std::size_t m = 0; m < spec.primitives.size(); ++m) {
    const Primitive& p = spec.primitives[m];
    const std::string where = "primitives[" + std::to_string(m) + "]";
    if (!(p.intensity > 0.0 && p.intensity <= 1.0))
      throw ValidationError(where + ".intensity", "must lie in (0,1]");
    if (p.intensity == spec.background)
      throw ValidationError(where + ".intensity", "must differ from the background");
    for (std::size_t o = 0; o < m; ++o) {
      if (spec.primitives[o].intensity == p.intensity)
        throw ValidationError(where + ".intensity", "duplicates primitives[" + std::to_string(o) + "]");
    }
    const Box b = shape_bounds(p.shape);
    for (std::size_t a = 0; a < 3; ++a) {
      if (b.min[a] < 0.0 || b.max[a] > hi[a]) throw ValidationError(where, "does not fit inside dims");
    }
    if (const auto* s = std::get_if<Sphere>(&p.shape); s && !(s->radius > 0.0))
      throw ValidationError(where + ".radius", "must be positive");
    if (const auto* s = std::get_if<Shell>(&p.shape); s && !(s->outer_radius > s->inner_radius && s->inner_radius >= 0.0))
      throw ValidationError(where, "shell radii must satisfy 0 <= inner < outer");
    if (const auto* s = std::get_if<Pyramid>(&p.shape); s && s->apex.z == s->base_z)
      throw ValidationError(where + ".apex", "apex must not lie in the base plane");
  }
}

// Each voxel takes the intensity of the last listed primitive containing it,
// otherwise the background. Masks record exactly the voxels assigned to each
// primitive, so they are pairwise disjoint.
template <std::floating_point T = double>
Phantom<T> generate_phantom(const PhantomSpec& spec) {
  validate(spec);
  const Index3 d = spec.dims;
  const std::size_t n = static_cast<std::size_t>(d.i) * d.j * d.k;
  std::vector<T> values(n, static_cast<T>(spec.background));
  std::vector<int> owner(n, -1);
  for (int k = 0; k < d.k; ++k) {
    for (int j = 0; j < d.j; ++j) {
      for (int i = 0; i < d.i; ++i) {
        const Vec3 p{static_cast<double>(i), static_cast<double>(j), static_cast<double>(k)};
        const std::size_t idx = static_cast<std::size_t>(i) + static_cast<std::size_t>(d.i) * (j + static_cast<std::size_t>(d.j) * k);
        for (int m = static_cast<int>(spec.primitives.size()) - 1; m >= 0; --m) {
          if (shape_contains(spec.primitives[static_cast<std::size_t>(m)].shape, p)) {
            owner[idx] = m;
            values[idx] = static_cast<T>(spec.primitives[static_cast<std::size_t>(m)].intensity);
            break;
          }
        }
      }
    }
  }
  std::vector<VoxelMask> masks(spec.primitives.size(), VoxelMask{d, std::vector<std::uint8_t>(n, 0)});
  for (std::size_t idx = 0; idx < n; ++idx) {
    if (owner[idx] >= 0) masks[static_cast<std::size_t>(owner[idx])].bits[idx] = 1;
  }
  return {BasicVolumeGrid<T>(d, spec.spacing, std::move(values), {0.0, 1.0}), std::move(masks)};
}

// Phantom spec documents: either an object {dims, spacing_mm, background,
// primitives: [...]} or a bare array of primitives (64^3, background 0).
inline PhantomSpec parse_phantom_spec(const nlohmann::json& j) {
  PhantomSpec spec;
  const nlohmann::json* prims = &j;
  if (j.is_object()) {
    if (j.contains("dims")) spec.dims = detail::json_index3(j.at("dims"), "dims");
    if (j.contains("spacing_mm")) spec.spacing = detail::json_vec3(j.at("spacing_mm"), "spacing_mm");
    if (j.contains("background")) spec.background = j.at("background").get<double>();
    if (!j.contains("primitives")) throw ValidationError("primitives", "missing");
    prims = &j.at("primitives");
  }
  if (!prims->is_array()) throw ValidationError("primitives", "expected an array");
  for (std::size_t m = 0; m < prims->size(); ++m) {
    const auto& pj = (*prims)[m];
    const std::string where = "primitives[" + std::to_string(m) + "]";
    if (!pj.is_object() || !pj.contains("type") || !pj.contains("intensity"))
      throw ValidationError(where, "needs 'type' and 'intensity'");
    Primitive p;
    p.intensity = pj.at("intensity").get<double>();
    const std::string type = pj.at("type").get<std::string>();
    p.name = pj.value("name", type + std::to_string(m));
    auto need = [&](const char* key) -> const nlohmann::json& {
      if (!pj.contains(key)) throw ValidationError(where + "." + key, "missing");
      return pj.at(key);
    };
    if (type == "sphere") {
      p.shape = Sphere{detail::json_vec3(need("center"), where + ".center"), need("radius").get<double>()};
    } else if (type == "shell") {
      p.shape = Shell{detail::json_vec3(need("center"), where + ".center"), need("inner_radius").get<double>(),
                      need("outer_radius").get<double>()};
    } else if (type == "box") {
      p.shape = Box{detail::json_vec3(need("min"), where + ".min"), detail::json_vec3(need("max"), where + ".max")};
    } else if (type == "pyramid") {
      const auto& bmin = need("base_min");
      const auto& bmax = need("base_max");
      if (!bmin.is_array() || bmin.size() != 2 || !bmax.is_array() || bmax.size() != 2)
        throw ValidationError(where, "base_min/base_max must be [x, y]");
      Pyramid py;
      py.base_min_x = bmin[0].get<double>();
      py.base_min_y = bmin[1].get<double>();
      py.base_max_x = bmax[0].get<double>();
      py.base_max_y = bmax[1].get<double>();
      py.base_z = need("base_z").get<double>();
      py.apex = detail::json_vec3(need("apex"), where + ".apex");
      p.shape = py;
    } else {
      throw ValidationError(where + ".type", "unknown primitive '" + type + "'");
    }
    spec.primitives.push_back(std::move(p));
  }
  return spec;
}

inline PhantomSpec parse_phantom_spec_text(std::string_view text) {
  try {
    return parse_phantom_spec(detail::parse_json_text(text, "phantom spec"));
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError("phantom", e.what());
  }
}

// Two-object scene: a red sphere and a blue pyramid side by side.
inline PhantomSpec sphere_pyramid_phantom(int n = 64) {
  const double s = (n - 1) / 63.0;
  PhantomSpec spec;
  spec.dims = {n, n, n};
  spec.primitives.push_back({"sphere", Sphere{{44 * s, 32 * s, 32 * s}, 12 * s}, 0.8});
  Pyramid py;
  py.base_min_x = 6 * s;
  py.base_min_y = 20 * s;
  py.base_max_x = 28 * s;
  py.base_max_y = 44 * s;
  py.base_z = 18 * s;
  py.apex = {17 * s, 32 * s, 46 * s};
  spec.primitives.push_back({"pyramid", py, 0.4});
  return spec;
}

}  // namespace dvr
