// Copyright 2026 The dvr Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <concepts>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <numbers>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "dvr/common.hpp"
#include "dvr/shading.hpp"
#include "dvr/transfer_function.hpp"
#include "dvr/volume.hpp"

namespace dvr {

enum class Projection { perspective, orthographic };

// Pinhole (or orthographic) camera. The basis is built once at construction;
// a degenerate configuration is rejected here rather than per ray.
class Camera {
 public:
  Camera(Vec3 eye, Vec3 target, Vec3 up, double vertical_fov_deg, int width, int height,
         Projection projection = Projection::perspective, double ortho_height = 0.0)
      : eye_(eye),
        target_(target),
        up_(up),
        fov_(vertical_fov_deg),
        width_(width),
        height_(height),
        projection_(projection),
        ortho_height_(ortho_height) {
    if (!is_finite(eye) || !is_finite(target) || !is_finite(up))
      throw ValidationError("camera", "eye, target and up must be finite");
    if (width <= 0 || height <= 0) throw ValidationError("camera.width", "image size must be positive");
    const Vec3 view = target - eye;
    if (length(view) == 0.0) throw ValidationError("camera.target", "eye and target coincide");
    forward_ = normalize(view);
    const Vec3 r = cross(forward_, normalize(up));
    if (length(r) < 1e-9) throw ValidationError("camera.up", "up is parallel to the view direction");
    right_ = normalize(r);
    true_up_ = cross(right_, forward_);
    if (projection_ == Projection::perspective) {
      if (!(fov_ > 0.0 && fov_ < 180.0)) throw ValidationError("camera.fov", "must lie in (0,180) degrees");
      half_height_ = std::tan(fov_ * std::numbers::pi / 360.0);
    } else {
      if (!(ortho_height_ > 0.0) || !std::isfinite(ortho_height_))
        throw ValidationError("camera.ortho_height", "must be positive");
      half_height_ = ortho_height_ / 2;
    }
    half_width_ = half_height_ * static_cast<double>(width_) / static_cast<double>(height_);
  }

  const Vec3& eye() const noexcept { return eye_; }
  const Vec3& target() const noexcept { return target_; }
  const Vec3& up() const noexcept { return up_; }
  double vertical_fov() const noexcept { return fov_; }
  int width() const noexcept { return width_; }
  int height() const noexcept { return height_; }
  Projection projection() const noexcept { return projection_; }
  double ortho_height() const noexcept { return ortho_height_; }

  const Vec3& forward() const noexcept { return forward_; }
  const Vec3& right() const noexcept { return right_; }
  const Vec3& true_up() const noexcept { return true_up_; }

  // Image-plane offsets of a pixel center: +x right, +y up, in units of the
  // tangent (perspective) or millimeters (orthographic).
  double plane_x(int px) const noexcept { return (2.0 * (px + 0.5) / width_ - 1.0) * half_width_; }
  double plane_y(int py) const noexcept { return (1.0 - 2.0 * (py + 0.5) / height_) * half_height_; }

  Camera resized(int width, int height) const {
    return Camera(eye_, target_, up_, fov_, width, height, projection_, ortho_height_);
  }

  friend bool operator==(const Camera& a, const Camera& b) {
    return a.eye_ == b.eye_ && a.target_ == b.target_ && a.up_ == b.up_ && a.fov_ == b.fov_ &&
           a.width_ == b.width_ && a.height_ == b.height_ && a.projection_ == b.projection_ &&
           a.ortho_height_ == b.ortho_height_;
  }

 private:
  Vec3 eye_, target_, up_;
  double fov_;
  int width_, height_;
  Projection projection_;
  double ortho_height_;
  Vec3 forward_, right_, true_up_;
  double half_width_ = 0.0;
  double half_height_ = 0.0;
};

struct Ray {
  Vec3 origin;
  Vec3 direction;
  double t_near = 0.0;
  double t_far = std::numeric_limits<double>::infinity();
};

struct TInterval {
  double t_near;
  double t_far;
};

// Fixed-step marching parameters. An empty step resolves to half the smallest
// spacing component of the volume being rendered.
struct SamplingConfig {
  std::optional<double> step;
  double early_termination_alpha = 0.99;
  Rgb background{0.0, 0.0, 0.0};

  void validate() const {
    if (step && (!(*step > 0.0) || !std::isfinite(*step))) throw ValidationError("step", "must be positive");
    if (!(early_termination_alpha > 0.0 && early_termination_alpha <= 1.0))
      throw ValidationError("early_termination_alpha", "must lie in (0,1]");
    for (std::size_t c = 0; c < 3; ++c) {
      if (!(background[c] >= 0.0 && background[c] <= 1.0))
        throw ValidationError("background", "channels must lie in [0,1]");
    }
  }

  template <std::floating_point T>
  double resolved_step(const BasicVolumeGrid<T>& grid) const {
    if (step) return *step;
    const Vec3& s = grid.spacing();
    return 0.5 * std::min({s.x, s.y, s.z});
  }

  friend bool operator==(const SamplingConfig&, const SamplingConfig&) = default;
};

// Running front-to-back accumulator. `color` is opacity-weighted.
struct CompositeState {
  Rgb color;
  double alpha = 0.0;
};

// Float RGBA image, row-major with the origin at the top-left.
struct FrameImage {
  int width = 0;
  int height = 0;
  std::vector<Rgba> pixels;

  FrameImage() = default;
  FrameImage(int w, int h, Rgba fill = {}) : width(w), height(h), pixels(static_cast<std::size_t>(w) * h, fill) {}

  Rgba& at(int x, int y) { return pixels[static_cast<std::size_t>(y) * width + x]; }
  const Rgba& at(int x, int y) const { return pixels[static_cast<std::size_t>(y) * width + x]; }

  friend bool operator==(const FrameImage&, const FrameImage&) = default;
};

struct RenderStats {
  std::uint64_t rays_cast = 0;
  std::uint64_t rays_hit = 0;
  std::uint64_t samples = 0;
  std::uint64_t early_terminations = 0;

  RenderStats& operator+=(const RenderStats& o) {
    rays_cast += o.rays_cast;
    rays_hit += o.rays_hit;
    samples += o.samples;
    early_terminations += o.early_terminations;
    return *this;
  }
  friend bool operator==(const RenderStats&, const RenderStats&) = default;
};

inline Ray generate_ray(const Camera& cam, int px, int py) {
  if (px < 0 || py < 0 || px >= cam.width() || py >= cam.height())
    throw IndexError("pixel (" + std::to_string(px) + "," + std::to_string(py) + ") outside image");
  const double x = cam.plane_x(px);
  const double y = cam.plane_y(py);
  Ray ray;
  if (cam.projection() == Projection::perspective) {
    ray.origin = cam.eye();
    ray.direction = normalize(cam.forward() + x * cam.right() + y * cam.true_up());
  } else {
    ray.origin = cam.eye() + x * cam.right() + y * cam.true_up();
    ray.direction = cam.forward();
  }
  return ray;
}

// Slab intersection with the box [0, extent]. Only t >= 0 counts as a hit.
inline std::optional<TInterval> clip_to_volume(const Ray& ray, const Vec3& extent) {
  double t0 = 0.0;
  double t1 = std::numeric_limits<double>::infinity();
  for (std::size_t a = 0; a < 3; ++a) {
    const double o = ray.origin[a];
    const double d = ray.direction[a];
    if (d == 0.0) {
      if (o < 0.0 || o > extent[a]) return std::nullopt;
      continue;
    }
    double ta = (0.0 - o) / d;
    double tb = (extent[a] - o) / d;
    if (ta > tb) std::swap(ta, tb);
    t0 = std::max(t0, ta);
    t1 = std::min(t1, tb);
    if (t0 > t1) return std::nullopt;
  }
  return TInterval{t0, t1};
}

inline CompositeState composite_step(const CompositeState& in, const Rgb& g, double alpha) {
  const double transmit = 1.0 - in.alpha;
  CompositeState out;
  out.color = in.color + g * (alpha * transmit);
  out.alpha = in.alpha + alpha * transmit;
  return out;
}

// Everything needed to turn a scalar sample into (shaded color, opacity).
template <std::floating_point T>
struct SceneView {
  const BasicVolumeGrid<T>& grid;
  const TransferFunction& tf;
  const ShadingConfig& shading;
  const SamplingConfig& sampling;
};

struct ShadedSample {
  Rgb color;
  double alpha;
};

namespace detail {

inline Vec3 clamp_to_box(const Vec3& p, const Vec3& extent) {
  return {std::clamp(p.x, 0.0, extent.x), std::clamp(p.y, 0.0, extent.y), std::clamp(p.z, 0.0, extent.z)};
}

// Gradients smaller than this are treated as undefined normals.
inline constexpr double kMinGradient = 1e-12;

template <std::floating_point T>
ShadedSample shade_sample(const SceneView<T>& scene, const Vec3& p, const Vec3& dir) {
  const double s = sample_clamped(scene.grid, p);
  const Rgba rgba = scene.tf.evaluate(s);
  ShadedSample out{rgba.rgb(), rgba.a};
  if (rgba.a <= 0.0 || scene.shading.model == ShadingModel::none) return out;

  const Vec3 grad = gradient_clamped(scene.grid, p);
  const double mag = length(grad);
  ShadingInputs in;
  in.base_color = rgba.rgb();
  in.normal = mag > kMinGradient ? grad * (-1.0 / mag) : Vec3{};
  in.view = -dir;
  in.light = scene.shading.light_dir ? *scene.shading.light_dir : in.view;
  out.color = shade(in, scene.shading);
  return out;
}

template <std::floating_point T>
int sample_count(const SceneView<T>& scene, const TInterval& span) {
  const double step = scene.sampling.resolved_step(scene.grid);
  return static_cast<int>(std::ceil((span.t_far - span.t_near) / step));
}

}  // namespace detail

// Marches [t_near, t_far) at a fixed step, compositing shaded samples front
// to back. Stops once accumulated alpha reaches the termination threshold.
// The background is blended in after the loop.
template <std::floating_point T>
Rgba integrate_ray_front_to_back(const Ray& ray, const SceneView<T>& scene, RenderStats* stats = nullptr) {
  const Rgb& bg = scene.sampling.background;
  const Vec3 extent = scene.grid.extent();
  const auto span = clip_to_volume(ray, extent);
  if (stats) ++stats->rays_cast;
  if (!span) return {bg.x, bg.y, bg.z, 0.0};
  if (stats) ++stats->rays_hit;

  const double step = scene.sampling.resolved_step(scene.grid);
  const int n = detail::sample_count(scene, *span);
  CompositeState state;
  for (int i = 0; i < n; ++i) {
    const Vec3 p = detail::clamp_to_box(ray.origin + ray.direction * (span->t_near + i * step), extent);
    const ShadedSample smp = detail::shade_sample(scene, p, ray.direction);
    if (stats) ++stats->samples;
    if (smp.alpha > 0.0) state = composite_step(state, smp.color, smp.alpha);
    if (state.alpha >= scene.sampling.early_termination_alpha) {
      if (stats && i + 1 < n) ++stats->early_terminations;
      break;
    }
  }
  const Rgb c = state.color + bg * (1.0 - state.alpha);
  return {c.x, c.y, c.z, state.alpha};
}

// Closed-form discrete rendering equation over all samples of the ray,
// without recursion or early termination:
//
//   I = I0 * prod_{i=1..n} (1 - a_i) + sum_{i=1..n} g_i * prod_{j=i+1..n} (1 - a_j)
//
// Samples are indexed back to front (i = n is nearest the eye) and
// g_i = shaded_color_i * a_i.
template <std::floating_point T>
Rgba integrate_ray_reference(const Ray& ray, const SceneView<T>& scene) {
  const Rgb& bg = scene.sampling.background;
  const Vec3 extent = scene.grid.extent();
  const auto span = clip_to_volume(ray, extent);
  if (!span) return {bg.x, bg.y, bg.z, 0.0};

  const double step = scene.sampling.resolved_step(scene.grid);
  const int n = detail::sample_count(scene, *span);
  std::vector<ShadedSample> front_to_back;
  front_to_back.reserve(static_cast<std::size_t>(std::max(n, 0)));
  for (int m = 0; m < n; ++m) {
    const Vec3 p = detail::clamp_to_box(ray.origin + ray.direction * (span->t_near + m * step), extent);
    front_to_back.push_back(detail::shade_sample(scene, p, ray.direction));
  }
  // 1-based, back to front.
  auto sample = [&](int i) -> const ShadedSample& { return front_to_back[static_cast<std::size_t>(n - i)]; };

  double background_weight = 1.0;
  for (int i = 1; i <= n; ++i) background_weight *= 1.0 - sample(i).alpha;

  Rgb emitted;
  for (int i = 1; i <= n; ++i) {
    double transmit = 1.0;
    for (int j = i + 1; j <= n; ++j) transmit *= 1.0 - sample(j).alpha;
    emitted += sample(i).color * (sample(i).alpha * transmit);
  }
  const Rgb c = bg * background_weight + emitted;
  return {c.x, c.y, c.z, 1.0 - background_weight};
}

struct RenderOptions {
  // 0 selects std::thread::hardware_concurrency().
  unsigned threads = 0;
  // Side of the square pixel tiles handed to threads.
  int tile_size = 16;
};

// Renders every pixel with integrate_ray_front_to_back. Work is split into
// disjoint square tiles pulled from a shared counter; each pixel depends only
// on its own ray, so output is bit-identical for any thread count.
template <std::floating_point T>
FrameImage render(const BasicVolumeGrid<T>& grid, const TransferFunction& tf, ShadingConfig shading,
                  const SamplingConfig& sampling, const Camera& camera, RenderOptions options = {},
                  RenderStats* stats_out = nullptr) {
  shading.validate();
  sampling.validate();

  const SceneView<T> scene{grid, tf, shading, sampling};
  FrameImage image(camera.width(), camera.height());
  const int tile = std::max(options.tile_size, 1);
  const int tiles_x = (camera.width() + tile - 1) / tile;
  const int tiles = tiles_x * ((camera.height() + tile - 1) / tile);
  std::vector<RenderStats> tile_stats(static_cast<std::size_t>(tiles));
  std::atomic<int> next{0};

  auto worker = [&] {
    for (int t = next.fetch_add(1); t < tiles; t = next.fetch_add(1)) {
      RenderStats& st = tile_stats[static_cast<std::size_t>(t)];
      const int x0 = (t % tiles_x) * tile;
      const int y0 = (t / tiles_x) * tile;
      const int x1 = std::min(camera.width(), x0 + tile);
      const int y1 = std::min(camera.height(), y0 + tile);
      for (int y = y0; y < y1; ++y) {
        for (int x = x0; x < x1; ++x) {
          image.at(x, y) = integrate_ray_front_to_back(generate_ray(camera, x, y), scene, &st);
        }
      }
    }
  };

  unsigned threads = options.threads ? options.threads : std::max(1u, std::thread::hardware_concurrency());
  threads = std::min<unsigned>(threads, static_cast<unsigned>(std::max(tiles, 1)));
  if (threads <= 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    pool.reserve(threads);
    for (unsigned t = 0; t < threads; ++t) pool.emplace_back(worker);
  }

  if (stats_out) {
    RenderStats total;
    for (const RenderStats& s : tile_stats) total += s;
    *stats_out = total;
  }
  return image;
}

}  // namespace dvr
