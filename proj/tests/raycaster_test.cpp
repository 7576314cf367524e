// Copyright 2026 The dvr Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "dvr/io.hpp"
#include "dvr/raycaster.hpp"
#include "dvr/views.hpp"
#include "test_util.hpp"

namespace dvr {
namespace {

using testing::Rng;
using testing::uniform;

void expect_vec_near(const Vec3& a, const Vec3& b, double tol) {
  EXPECT_NEAR(a.x, b.x, tol);
  EXPECT_NEAR(a.y, b.y, tol);
  EXPECT_NEAR(a.z, b.z, tol);
}

TEST(Camera, RejectsDegenerateConfigurations) {
  EXPECT_THROW(Camera({0, 0, 0}, {0, 0, 0}, {0, 1, 0}, 45, 8, 8), ValidationError);
  EXPECT_THROW(Camera({0, 0, 0}, {0, 0, 1}, {0, 0, 2}, 45, 8, 8), ValidationError);
  EXPECT_THROW(Camera({0, 0, 0}, {0, 0, 1}, {0, 1, 0}, 0, 8, 8), ValidationError);
  EXPECT_THROW(Camera({0, 0, 0}, {0, 0, 1}, {0, 1, 0}, 180, 8, 8), ValidationError);
  EXPECT_THROW(Camera({0, 0, 0}, {0, 0, 1}, {0, 1, 0}, 45, 0, 8), ValidationError);
  EXPECT_THROW(Camera({0, 0, 0}, {0, 0, 1}, {0, 1, 0}, 45, 8, 8, Projection::orthographic, 0), ValidationError);
}

TEST(GenerateRay, CenterPixelIsPrincipalRay) {
  const Camera cam({1, 2, 3}, {4, -1, 7}, {0, 0, 1}, 40, 11, 9);
  const Ray r = generate_ray(cam, 5, 4);
  expect_vec_near(r.direction, normalize(Vec3{3, -3, 4}), 1e-9);
  EXPECT_EQ(r.origin, (Vec3{1, 2, 3}));
  EXPECT_THROW(generate_ray(cam, 11, 0), IndexError);
}

TEST(GenerateRay, CornersAreSymmetric) {
  const Camera cam({0, 0, -10}, {0, 0, 0}, {0, 1, 0}, 60, 16, 16);
  const Vec3 f = cam.forward();
  const Vec3 tl = generate_ray(cam, 0, 0).direction;
  const Vec3 tr = generate_ray(cam, 15, 0).direction;
  const Vec3 bl = generate_ray(cam, 0, 15).direction;
  const Vec3 br = generate_ray(cam, 15, 15).direction;
  EXPECT_NEAR(dot(tl, f), dot(br, f), 1e-12);
  EXPECT_NEAR(dot(tr, f), dot(bl, f), 1e-12);
  expect_vec_near(tl + br, 2 * dot(tl, f) * f, 1e-12);
  expect_vec_near(tr + bl, 2 * dot(tr, f) * f, 1e-12);
}

TEST(GenerateRay, NinetyDegreeFovMatchesTangents) {
  const int w = 64;
  const Camera cam({0, 0, 0}, {0, 0, 1}, {0, 1, 0}, 90, w, w);
  // Pixel centers sit half a pixel inside the +-45 degree frustum edge.
  const double edge = std::atan(1.0 - 1.0 / w);
  for (const int px : {0, w - 1}) {
    const Vec3 d = generate_ray(cam, px, w / 2).direction;
    const double horizontal = std::atan2(std::abs(dot(d, cam.right())), dot(d, cam.forward()));
    EXPECT_NEAR(horizontal, edge, 1e-9);
  }
  EXPECT_NEAR(std::atan(1.0), std::numbers::pi / 4, 1e-15);
}

TEST(GenerateRay, OrthographicRaysAreParallel) {
  const Camera cam({2, 2, -5}, {2, 2, 0}, {0, -1, 0}, 0, 5, 5, Projection::orthographic, 5);
  for (int y = 0; y < 5; ++y)
    for (int x = 0; x < 5; ++x) {
      const Ray r = generate_ray(cam, x, y);
      EXPECT_EQ(r.direction, (Vec3{0, 0, 1}));
      expect_vec_near(r.origin, Vec3{static_cast<double>(x), static_cast<double>(y), -5}, 1e-12);
    }
}

TEST(ClipToVolume, AxisAlignedAndParallelMiss) {
  const Vec3 box{4, 6, 8};
  Ray r{{-3, 3, 4}, {1, 0, 0}};
  const auto t = clip_to_volume(r, box);
  ASSERT_TRUE(t);
  EXPECT_DOUBLE_EQ(t->t_far - t->t_near, 4.0);
  EXPECT_DOUBLE_EQ(t->t_near, 3.0);

  Ray parallel{{-1, 7, 4}, {1, 0, 0}};
  EXPECT_FALSE(clip_to_volume(parallel, box));

  Ray behind{{10, 3, 4}, {1, 0, 0}};
  EXPECT_FALSE(clip_to_volume(behind, box));

  Ray inside{{1, 1, 1}, {0, 0, 1}};
  const auto ti = clip_to_volume(inside, box);
  ASSERT_TRUE(ti);
  EXPECT_EQ(ti->t_near, 0.0);
  EXPECT_DOUBLE_EQ(ti->t_far, 7.0);
}

bool inside_box(const Vec3& p, const Vec3& box) {
  return p.x >= 0 && p.y >= 0 && p.z >= 0 && p.x <= box.x && p.y <= box.y && p.z <= box.z;
}

// Finds the boundary between an inside and an outside parameter by bisection.
double bisect(const Ray& r, const Vec3& box, double t_in, double t_out) {
  for (int i = 0; i < 200; ++i) {
    const double mid = 0.5 * (t_in + t_out);
    if (inside_box(r.origin + r.direction * mid, box))
      t_in = mid;
    else
      t_out = mid;
  }
  return 0.5 * (t_in + t_out);
}

TEST(ClipToVolume, AgreesWithBisectionMarcher) {
  Rng rng(97);
  const Vec3 box{5, 3, 7};
  for (int n = 0; n < 1000; ++n) {
    // Aim from a random origin (possibly inside) at a random interior point.
    const Vec3 origin{uniform(rng, -6, 11), uniform(rng, -6, 9), uniform(rng, -6, 13)};
    const Vec3 aim = testing::random_point_in(rng, box);
    Ray r{origin, normalize(aim - origin)};
    const auto t = clip_to_volume(r, box);
    ASSERT_TRUE(t);
    const double t_aim = length(aim - origin);
    const double t_entry = inside_box(origin, box) ? 0.0 : bisect(r, box, t_aim, 0.0);
    const double t_exit = bisect(r, box, t_aim, t_aim + 100.0);
    EXPECT_NEAR(t->t_near, t_entry, 1e-6);
    EXPECT_NEAR(t->t_far, t_exit, 1e-6);
    for (const double tt : {t->t_near, t->t_far}) {
      const Vec3 p = r.origin + r.direction * tt;
      for (std::size_t a = 0; a < 3; ++a) {
        EXPECT_GE(p[a], -1e-9);
        EXPECT_LE(p[a], box[a] + 1e-9);
      }
    }
    // Pointing the same ray away from the box (from outside) never hits.
    if (!inside_box(origin, box)) {
      Ray away{origin, -r.direction};
      EXPECT_FALSE(clip_to_volume(away, box));
    }
  }
}

TEST(CompositeStep, OpaqueFirstHitAndTransparentSample) {
  const Rgb g{0.2, 0.5, 0.9};
  const CompositeState s = composite_step({}, g, 1.0);
  EXPECT_EQ(s.color, g);
  EXPECT_EQ(s.alpha, 1.0);

  const CompositeState mid{{0.1, 0.2, 0.3}, 0.4};
  const CompositeState same = composite_step(mid, {1, 1, 1}, 0.0);
  EXPECT_EQ(same.color, mid.color);
  EXPECT_EQ(same.alpha, mid.alpha);
}

TEST(CompositeStep, SaturatedStateIsIdentity) {
  Rng rng(101);
  const CompositeState full{{0.3, 0.6, 0.1}, 1.0};
  for (int i = 0; i < 100; ++i) {
    const CompositeState out = composite_step(full, {uniform(rng), uniform(rng), uniform(rng)}, uniform(rng));
    EXPECT_EQ(out.color, full.color);
    EXPECT_EQ(out.alpha, 1.0);
  }
}

TEST(CompositeStep, SequenceMatchesClosedFormAndAlphaIsMonotone) {
  Rng rng(103);
  for (int trial = 0; trial < 200; ++trial) {
    const int k = testing::uniform_int(rng, 1, 40);
    std::vector<Rgb> g(k);
    std::vector<double> a(k);
    for (int i = 0; i < k; ++i) {
      g[i] = {uniform(rng), uniform(rng), uniform(rng)};
      a[i] = uniform(rng);
    }
    CompositeState s;
    for (int i = 0; i < k; ++i) {
      const double before = s.alpha;
      s = composite_step(s, g[i], a[i]);
      EXPECT_GE(s.alpha, before);
      EXPECT_LE(s.alpha, 1.0);
    }
    // Closed form with sample 0 nearest the eye.
    Rgb expect;
    double transmit_all = 1.0;
    for (int i = 0; i < k; ++i) {
      double transmit = 1.0;
      for (int j = 0; j < i; ++j) transmit *= 1.0 - a[j];
      expect += g[i] * (a[i] * transmit);
      transmit_all *= 1.0 - a[i];
    }
    expect_vec_near(s.color, expect, 1e-12);
    EXPECT_NEAR(s.alpha, 1.0 - transmit_all, 1e-12);
  }
}

TEST(CompositeStep, OrderMatters) {
  const Rgb red{1, 0, 0}, blue{0, 0, 1};
  const CompositeState ab = composite_step(composite_step({}, red, 0.5), blue, 0.5);
  const CompositeState ba = composite_step(composite_step({}, blue, 0.5), red, 0.5);
  EXPECT_NE(ab.color, ba.color);
  EXPECT_EQ(ab.alpha, ba.alpha);
}

struct SmallScene {
  VolumeGrid grid;
  TransferFunction tf;
  ShadingConfig shading;
  SamplingConfig sampling;
  SceneView<double> view() const { return {grid, tf, shading, sampling}; }
};

TEST(IntegrateRay, ZeroOpacityGivesBackground) {
  Rng rng(107);
  SmallScene s{testing::random_grid(rng, {8, 8, 8}), TransferFunction({{0, {1, 0, 0, 0}}, {1, {0, 1, 0, 0}}}), {}, {}};
  s.sampling.background = {0.2, 0.3, 0.4};
  const Camera cam = free_camera(s.grid, 16, 16);
  const FrameImage img = render(s.grid, s.tf, s.shading, s.sampling, cam, {1});
  for (const Rgba& p : img.pixels) EXPECT_EQ(p, (Rgba{0.2, 0.3, 0.4, 0.0}));
}

TEST(IntegrateRay, MissReturnsBackground) {
  Rng rng(109);
  SmallScene s{testing::random_grid(rng, {4, 4, 4}), TransferFunction::ramp(), {}, {}};
  s.sampling.background = {0.5, 0.5, 0.5};
  const Ray away{{-1, -1, -1}, normalize(Vec3{-1, 0, 0})};
  EXPECT_EQ(integrate_ray_front_to_back(away, s.view()), (Rgba{0.5, 0.5, 0.5, 0}));
  EXPECT_EQ(integrate_ray_reference(away, s.view()), (Rgba{0.5, 0.5, 0.5, 0}));
}

TEST(IntegrateRay, OpaqueFirstSampleDeterminesPixel) {
  Rng rng(113);
  SmallScene s{testing::random_grid(rng, {6, 6, 6}), TransferFunction({{0, {0.3, 0.6, 0.9, 1}}, {1, {0.9, 0.1, 0.4, 1}}}),
               {}, {}};
  s.sampling.background = {1, 1, 1};
  for (int n = 0; n < 50; ++n) {
    const Vec3 origin{-2, uniform(rng, 0.5, 4.5), uniform(rng, 0.5, 4.5)};
    const Ray r{origin, normalize(Vec3{1, uniform(rng, -0.1, 0.1), uniform(rng, -0.1, 0.1)})};
    const auto span = clip_to_volume(r, s.grid.extent());
    ASSERT_TRUE(span);
    const Vec3 first = r.origin + r.direction * span->t_near;
    const ShadedSample expect = detail::shade_sample(s.view(), detail::clamp_to_box(first, s.grid.extent()), r.direction);
    const Rgba got = integrate_ray_front_to_back(r, s.view());
    EXPECT_EQ(got.a, 1.0);
    EXPECT_EQ(got.rgb(), expect.color);
  }
}

TEST(IntegrateRay, FrontToBackMatchesReferenceWithoutTermination) {
  Rng rng(127);
  for (int trial = 0; trial < 5; ++trial) {
    SmallScene s{testing::random_grid(rng, {12, 12, 12}), testing::random_tf(rng), {}, {}};
    s.sampling.early_termination_alpha = 1.0;
    s.sampling.background = {uniform(rng), uniform(rng), uniform(rng)};
    s.shading.model = trial % 3 == 0 ? ShadingModel::phong : (trial % 3 == 1 ? ShadingModel::cel : ShadingModel::none);
    s.shading.validate();
    for (int n = 0; n < 300; ++n) {
      const Vec3 aim = testing::random_point_in(rng, s.grid.extent());
      const Vec3 origin = aim + testing::random_unit(rng) * 30.0;
      const Ray r{origin, normalize(aim - origin)};
      const Rgba a = integrate_ray_front_to_back(r, s.view());
      const Rgba b = integrate_ray_reference(r, s.view());
      EXPECT_NEAR(a.r, b.r, 1e-9);
      EXPECT_NEAR(a.g, b.g, 1e-9);
      EXPECT_NEAR(a.b, b.b, 1e-9);
      EXPECT_NEAR(a.a, b.a, 1e-9);
    }
  }
}

TEST(IntegrateRay, SingleSampleExpansion) {
  // One sample: I = I0 (1 - a) + g a.
  const VolumeGrid grid({2, 2, 2}, {1, 1, 1}, std::vector<double>(8, 0.5));
  const TransferFunction tf({{0, {0.2, 0.4, 0.8, 0.25}}, {1, {0.2, 0.4, 0.8, 0.25}}});
  ShadingConfig shading;
  shading.model = ShadingModel::none;
  SamplingConfig sampling;
  sampling.step = 10.0;
  sampling.background = {1, 0, 0};
  const SceneView<double> view{grid, tf, shading, sampling};
  const Ray r{{0.5, 0.5, -1}, {0, 0, 1}};
  const Rgba expect{1 * 0.75 + 0.2 * 0.25, 0.4 * 0.25, 0.8 * 0.25, 0.25};
  for (const Rgba got : {integrate_ray_front_to_back(r, view), integrate_ray_reference(r, view)}) {
    EXPECT_NEAR(got.r, expect.r, 1e-15);
    EXPECT_NEAR(got.g, expect.g, 1e-15);
    EXPECT_NEAR(got.b, expect.b, 1e-15);
    EXPECT_NEAR(got.a, expect.a, 1e-15);
  }
}

TEST(IntegrateRay, EarlyTerminationIsBounded) {
  Rng rng(131);
  const Phantom<double> ph = generate_phantom(sphere_pyramid_phantom(32));
  const TransferFunction tf({{0, {0, 0, 0, 0}}, {0.3, {0.2, 0.4, 1, 0.3}}, {0.8, {1, 0.3, 0.2, 0.8}}, {1, {1, 1, 1, 1}}});
  SamplingConfig full, early;
  full.early_termination_alpha = 1.0;
  early.early_termination_alpha = 0.99;
  full.background = early.background = {0.3, 0.3, 0.3};
  const Camera cam = free_camera(ph.grid, 48, 48);
  RenderStats st_full, st_early;
  const FrameImage a = render(ph.grid, tf, ShadingConfig{}, full, cam, {1}, &st_full);
  const FrameImage b = render(ph.grid, tf, ShadingConfig{}, early, cam, {1}, &st_early);
  double worst = 0;
  for (std::size_t i = 0; i < a.pixels.size(); ++i) {
    worst = std::max({worst, std::abs(a.pixels[i].r - b.pixels[i].r), std::abs(a.pixels[i].g - b.pixels[i].g),
                      std::abs(a.pixels[i].b - b.pixels[i].b)});
  }
  EXPECT_LE(worst, 0.01);
  EXPECT_GT(st_early.early_terminations, 0u);
  EXPECT_LT(st_early.samples, st_full.samples);
  EXPECT_EQ(st_early.rays_cast, 48u * 48u);
}

TEST(Render, DeterministicAcrossThreadsAndTiles) {
  const Phantom<double> ph = generate_phantom(sphere_pyramid_phantom(24));
  const TransferFunction tf({{0, {0, 0, 0, 0}}, {0.4, {0, 0, 1, 0.4}}, {0.8, {1, 0, 0, 0.9}}, {1, {1, 1, 1, 1}}});
  const Camera cam = free_camera(ph.grid, 37, 29);
  RenderStats s1, s4;
  const FrameImage one = render(ph.grid, tf, ShadingConfig{}, SamplingConfig{}, cam, {1, 3}, &s1);
  const FrameImage many = render(ph.grid, tf, ShadingConfig{}, SamplingConfig{}, cam, {4, 1}, &s4);
  EXPECT_EQ(one, many);
  EXPECT_EQ(s1, s4);
  EXPECT_EQ(render(ph.grid, tf, ShadingConfig{}, SamplingConfig{}, cam, {3, 64}), one);
}

TEST(Render, ValidatesConfigBeforeWork) {
  const VolumeGrid grid({2, 2, 2}, {1, 1, 1}, std::vector<double>(8, 0.5));
  SamplingConfig bad;
  bad.step = -1.0;
  const Camera cam = free_camera(grid, 4, 4);
  EXPECT_THROW(render(grid, TransferFunction::ramp(), ShadingConfig{}, bad, cam), ValidationError);
  ShadingConfig bad_shading;
  bad_shading.shininess = -2;
  EXPECT_THROW(render(grid, TransferFunction::ramp(), bad_shading, SamplingConfig{}, cam), ValidationError);
}

TEST(SamplingConfig, DefaultStepIsHalfSmallestSpacing) {
  const VolumeGrid grid({2, 2, 2}, {0.8, 0.5, 1.2}, std::vector<double>(8, 0.5));
  EXPECT_DOUBLE_EQ(SamplingConfig{}.resolved_step(grid), 0.25);
  SamplingConfig s;
  s.early_termination_alpha = 0.0;
  EXPECT_THROW(s.validate(), ValidationError);
}

}  // namespace
}  // namespace dvr
