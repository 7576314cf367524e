// Copyright 2026 The dvr Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <array>
#include <cmath>

#include "dvr/volume.hpp"
#include "test_util.hpp"

namespace dvr {
namespace {

using testing::Rng;
using testing::uniform;

// Independent trilinear oracle: weighted sum over the 8 corners.
double eight_corner_oracle(const VolumeGrid& g, Index3 base, Vec3 f) {
  double sum = 0.0;
  for (int dz = 0; dz <= 1; ++dz)
    for (int dy = 0; dy <= 1; ++dy)
      for (int dx = 0; dx <= 1; ++dx) {
        const double w = (dx ? f.x : 1 - f.x) * (dy ? f.y : 1 - f.y) * (dz ? f.z : 1 - f.z);
        sum += w * g(base.i + dx, base.j + dy, base.k + dz);
      }
  return sum;
}

TEST(VolumeGrid, RejectsInvalidConstruction) {
  EXPECT_THROW(VolumeGrid({1, 2, 2}, {1, 1, 1}, std::vector<double>(4, 0.0)), ValidationError);
  EXPECT_THROW(VolumeGrid({2, 2, 2}, {1, 0, 1}, std::vector<double>(8, 0.0)), ValidationError);
  EXPECT_THROW(VolumeGrid({2, 2, 2}, {1, 1, 1}, std::vector<double>(7, 0.0)), ValidationError);
  EXPECT_THROW(VolumeGrid({2, 2, 2}, {1, 1, 1}, std::vector<double>(8, 1.5)), ValidationError);
}

TEST(ValueAt, ConstantAndDirectRead) {
  const VolumeGrid c({2, 2, 2}, {1, 1, 1}, std::vector<double>(8, 0.5));
  EXPECT_EQ(value_at(c, {1, 1, 1}), 0.5);

  std::vector<double> v(8, 0.3);
  v[0] = 0.0;
  const VolumeGrid g({2, 2, 2}, {1, 1, 1}, v);
  EXPECT_EQ(value_at(g, {0, 0, 0}), 0.0);
}

TEST(ValueAt, MatchesTripleLoopOracle) {
  Rng rng(11);
  const VolumeGrid g = testing::random_grid(rng, {4, 4, 4});
  // Walk the flat array in storage order and rebuild the 3D index by counting.
  std::array<std::array<std::array<double, 4>, 4>, 4> cube{};
  std::size_t flat = 0;
  for (int k = 0; k < 4; ++k)
    for (int j = 0; j < 4; ++j)
      for (int i = 0; i < 4; ++i) cube[k][j][i] = g.values()[flat++];
  for (int k = 0; k < 4; ++k)
    for (int j = 0; j < 4; ++j)
      for (int i = 0; i < 4; ++i) EXPECT_EQ(value_at(g, {i, j, k}), cube[k][j][i]);
}

TEST(ValueAt, OutOfRangeThrows) {
  const VolumeGrid g({2, 3, 4}, {1, 1, 1}, std::vector<double>(24, 0.0));
  EXPECT_THROW(value_at(g, {2, 0, 0}), IndexError);
  EXPECT_THROW(value_at(g, {0, -1, 0}), IndexError);
  EXPECT_THROW(value_at(g, {0, 0, 4}), IndexError);
}

TEST(LocateCell, OnGridAndCellCenter) {
  const Vec3 s{0.5, 2.0, 1.25};
  const VolumeGrid g({5, 5, 5}, s, std::vector<double>(125, 0.0));
  const auto c = locate_cell(g, {2 * s.x, 3 * s.y, 1 * s.z});
  ASSERT_TRUE(c);
  EXPECT_EQ(c->base, (Index3{2, 3, 1}));
  EXPECT_EQ(c->frac, (Vec3{0, 0, 0}));

  const auto m = locate_cell(g, {0.5 * s.x, 0.5 * s.y, 0.5 * s.z});
  ASSERT_TRUE(m);
  EXPECT_EQ(m->base, (Index3{0, 0, 0}));
  EXPECT_DOUBLE_EQ(m->frac.x, 0.5);
  EXPECT_DOUBLE_EQ(m->frac.y, 0.5);
  EXPECT_DOUBLE_EQ(m->frac.z, 0.5);
}

TEST(LocateCell, RoundTripsRandomPoints) {
  Rng rng(7);
  const Vec3 s{0.7, 1.3, 2.1};
  const VolumeGrid g({9, 6, 5}, s, std::vector<double>(270, 0.0));
  for (int n = 0; n < 100; ++n) {
    const Vec3 p = testing::random_point_in(rng, g.extent());
    const auto c = locate_cell(g, p);
    ASSERT_TRUE(c);
    for (std::size_t a = 0; a < 3; ++a) {
      EXPECT_GE(c->frac[a], 0.0);
      EXPECT_LT(c->frac[a], 1.0);
      const double back = c->base[a] * s[a] + c->frac[a] * s[a];
      EXPECT_NEAR(back, p[a], 1e-12 * std::max(1.0, std::abs(p[a])));
    }
  }
}

TEST(LocateCell, OutsideAndUpperFace) {
  const VolumeGrid g({4, 4, 4}, {1, 1, 1}, std::vector<double>(64, 0.0));
  EXPECT_FALSE(locate_cell(g, {-0.01, 1, 1}));
  EXPECT_FALSE(locate_cell(g, {1, 3.01, 1}));
  EXPECT_FALSE(locate_cell(g, {1, 1, NAN}));
  const auto top = locate_cell(g, {3, 3, 3});
  ASSERT_TRUE(top);
  EXPECT_EQ(top->base, (Index3{2, 2, 2}));
  EXPECT_LT(top->frac.x, 1.0);
  EXPECT_GT(top->frac.x, 1.0 - 1e-15);
  EXPECT_FALSE(trilinear_sample(g, {4, 1, 1}));
}

TEST(Trilinear, ConstantCellAndCornerIdentity) {
  const VolumeGrid c({2, 2, 2}, {1, 1, 1}, std::vector<double>(8, 0.37));
  EXPECT_NEAR(*trilinear_sample(c, {0.3, 0.9, 0.1}), 0.37, 1e-15);

  Rng rng(3);
  const VolumeGrid g = testing::random_grid(rng, {2, 2, 2});
  EXPECT_EQ(*trilinear_sample(g, {0, 0, 0}), value_at(g, {0, 0, 0}));
}

TEST(Trilinear, MatchesEightCornerOracleAtFixedFraction) {
  Rng rng(5);
  const VolumeGrid g = testing::random_grid(rng, {2, 2, 2});
  const Vec3 f{0.25, 0.5, 0.75};
  EXPECT_NEAR(*trilinear_sample(g, f), eight_corner_oracle(g, {0, 0, 0}, f), 1e-12);
}

TEST(Trilinear, InterpolationIdentityAtInteriorGridPoints) {
  Rng rng(17);
  const Vec3 s{0.9, 1.1, 0.6};
  const VolumeGrid g = testing::random_grid(rng, {6, 5, 7}, s);
  for (int k = 1; k < 6; ++k)
    for (int j = 1; j < 4; ++j)
      for (int i = 1; i < 5; ++i)
        EXPECT_NEAR(*trilinear_sample(g, {i * s.x, j * s.y, k * s.z}), value_at(g, {i, j, k}), 1e-12);
}

TEST(Trilinear, ReproducesAffineFieldsExactly) {
  Rng rng(23);
  for (int trial = 0; trial < 50; ++trial) {
    const Vec3 s{uniform(rng, 0.5, 2), uniform(rng, 0.5, 2), uniform(rng, 0.5, 2)};
    const Index3 d{testing::uniform_int(rng, 2, 7), testing::uniform_int(rng, 2, 7), testing::uniform_int(rng, 2, 7)};
    const VolumeGrid probe(d, s, std::vector<double>(static_cast<std::size_t>(d.i) * d.j * d.k, 0.0));
    const Vec3 e = probe.extent();
    // f = c + a.p, scaled so that it stays inside [0,1] over the box.
    const Vec3 a{uniform(rng, -0.3, 0.3) / e.x, uniform(rng, -0.3, 0.3) / e.y, uniform(rng, -0.3, 0.3) / e.z};
    const double c = 0.5 - 0.5 * dot(a, e);
    auto f = [&](double x, double y, double z) { return c + a.x * x + a.y * y + a.z * z; };
    const VolumeGrid g = testing::grid_from_function(d, s, f);
    for (int n = 0; n < 200; ++n) {
      const Vec3 p = testing::random_point_in(rng, e);
      EXPECT_NEAR(*trilinear_sample(g, p), f(p.x, p.y, p.z), 1e-12);
    }
  }
}

TEST(Trilinear, StaysWithinCornerBounds) {
  Rng rng(29);
  const VolumeGrid g = testing::random_grid(rng, {5, 5, 5});
  for (int n = 0; n < 2000; ++n) {
    const Vec3 p = testing::random_point_in(rng, g.extent());
    const CellCoords c = *locate_cell(g, p);
    double lo = 1, hi = 0;
    for (int dz = 0; dz <= 1; ++dz)
      for (int dy = 0; dy <= 1; ++dy)
        for (int dx = 0; dx <= 1; ++dx) {
          const double v = g(c.base.i + dx, c.base.j + dy, c.base.k + dz);
          lo = std::min(lo, v);
          hi = std::max(hi, v);
        }
    const double v = *trilinear_sample(g, p);
    EXPECT_GE(v, lo - 1e-15);
    EXPECT_LE(v, hi + 1e-15);
  }
}

TEST(Gradient, ConstantFieldIsZero) {
  const VolumeGrid g({4, 4, 4}, {1, 2, 3}, std::vector<double>(64, 0.6));
  Rng rng(1);
  for (int n = 0; n < 100; ++n) {
    const Vec3 grad = *gradient_at(g, testing::random_point_in(rng, g.extent()));
    EXPECT_EQ(grad, (Vec3{0, 0, 0}));
  }
  EXPECT_FALSE(gradient_at(g, {-1, 0, 0}));
}

TEST(Gradient, LinearRampIsExact) {
  const int nx = 9;
  const VolumeGrid g = testing::grid_from_function({nx, 4, 4}, {1, 1, 1},
                                                   [&](double x, double, double) { return x / (nx - 1); });
  for (const Vec3 p : {Vec3{1.0, 1.0, 1.0}, Vec3{3.3, 2.2, 1.7}, Vec3{6.5, 0.5, 2.5}}) {
    const Vec3 grad = *gradient_at(g, p);
    EXPECT_NEAR(grad.x, 1.0 / (nx - 1), 1e-15);
    EXPECT_NEAR(grad.y, 0.0, 1e-15);
    EXPECT_NEAR(grad.z, 0.0, 1e-15);
  }
  // One-sided at the faces still recovers the slope of a linear field.
  EXPECT_NEAR(gradient_at(g, {0, 1, 1})->x, 1.0 / (nx - 1), 1e-15);
  EXPECT_NEAR(gradient_at(g, {nx - 1.0, 1, 1})->x, 1.0 / (nx - 1), 1e-15);
}

TEST(Gradient, MatchesAnalyticFiniteDifferencesOfSeparableQuadratics) {
  Rng rng(31);
  for (int trial = 0; trial < 20; ++trial) {
    const Vec3 s{uniform(rng, 0.5, 1.5), uniform(rng, 0.5, 1.5), uniform(rng, 0.5, 1.5)};
    const Index3 d{10, 9, 8};
    const Vec3 e{(d.i - 1) * s.x, (d.j - 1) * s.y, (d.k - 1) * s.z};
    // Per-axis quadratic q(t) = a t + b t^2, scaled into [0,1] overall.
    double a[3], b[3];
    for (int ax = 0; ax < 3; ++ax) {
      a[ax] = uniform(rng, -1, 1);
      b[ax] = uniform(rng, -1, 1);
    }
    double scale = 0;
    for (int ax = 0; ax < 3; ++ax) scale += std::abs(a[ax]) * e[ax] + std::abs(b[ax]) * e[ax] * e[ax];
    scale = 0.45 / scale;
    auto f = [&](double x, double y, double z) {
      const double t[3] = {x, y, z};
      double v = 0.5;
      for (int ax = 0; ax < 3; ++ax) v += scale * (a[ax] * t[ax] + b[ax] * t[ax] * t[ax]);
      return v;
    };
    const VolumeGrid g = testing::grid_from_function(d, s, f);
    for (int n = 0; n < 100; ++n) {
      Vec3 p;
      for (std::size_t ax = 0; ax < 3; ++ax) p[ax] = uniform(rng, s[ax], e[ax] - s[ax]);
      const Vec3 grad = *gradient_at(g, p);
      for (std::size_t ax = 0; ax < 3; ++ax) {
        const double h = 0.5 * s[ax];
        Vec3 lo = p, hi = p;
        lo[ax] -= h;
        hi[ax] += h;
        const double fd = (f(hi.x, hi.y, hi.z) - f(lo.x, lo.y, lo.z)) / (2 * h);
        EXPECT_NEAR(grad[ax], fd, 1e-6);
      }
    }
  }
}

TEST(VolumeGridF, FloatStorageSamplesInDouble) {
  const VolumeGridF g({2, 2, 2}, {1, 1, 1}, std::vector<float>{0, 1, 0, 1, 0, 1, 0, 1});
  EXPECT_NEAR(*trilinear_sample(g, {0.25, 0.5, 0.5}), 0.25, 1e-7);
}

}  // namespace
}  // namespace dvr
