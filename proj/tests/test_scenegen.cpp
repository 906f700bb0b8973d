// Copyright 2026 The nastereo Authors.
// SPDX-License-Identifier: Apache-2.0
#include <cmath>

#include <gtest/gtest.h>

#include "fixtures.hpp"

using namespace nastereo;
using nastereo::testing::constant_depth;
using nastereo::testing::k100;
using nastereo::testing::render_plane;
using nastereo::testing::render_sphere;

namespace {

TEST(Render, FrontoParallelPlane) {
  const auto view = render_plane(0.0, 2.0);
  for (int v = 0; v < 128; ++v)
    for (int u = 0; u < 128; ++u) {
      ASSERT_TRUE(view.depth_gt.is_valid(u, v));
      EXPECT_NEAR(view.depth_gt.z(u, v), 2.0, 1e-12);
      EXPECT_NEAR((view.normal_gt.n(u, v) - Eigen::Vector3d(0, 0, -1)).norm(), 0.0, 1e-12);
    }
}

TEST(Render, SlantedPlaneDepth) {
  const CameraIntrinsics k{100.0, 100.0, 50.0, 50.0};
  const auto view = render_plane(0.5, 2.0, k, 101);
  const double expected = 2.0 / (1.0 - 0.5 * 20.0 / 100.0);
  EXPECT_NEAR(view.depth_gt.z(70, 50), expected, 1e-12);
  EXPECT_NEAR(view.depth_gt.z(70, 50), 2.2222, 1e-4);
  const Eigen::Vector3d n = Eigen::Vector3d(0.5, 0.0, -1.0).normalized();
  EXPECT_NEAR((view.normal_gt.n(13, 77) - n).norm(), 0.0, 1e-12);
}

TEST(Render, SphereFrontPole) {
  const CameraIntrinsics k{100.0, 100.0, 64.0, 64.0};
  const auto view = render_sphere(k, 129);
  EXPECT_NEAR(view.depth_gt.z(64, 64), 3.0, 1e-12);
  EXPECT_NEAR((view.normal_gt.n(64, 64) - Eigen::Vector3d(0, 0, -1)).norm(), 0.0, 1e-12);
  EXPECT_FALSE(view.depth_gt.is_valid(0, 0));
  EXPECT_FALSE(view.normal_gt.is_valid(0, 0));
}

TEST(Render, SphereNormalsAreRadialAndFaceCamera) {
  const auto view = render_sphere();
  const CameraIntrinsics k = k100();
  for (int v = 0; v < 128; v += 5)
    for (int u = 0; u < 128; u += 5) {
      if (!view.depth_gt.is_valid(u, v)) continue;
      const Point3 p = unproject({double(u), double(v)}, view.depth_gt.z(u, v), k);
      EXPECT_NEAR((p - Eigen::Vector3d(0, 0, 4)).norm(), 1.0, 1e-9);
      EXPECT_NEAR((view.normal_gt.n(u, v) - (p - Eigen::Vector3d(0, 0, 4))).norm(), 0.0,
                  1e-9);
      EXPECT_LT(view.normal_gt.n(u, v).dot(p), 0.0);
    }
}

TEST(Render, ImageIntensityInUnitRange) {
  const auto view = render_plane(0.3, 2.0);
  for (double x : view.image.pixels()) {
    EXPECT_GE(x, 0.0);
    EXPECT_LE(x, 1.0);
  }
}

TEST(Render, ViewsArePhotoconsistent) {
  // Smooth texture on a slanted plane; hard-edged checker on a fronto plane.
  for (auto kind : {TextureKind::kValueNoise, TextureKind::kChecker}) {
    SceneSpec spec;
    const bool checker = kind == TextureKind::kChecker;
    spec.surface = PlaneSurface{checker ? 0.0 : 0.3, 0.0, 2.0};
    spec.texture.kind = kind;
    spec.cameras = stereo_rig(k100(), 0.1, 2);
    const auto views = render(spec);
    const CameraPose rel = relative_pose(views[0].camera.pose, views[1].camera.pose);
    double sum = 0.0;
    int n = 0;
    for (int v = 0; v < 128; ++v)
      for (int u = 0; u < 128; ++u) {
        const Point3 p = unproject({double(u), double(v)}, views[0].depth_gt.z(u, v), k100());
        const PixelCoord q = project(rel.transform(p), k100());
        const auto s = sample_bilinear(views[1].image, q.u, q.v);
        if (!s) continue;
        sum += std::abs(*s - views[0].image(u, v));
        ++n;
      }
    ASSERT_GT(n, 10000);
    EXPECT_LT(sum / n, 1e-2) << static_cast<int>(kind) << " " << sum / n;
  }
}

TEST(Render, DepthAndNormalsAreConsistent) {
  const auto view = render_plane(0.5, 2.0);
  const GradientField e1 = grad_estimate_sobel(view.depth_gt);
  const GradientField e2 = grad_estimate_normal(view.depth_gt, view.normal_gt, k100());
  for (int v = 1; v < 127; ++v)
    for (int u = 1; u < 127; ++u) {
      EXPECT_NEAR(e1.dzdu(u, v), e2.dzdu(u, v), 1e-3);
      EXPECT_NEAR(e1.dzdv(u, v), e2.dzdv(u, v), 1e-3);
    }
}

TEST(Render, MissingSurfaceMasksView) {
  SceneSpec spec;
  Camera cam{k100(), CameraPose::identity()};
  spec.surface = SphereSurface{Eigen::Vector3d(50.0, 0.0, 4.0), 1.0};
  spec.cameras = {cam};
  const auto view = render(spec).front();
  EXPECT_EQ(view.depth_gt.valid_count(), 0u);
}

TEST(Render, Validation) {
  SceneSpec spec;
  EXPECT_THROW(render(spec), InputError);  // no camera
  spec.cameras = {Camera{k100(), CameraPose::identity()}};
  spec.surface = SphereSurface{Eigen::Vector3d(0, 0, 0.5), 1.0};
  EXPECT_THROW(render(spec), InputError);
  spec.surface = PlaneSurface{0.0, 0.0, -1.0};
  EXPECT_THROW(render(spec), InputError);
  spec.surface = PlaneSurface{};
  spec.texture.period = 0.0;
  EXPECT_THROW(render(spec), InputError);
  spec.texture.period = 0.08;
  spec.width = 0;
  EXPECT_THROW(render(spec), InputError);
}

TEST(Render, Deterministic) {
  SceneSpec spec;
  spec.texture.kind = TextureKind::kValueNoise;
  spec.texture.seed = 11;
  spec.cameras = stereo_rig(k100(), 0.1, 2);
  const auto a = render(spec), b = render(spec);
  EXPECT_EQ(a[1].image, b[1].image);
  spec.texture.seed = 12;
  EXPECT_NE(render(spec)[1].image, a[1].image);
}

TEST(DepthNoise, ZeroSigmaIsIdentity) {
  const DepthMap d = constant_depth(8, 8, 2.0);
  const DepthMap n = add_depth_noise(d, 0.0, 5);
  EXPECT_EQ(n.z, d.z);
  EXPECT_EQ(n.valid, d.valid);
  EXPECT_THROW(add_depth_noise(d, -1.0, 5), InputError);
}

TEST(DepthNoise, Deterministic) {
  const DepthMap d = constant_depth(16, 16, 2.0);
  EXPECT_EQ(add_depth_noise(d, 0.02, 9).z, add_depth_noise(d, 0.02, 9).z);
  EXPECT_NE(add_depth_noise(d, 0.02, 9).z, add_depth_noise(d, 0.02, 10).z);
}

TEST(DepthNoise, SampleRmseMatchesSigma) {
  const DepthMap d = constant_depth(64, 64, 2.0);
  for (std::uint64_t seed : {0u, 1u, 2u, 3u}) {
    const double rmse = depth_metrics(add_depth_noise(d, 0.02, seed), d).rmse;
    EXPECT_GE(rmse, 0.017);
    EXPECT_LE(rmse, 0.023);
  }
}

TEST(DepthNoise, MaskedPixelsUntouchedAndPositive) {
  DepthMap d = constant_depth(8, 8, 0.001);
  d.valid(2, 2) = 0;
  d.z(2, 2) = 0.0;
  const DepthMap n = add_depth_noise(d, 1.0, 4);
  EXPECT_EQ(n.z(2, 2), 0.0);
  for (int v = 0; v < 8; ++v)
    for (int u = 0; u < 8; ++u)
      if (d.is_valid(u, v)) {
        EXPECT_GT(n.z(u, v), 0.0);
      }
}

TEST(SplitMix, ReferenceStream) {
  SplitMix64 rng(0);
  EXPECT_EQ(rng.next(), 0xE220A8397B1DCDAFull);
  EXPECT_EQ(rng.next(), 0x6E789E6AA1B965F4ull);
}

TEST(SplitMix, NormalMoments) {
  SplitMix64 rng(1);
  double s = 0.0, s2 = 0.0;
  const int n = 200000;
  for (int i = 0; i < n; ++i) {
    const double x = rng.normal();
    s += x;
    s2 += x * x;
  }
  EXPECT_NEAR(s / n, 0.0, 0.01);
  EXPECT_NEAR(s2 / n, 1.0, 0.01);
}

}  // namespace
