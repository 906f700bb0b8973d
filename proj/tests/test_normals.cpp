// Copyright 2026 The nastereo Authors.
// SPDX-License-Identifier: Apache-2.0
#include <cmath>
#include <numbers>
#include <vector>

#include <gtest/gtest.h>

#include "fixtures.hpp"

using namespace nastereo;
using nastereo::testing::constant_depth;
using nastereo::testing::k100;
using nastereo::testing::render_plane;
using nastereo::testing::render_sphere;

namespace {

double deg(double rad) { return rad * 180.0 / std::numbers::pi; }

TEST(AngleBetween, KnownAngles) {
  EXPECT_DOUBLE_EQ(angle_between({0, 0, 1}, {0, 0, 1}), 0.0);
  EXPECT_NEAR(angle_between({1, 0, 0}, {0, 1, 0}), 90.0, 1e-12);
  const Eigen::Vector3d b = Eigen::Vector3d(0.0, 0.1, 0.9950).normalized();
  EXPECT_NEAR(angle_between({0, 0, 1}, b), deg(std::atan2(0.1, 0.9950)), 1e-9);
  EXPECT_NEAR(angle_between({0, 0, 1}, b), 5.739, 1e-3);
  EXPECT_NEAR(angle_between({0, 0, 1}, {0, 0, -1}), 180.0, 1e-12);
}

TEST(FitPlaneNormal, OrientsAgainstViewingRay) {
  std::vector<Point3> pts{{0, 0, 2}, {1, 0, 2}, {0, 1, 2}, {1, 1, 2}};
  const std::vector<double> w(4, 1.0);
  const auto n = fit_plane_normal(pts, w, {0.0, 0.0, 1.0});
  ASSERT_TRUE(n);
  EXPECT_NEAR((*n - Eigen::Vector3d(0, 0, -1)).norm(), 0.0, 1e-12);
}

TEST(FitPlaneNormal, DegenerateSupportRejected) {
  std::vector<Point3> line{{0, 0, 2}, {1, 0, 2}, {2, 0, 2}};
  EXPECT_FALSE(fit_plane_normal(line, std::vector<double>(3, 1.0), {0, 0, 1}));
  std::vector<Point3> two{{0, 0, 2}, {1, 0, 2}};
  EXPECT_FALSE(fit_plane_normal(two, std::vector<double>(2, 1.0), {0, 0, 1}));
}

TEST(NormalsFromDepth, FrontoParallelPlane) {
  const DepthMap d = constant_depth(32, 32, 2.0);
  const NormalMap n = normals_from_depth(d, k100());
  for (int v = 2; v < 30; ++v)
    for (int u = 2; u < 30; ++u) {
      ASSERT_TRUE(n.is_valid(u, v));
      EXPECT_LT((n.n(u, v) - Eigen::Vector3d(0, 0, -1)).norm(), 1e-12);
    }
}

TEST(NormalsFromDepth, SlantedPlane) {
  const auto view = render_plane(0.5, 2.0);
  const NormalMap n = normals_from_depth(view.depth_gt, k100());
  const Eigen::Vector3d expected = Eigen::Vector3d(0.5, 0.0, -1.0).normalized();
  EXPECT_NEAR(expected.x(), 0.4472, 1e-4);
  EXPECT_NEAR(expected.z(), -0.8944, 1e-4);
  for (int v = 2; v < 126; ++v)
    for (int u = 2; u < 126; ++u) {
      ASSERT_TRUE(n.is_valid(u, v));
      EXPECT_LT(angle_between(n.n(u, v), expected), 1e-5);
    }
}

TEST(NormalsFromDepth, SphereInteriorMatchesRadialNormal) {
  const auto view = render_sphere();
  const NormalMap n = normals_from_depth(view.depth_gt, k100());
  // interior: full window on the sphere and incidence below 60 degrees
  double sum = 0.0;
  int count = 0;
  for (int v = 2; v < 126; ++v)
    for (int u = 2; u < 126; ++u) {
      bool full = true;
      for (int dv = -2; dv <= 2; ++dv)
        for (int du = -2; du <= 2; ++du) full = full && view.depth_gt.is_valid(u + du, v + dv);
      if (!full) continue;
      const Point3 ray = unproject({double(u), double(v)}, 1.0, k100()).normalized();
      if (-ray.dot(view.normal_gt.n(u, v)) < std::cos(std::numbers::pi / 3)) continue;
      ASSERT_TRUE(n.is_valid(u, v));
      sum += angle_between(n.n(u, v), view.normal_gt.n(u, v));
      ++count;
    }
  ASSERT_GT(count, 1000);
  EXPECT_LT(sum / count, 0.5);
}

TEST(NormalsFromDepth, DiscontinuityKeepsCenterSide) {
  // left half at 2 m, right half at 3 m: fronto normals on both sides
  DepthMap d = constant_depth(20, 20, 2.0);
  for (int v = 0; v < 20; ++v)
    for (int u = 10; u < 20; ++u) d.z(u, v) = 3.0;
  const NormalMap n = normals_from_depth(d, k100());
  for (int u : {9, 10}) {
    ASSERT_TRUE(n.is_valid(u, 10));
    EXPECT_LT(angle_between(n.n(u, 10), {0, 0, -1}), 1e-9) << u;
  }
}

TEST(NormalsFromDepth, MaskedInputPropagates) {
  DepthMap d = constant_depth(10, 10, 2.0);
  d.valid(5, 5) = 0;
  const NormalMap n = normals_from_depth(d, k100());
  EXPECT_FALSE(n.is_valid(5, 5));
  EXPECT_THROW(normals_from_depth(d, k100(), DepthNormalConfig{4, 3.0}), InputError);
}

// Two-plane hat in inverse depth: expected depth under the hat equals z.
ProbabilityVolume hat_volume(const DepthMap& d, const std::vector<double>& planes) {
  ProbabilityVolume pv(d.width(), d.height(), planes);
  for (int v = 0; v < d.height(); ++v)
    for (int u = 0; u < d.width(); ++u) {
      if (!d.is_valid(u, v)) continue;
      const double z = d.z(u, v);
      auto it = std::upper_bound(planes.begin(), planes.end(), z);
      const std::size_t hi = std::clamp<std::size_t>(it - planes.begin(), 1, planes.size() - 1);
      const double w = (z - planes[hi - 1]) / (planes[hi] - planes[hi - 1]);
      pv.prob_at(u, v)[hi - 1] = 1.0 - w;
      pv.prob_at(u, v)[hi] = w;
      pv.pixel_valid(u, v) = 1;
    }
  return pv;
}

TEST(NormalsFromVolume, ConcentratedVolumeMatchesDepthNormals) {
  const auto view = render_plane(0.5, 2.0);
  const auto planes = plane_depths(PlaneSweepConfig{});
  const ProbabilityVolume pv = hat_volume(view.depth_gt, planes);
  EXPECT_LT((soft_argmin_depth(pv).z(40, 40) - view.depth_gt.z(40, 40)), 1e-12);
  const NormalMap from_volume = normals_from_volume(pv, k100());
  const NormalMap from_depth = normals_from_depth(view.depth_gt, k100());
  double sum = 0.0;
  int count = 0;
  for (int v = 2; v < 126; ++v)
    for (int u = 2; u < 126; ++u) {
      ASSERT_TRUE(from_volume.is_valid(u, v));
      sum += angle_between(from_volume.n(u, v), from_depth.n(u, v));
      ++count;
    }
  EXPECT_LT(sum / count, 1.0);
}

TEST(NormalsFromVolume, UniformVolumeOverFrontoSceneIsFronto) {
  const int w = 16, h = 16;
  ProbabilityVolume pv(w, h, plane_depths(PlaneSweepConfig{}));
  for (auto& p : pv.prob) p = 1.0 / pv.num_planes();
  for (auto& m : pv.pixel_valid.pixels()) m = 1;
  const CameraIntrinsics k{100.0, 100.0, 7.5, 7.5};
  const NormalMap n = normals_from_volume(pv, k);
  for (int v = 0; v < h; ++v)
    for (int u = 0; u < w; ++u) {
      ASSERT_TRUE(n.is_valid(u, v));
      EXPECT_LT(angle_between(n.n(u, v), {0, 0, -1}), 1e-9);
    }
}

TEST(NormalsFromVolume, MaskedPixelStaysMasked) {
  ProbabilityVolume pv(8, 8, {1.0, 2.0});
  for (int v = 0; v < 8; ++v)
    for (int u = 0; u < 8; ++u) {
      pv.prob_at(u, v)[0] = 1.0;
      pv.pixel_valid(u, v) = 1;
    }
  pv.pixel_valid(3, 3) = 0;
  for (auto& p : pv.prob_at(3, 3)) p = 0.0;
  const NormalMap n = normals_from_volume(pv, k100());
  EXPECT_FALSE(n.is_valid(3, 3));
  EXPECT_TRUE(n.is_valid(4, 4));
}

}  // namespace
