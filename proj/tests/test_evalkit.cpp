// Copyright 2026 The nastereo Authors.
// SPDX-License-Identifier: Apache-2.0
#include <cmath>
#include <numbers>

#include <gtest/gtest.h>

#include "fixtures.hpp"

using namespace nastereo;
using nastereo::testing::constant_depth;
using nastereo::testing::constant_normals;

namespace {

DepthMap from_values(int w, int h, std::initializer_list<double> z) {
  DepthMap d(w, h);
  auto it = z.begin();
  for (int v = 0; v < h; ++v)
    for (int u = 0; u < w; ++u, ++it) {
      d.z(u, v) = *it;
      d.valid(u, v) = 1;
    }
  return d;
}

Eigen::Vector3d rotated_normal(double degrees) {
  const double r = degrees * std::numbers::pi / 180.0;
  return {std::sin(r), 0.0, -std::cos(r)};
}

TEST(DepthMetrics, Identity) {
  const DepthMap d = from_values(2, 2, {1.0, 2.0, 3.0, 4.0});
  const DepthMetrics m = depth_metrics(d, d);
  EXPECT_EQ(m.abs_rel, 0.0);
  EXPECT_EQ(m.rmse, 0.0);
  EXPECT_EQ(m.rmse_log, 0.0);
  EXPECT_EQ(m.delta1, 1.0);
  EXPECT_EQ(m.delta3, 1.0);
  EXPECT_EQ(m.pixel_count, 4u);
}

TEST(DepthMetrics, SinglePixel) {
  const DepthMetrics m = depth_metrics(from_values(1, 1, {1.0}), from_values(1, 1, {1.2}));
  EXPECT_NEAR(m.abs_rel, 0.2 / 1.2, 1e-15);
  EXPECT_NEAR(m.abs_rel, 0.16667, 1e-5);
  EXPECT_NEAR(m.abs_diff, 0.2, 1e-15);
  EXPECT_EQ(m.delta1, 1.0);
}

TEST(DepthMetrics, DoubleDepthFailsAllThresholds) {
  const DepthMap g = constant_depth(3, 3, 1.5);
  const DepthMap p = constant_depth(3, 3, 3.0);
  const DepthMetrics m = depth_metrics(p, g);
  EXPECT_EQ(m.delta1, 0.0);
  EXPECT_EQ(m.delta2, 0.0);
  EXPECT_EQ(m.delta3, 0.0);  // 2 > 1.25^3 = 1.953125
}

TEST(DepthMetrics, HandComputedFixture) {
  // ratios 1.2, 1, 4/3, 2
  const DepthMap gt = from_values(2, 2, {1.0, 2.0, 4.0, 1.0});
  const DepthMap pred = from_values(2, 2, {1.2, 2.0, 3.0, 2.0});
  const DepthMetrics m = depth_metrics(pred, gt);
  EXPECT_DOUBLE_EQ(m.abs_diff, 0.55);
  EXPECT_DOUBLE_EQ(m.abs_rel, 0.3625);
  EXPECT_DOUBLE_EQ(m.sq_rel, 0.3225);
  EXPECT_DOUBLE_EQ(m.rmse, std::sqrt(0.51));
  const double l = std::log(1.2) * std::log(1.2) + std::log(0.75) * std::log(0.75) +
                   std::log(2.0) * std::log(2.0);
  EXPECT_DOUBLE_EQ(m.rmse_log, std::sqrt(l / 4.0));
  EXPECT_EQ(m.delta1, 0.5);
  EXPECT_EQ(m.delta2, 0.75);
  EXPECT_EQ(m.delta3, 0.75);
}

TEST(DepthMetrics, MaskAware) {
  const DepthMap gt = from_values(2, 2, {1.0, 2.0, 4.0, 1.0});
  DepthMap pred = from_values(2, 2, {1.2, 2.0, 3.0, 2.0});
  DepthMap wider(3, 2);
  DepthMap wider_gt(3, 2);
  for (int v = 0; v < 2; ++v)
    for (int u = 0; u < 2; ++u) {
      wider.z(u, v) = pred.z(u, v);
      wider.valid(u, v) = 1;
      wider_gt.z(u, v) = gt.z(u, v);
      wider_gt.valid(u, v) = 1;
    }
  wider.z(2, 0) = 100.0;  // masked in gt
  wider.valid(2, 0) = 1;
  wider_gt.z(2, 0) = 1.0;
  const DepthMetrics a = depth_metrics(pred, gt);
  const DepthMetrics b = depth_metrics(wider, wider_gt);
  EXPECT_EQ(a.abs_rel, b.abs_rel);
  EXPECT_EQ(b.pixel_count, 4u);
}

TEST(DepthMetrics, ScaleBehavior) {
  const DepthMap gt = from_values(2, 2, {1.0, 2.0, 4.0, 1.0});
  const DepthMap pred = from_values(2, 2, {1.2, 2.0, 3.0, 2.0});
  DepthMap gt3 = gt, pred3 = pred;
  for (auto& z : gt3.z.pixels()) z *= 3.0;
  for (auto& z : pred3.z.pixels()) z *= 3.0;
  const DepthMetrics a = depth_metrics(pred, gt), b = depth_metrics(pred3, gt3);
  EXPECT_NEAR(b.abs_rel, a.abs_rel, 1e-15);
  EXPECT_EQ(b.delta1, a.delta1);
  EXPECT_NEAR(b.abs_diff, 3.0 * a.abs_diff, 1e-14);
  EXPECT_NEAR(b.rmse, 3.0 * a.rmse, 1e-14);
}

TEST(DepthMetrics, ErrorsAndExclusions) {
  EXPECT_THROW(depth_metrics(DepthMap(2, 2), DepthMap(2, 2)), InputError);
  EXPECT_THROW(depth_metrics(DepthMap(2, 2), DepthMap(3, 2)), InputError);
  DepthMap pred = from_values(2, 1, {-1.0, 2.0});
  const DepthMetrics m = depth_metrics(pred, from_values(2, 1, {1.0, 2.0}));
  EXPECT_EQ(m.log_excluded, 1u);
  EXPECT_EQ(m.rmse_log, 0.0);
}

TEST(NormalMetrics, Identity) {
  const NormalMap n = constant_normals(3, 3, rotated_normal(10.0));
  const NormalMetrics m = normal_metrics(n, n);
  EXPECT_NEAR(m.mean_angle, 0.0, 1e-6);
  EXPECT_EQ(m.frac_11_25, 1.0);
  EXPECT_EQ(m.frac_30, 1.0);
}

TEST(NormalMetrics, HalfAtZeroHalfAtNinety) {
  const NormalMap gt = constant_normals(4, 1, {0, 0, -1});
  NormalMap pred = gt;
  pred.n(2, 0) = rotated_normal(90.0);
  pred.n(3, 0) = rotated_normal(90.0);
  const NormalMetrics m = normal_metrics(pred, gt);
  EXPECT_NEAR(m.mean_angle, 45.0, 1e-12);
  EXPECT_NEAR(m.median_angle, 45.0, 1e-12);  // mean of the two central values
  EXPECT_EQ(m.frac_30, 0.5);
  EXPECT_EQ(m.frac_11_25, 0.5);
}

TEST(NormalMetrics, MedianOddAndEven) {
  EXPECT_EQ(median({3.0, 1.0, 2.0}), 2.0);
  EXPECT_EQ(median({4.0, 1.0, 3.0, 2.0}), 2.5);
}

TEST(NormalMetrics, StrictThreshold) {
  const NormalMap gt = constant_normals(2, 2, {0, 0, -1});
  const NormalMap pred = constant_normals(2, 2, rotated_normal(22.5));
  const NormalMetrics m = normal_metrics(pred, gt);
  EXPECT_NEAR(m.mean_angle, 22.5, 1e-12);
  EXPECT_EQ(m.frac_22_5, m.mean_angle < 22.5 ? 1.0 : 0.0);
  EXPECT_EQ(normal_metrics(constant_normals(2, 2, rotated_normal(22.5 + 1e-9)), gt).frac_22_5,
            0.0);
  EXPECT_EQ(normal_metrics(constant_normals(2, 2, rotated_normal(22.5 - 1e-9)), gt).frac_22_5,
            1.0);
  EXPECT_EQ(m.frac_30, 1.0);
  EXPECT_EQ(m.frac_11_25, 0.0);
}

TEST(NormalMetrics, EmptyThrows) {
  EXPECT_THROW(normal_metrics(NormalMap(2, 2), NormalMap(2, 2)), InputError);
}

TEST(ViewSelection, GaussianWeight) {
  EXPECT_EQ(gaussian_weight(5.0), 1.0);
  EXPECT_NEAR(gaussian_weight(4.0), std::exp(-0.5), 1e-12);
  EXPECT_NEAR(gaussian_weight(15.0), std::exp(-0.5), 1e-12);
  EXPECT_NEAR(gaussian_weight(4.0), 0.60653, 1e-5);
  EXPECT_NEAR(gaussian_weight(0.0), std::exp(-12.5), 1e-15);
  EXPECT_GT(gaussian_weight(5.0 - 1e-9), 1.0 - 1e-12);
  EXPECT_GT(gaussian_weight(5.0 + 1e-9), 1.0 - 1e-12);
  for (double t = 0.0; t < 5.0; t += 0.5) EXPECT_LT(gaussian_weight(t), gaussian_weight(t + 0.5));
  for (double t = 5.0; t < 40.0; t += 0.5) EXPECT_GT(gaussian_weight(t), gaussian_weight(t + 0.5));
}

TEST(ViewSelection, ParamsValidated) {
  ViewSelectionParams p;
  p.sigma1 = 0.0;
  EXPECT_THROW(p.validate(), InputError);
  const std::vector<Point3> pts{Point3(0, 0, 1)};
  EXPECT_THROW(view_pair_score(pts, Point3(1, 0, 0), Point3(0, 1, 0), p), InputError);
}

Point3 at_angle(double degrees) {
  const double r = degrees * std::numbers::pi / 180.0;
  return {std::cos(r), std::sin(r), 0.0};
}

TEST(ViewSelection, PairScore) {
  const Point3 ci(1.0, 0.0, 0.0);
  const std::vector<Point3> one{Point3::Zero()};
  EXPECT_NEAR(view_pair_score(one, ci, at_angle(5.0)), 1.0, 1e-12);

  const std::vector<Point3> many(7, Point3(0.0, 0.0, 2.0));
  EXPECT_NEAR(view_pair_score(many, ci, ci), 7.0 * std::exp(-12.5), 1e-12);

  // A point on the chord's perpendicular bisector at distance h / tan(theta / 2)
  // from the midpoint subtends theta.
  const Point3 cj = at_angle(5.0);
  const Point3 mid = 0.5 * (ci + cj);
  const double h = 0.5 * (cj - ci).norm();
  const Point3 p15 = mid - mid.normalized() * (h / std::tan(7.5 * std::numbers::pi / 180.0));
  const std::vector<Point3> two{Point3::Zero(), p15};
  EXPECT_NEAR(view_pair_score(two, ci, cj), 1.0 + std::exp(-0.5), 1e-12);
  EXPECT_NEAR(view_pair_score(two, ci, cj), 1.60653, 1e-5);
}

TEST(ViewSelection, CoincidentPointSkipped) {
  const Point3 ci(1.0, 0.0, 0.0);
  const std::vector<Point3> pts{ci, Point3::Zero()};
  EXPECT_NEAR(view_pair_score(pts, ci, at_angle(5.0)), 1.0, 1e-12);
}

TEST(Report, KeyValueAndCsv) {
  MetricsReport r;
  r.depth = depth_metrics(from_values(1, 1, {1.0}), from_values(1, 1, {1.2}));
  const std::string csv = to_csv(r);
  EXPECT_EQ(csv.substr(0, csv.find('\n')),
            "abs_rel,abs_diff,sq_rel,rmse,rmse_log,delta1,delta2,delta3,pixel_count");
  EXPECT_EQ(csv.find("mean_angle"), std::string::npos);
  const NormalMap n = constant_normals(1, 1, {0, 0, -1});
  r.normal = normal_metrics(n, n);
  const std::string csv2 = to_csv(r);
  EXPECT_NE(csv2.find("mean_angle,median_angle,frac_11_25,frac_22_5,frac_30"),
            std::string::npos);
  const std::string kv = to_key_value(r);
  EXPECT_NE(kv.find("abs_diff = 0.2"), std::string::npos);
  EXPECT_NE(kv.find("pixel_count = 1\n"), std::string::npos);
}

}  // namespace
