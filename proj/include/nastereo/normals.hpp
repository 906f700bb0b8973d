// Copyright 2026 The nastereo Authors.
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cmath>
#include <numbers>
#include <optional>
#include <span>
#include <vector>

#include <Eigen/Core>
#include <Eigen/Eigenvalues>

#include "nastereo/camera.hpp"
#include "nastereo/error.hpp"
#include "nastereo/image.hpp"
#include "nastereo/parallel.hpp"
#include "nastereo/sweep.hpp"

namespace nastereo {

/// Angle between two vectors, in degrees. atan2 form, accurate near 0 and 180.
inline double angle_between(const Eigen::Vector3d& a, const Eigen::Vector3d& b) {
  return std::atan2(a.cross(b).norm(), a.dot(b)) * 180.0 / std::numbers::pi;
}

/// Least-squares plane normal of a weighted point set: the eigenvector of the
/// weighted scatter matrix with the smallest eigenvalue, flipped to face
/// `viewing_ray` (n . ray < 0). Returns nullopt for fewer than three points
/// or a collinear set.
inline std::optional<Eigen::Vector3d> fit_plane_normal(
    std::span<const Point3> points, std::span<const double> weights,
    const Eigen::Vector3d& viewing_ray) {
  if (points.size() < 3) return std::nullopt;
  double wsum = 0.0;
  Eigen::Vector3d centroid = Eigen::Vector3d::Zero();
  for (std::size_t i = 0; i < points.size(); ++i) {
    centroid += weights[i] * points[i];
    wsum += weights[i];
  }
  if (!(wsum > 0.0)) return std::nullopt;
  centroid /= wsum;
  Eigen::Matrix3d scatter = Eigen::Matrix3d::Zero();
  for (std::size_t i = 0; i < points.size(); ++i) {
    const Eigen::Vector3d d = points[i] - centroid;
    scatter.noalias() += weights[i] * d * d.transpose();
  }
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> eig(scatter);
  if (eig.info() != Eigen::Success) return std::nullopt;
  const auto& ev = eig.eigenvalues();  // ascending
  if (!(ev(2) > 0.0) || ev(1) <= 1e-10 * ev(2)) return std::nullopt;
  Eigen::Vector3d n = eig.eigenvectors().col(0).normalized();
  if (n.dot(viewing_ray) > 0.0) n = -n;
  return n;
}

struct DepthNormalConfig {
  int window = 5;
  /// A window is split when the largest gap between its sorted depths exceeds
  /// this multiple of the median depth step between adjacent window pixels.
  double discontinuity_factor = 3.0;
};

namespace detail {

// Keeps the depths on the center pixel's side of the largest gap when the
// window straddles a depth discontinuity. Returns the [lo, hi] depth range
// to keep.
inline std::pair<double, double> trimmed_depth_range(
    std::vector<double> depths, std::span<const double> steps, double center,
    double factor) {
  std::sort(depths.begin(), depths.end());
  std::pair<double, double> keep{depths.front(), depths.back()};
  if (steps.empty() || depths.size() < 2) return keep;
  std::vector<double> s(steps.begin(), steps.end());
  auto mid = s.begin() + static_cast<std::ptrdiff_t>(s.size() / 2);
  std::nth_element(s.begin(), mid, s.end());
  const double median_step = *mid;
  double gap = 0.0;
  std::size_t at = 0;
  for (std::size_t i = 1; i < depths.size(); ++i) {
    if (depths[i] - depths[i - 1] > gap) {
      gap = depths[i] - depths[i - 1];
      at = i;
    }
  }
  if (gap <= factor * median_step || gap <= 1e-12 * depths.back()) return keep;
  if (center < depths[at]) return {depths.front(), depths[at - 1]};
  return {depths[at], depths.back()};
}

}  // namespace detail

/// Normals by least-squares plane fits over a window of unprojected depth
/// samples. Pixels whose center is invalid or whose window yields fewer than
/// three usable points (or a collinear set) are masked.
inline NormalMap normals_from_depth(const DepthMap& depth, const CameraIntrinsics& k,
                                    const DepthNormalConfig& cfg = {}) {
  if (cfg.window < 3 || cfg.window % 2 == 0)
    throw InputError("normals: window must be odd and >= 3");
  k.validate();
  const int w = depth.width();
  const int h = depth.height();
  const int r = cfg.window / 2;
  NormalMap out(w, h);
  auto usable = [&](int x, int y) {
    return depth.z.contains(x, y) && depth.is_valid(x, y) && depth.z(x, y) > 0.0 &&
           std::isfinite(depth.z(x, y));
  };

  parallel_for_rows(h, [&](int v) {
    std::vector<double> depths;
    std::vector<double> steps;
    std::vector<Point3> points;
    std::vector<double> weights;
    for (int u = 0; u < w; ++u) {
      if (!usable(u, v)) continue;
      depths.clear();
      steps.clear();
      for (int dv = -r; dv <= r; ++dv) {
        for (int du = -r; du <= r; ++du) {
          const int x = u + du, y = v + dv;
          if (!usable(x, y)) continue;
          depths.push_back(depth.z(x, y));
          if (du < r && usable(x + 1, y))
            steps.push_back(std::abs(depth.z(x + 1, y) - depth.z(x, y)));
          if (dv < r && usable(x, y + 1))
            steps.push_back(std::abs(depth.z(x, y + 1) - depth.z(x, y)));
        }
      }
      if (depths.size() < 3) continue;
      const auto [lo, hi] = detail::trimmed_depth_range(
          depths, steps, depth.z(u, v), cfg.discontinuity_factor);
      points.clear();
      for (int dv = -r; dv <= r; ++dv) {
        for (int du = -r; du <= r; ++du) {
          const int x = u + du, y = v + dv;
          if (!usable(x, y)) continue;
          const double z = depth.z(x, y);
          if (z < lo || z > hi) continue;
          points.push_back(unproject({double(x), double(y)}, z, k));
        }
      }
      weights.assign(points.size(), 1.0);
      const Point3 center = unproject({double(u), double(v)}, depth.z(u, v), k);
      if (auto n = fit_plane_normal(points, weights, center)) {
        out.n(u, v) = *n;
        out.valid(u, v) = 1;
      }
    }
  });
  return out;
}

struct VolumeNormalConfig {
  int window = 5;
  /// Half-width, in planes, of the depth band a slice conditions on.
  int band = 2;
  /// Slices whose probability at the pixel falls below this are skipped.
  double min_probability = 1e-9;
};

/// Probability-weighted normal aggregation over the slices of a volume.
///
/// For slice i at pixel p, each neighbor q in the window is placed at its
/// expected depth conditioned on the planes within `band` of i, weighted by
/// its probability mass in that band. The weighted plane fit through those
/// points gives the slice direction; the slice magnitude is p's probability
/// at plane i. The output is the normalized sum of the slice vectors.
inline NormalMap normals_from_volume(const ProbabilityVolume& pv,
                                     const CameraIntrinsics& k,
                                     const VolumeNormalConfig& cfg = {}) {
  if (cfg.window < 3 || cfg.window % 2 == 0)
    throw InputError("normals: window must be odd and >= 3");
  if (cfg.band < 0) throw InputError("normals: band must be >= 0");
  k.validate();
  const int w = pv.width;
  const int h = pv.height;
  const int n = pv.num_planes();
  const int r = cfg.window / 2;

  // Prefix sums over planes so band queries are O(1).
  const std::size_t stride = static_cast<std::size_t>(n) + 1;
  std::vector<double> cum_p(static_cast<std::size_t>(w) * h * stride, 0.0);
  std::vector<double> cum_pz(cum_p.size(), 0.0);
  for (int v = 0; v < h; ++v) {
    for (int u = 0; u < w; ++u) {
      const std::size_t base = (static_cast<std::size_t>(v) * w + u) * stride;
      const auto p = pv.prob_at(u, v);
      for (int i = 0; i < n; ++i) {
        cum_p[base + i + 1] = cum_p[base + i] + p[i];
        cum_pz[base + i + 1] = cum_pz[base + i] + p[i] * pv.planes[i];
      }
    }
  }

  NormalMap out(w, h);
  parallel_for_rows(h, [&](int v) {
    std::vector<Point3> points;
    std::vector<double> weights;
    for (int u = 0; u < w; ++u) {
      if (!pv.pixel_valid(u, v)) continue;
      const auto p = pv.prob_at(u, v);
      Eigen::Vector3d acc = Eigen::Vector3d::Zero();
      for (int i = 0; i < n; ++i) {
        if (!(p[i] >= cfg.min_probability) || p[i] == 0.0) continue;
        const int lo = std::max(0, i - cfg.band);
        const int hi = std::min(n, i + cfg.band + 1);
        points.clear();
        weights.clear();
        for (int dv = -r; dv <= r; ++dv) {
          for (int du = -r; du <= r; ++du) {
            const int x = u + du, y = v + dv;
            if (x < 0 || y < 0 || x >= w || y >= h || !pv.pixel_valid(x, y))
              continue;
            const std::size_t base = (static_cast<std::size_t>(y) * w + x) * stride;
            const double mass = cum_p[base + hi] - cum_p[base + lo];
            if (!(mass > 1e-12)) continue;
            const double z = (cum_pz[base + hi] - cum_pz[base + lo]) / mass;
            points.push_back(unproject({double(x), double(y)}, z, k));
            weights.push_back(mass);
          }
        }
        const Eigen::Vector3d ray((u - k.uc) / k.fx, (v - k.vc) / k.fy, 1.0);
        if (auto ni = fit_plane_normal(points, weights, ray)) acc += p[i] * *ni;
      }
      const double norm = acc.norm();
      if (!(norm >= 1e-8)) continue;
      out.n(u, v) = acc / norm;
      out.valid(u, v) = 1;
    }
  });
  return out;
}

}  // namespace nastereo
