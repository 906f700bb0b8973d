// Copyright 2026 The nastereo Authors.
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "nastereo/camera.hpp"
#include "nastereo/error.hpp"
#include "nastereo/image.hpp"
#include "nastereo/parallel.hpp"

namespace nastereo {

enum class DepthSampling { kInverseDepth, kUniform };
enum class MatchingCost { kSad, kZncc };

struct PlaneSweepConfig {
  int num_planes = 64;
  double depth_min = 1.0;
  double depth_max = 4.0;
  DepthSampling sampling = DepthSampling::kInverseDepth;
  MatchingCost cost = MatchingCost::kZncc;
  int patch_radius = 2;
  double temperature = 0.05;

  void validate() const {
    if (num_planes < 2) throw InputError("sweep: num_planes must be >= 2");
    if (!(depth_min > 0.0) || !(depth_min < depth_max) ||
        !std::isfinite(depth_max))
      throw InputError("sweep: need 0 < depth_min < depth_max");
    if (patch_radius < 0) throw InputError("sweep: patch_radius must be >= 0");
    if (!(temperature > 0.0) || !std::isfinite(temperature))
      throw InputError("sweep: temperature must be > 0");
  }
};

/// Matching cost per (pixel, plane); lower is better. Stored pixel-major:
/// the planes of one pixel are contiguous.
struct CostVolume {
  int width = 0;
  int height = 0;
  std::vector<double> planes;
  std::vector<double> cost;
  std::vector<std::uint8_t> valid;

  CostVolume() = default;
  CostVolume(int w, int h, std::vector<double> plane_depths)
      : width(w), height(h), planes(std::move(plane_depths)),
        cost(static_cast<std::size_t>(w) * h * planes.size(), 0.0),
        valid(cost.size(), 0) {}

  int num_planes() const { return static_cast<int>(planes.size()); }
  std::size_t index(int u, int v, int i) const {
    return (static_cast<std::size_t>(v) * width + u) * planes.size() + i;
  }
  std::span<double> cost_at(int u, int v) {
    return std::span<double>(cost).subspan(index(u, v, 0), planes.size());
  }
  std::span<const double> cost_at(int u, int v) const {
    return std::span<const double>(cost).subspan(index(u, v, 0), planes.size());
  }
  std::span<std::uint8_t> valid_at(int u, int v) {
    return std::span<std::uint8_t>(valid).subspan(index(u, v, 0), planes.size());
  }
  std::span<const std::uint8_t> valid_at(int u, int v) const {
    return std::span<const std::uint8_t>(valid).subspan(index(u, v, 0),
                                                        planes.size());
  }
  bool any_valid() const {
    return std::any_of(valid.begin(), valid.end(), [](auto m) { return m != 0; });
  }
};

/// Per-pixel distribution over planes. Masked pixels carry all-zero rows.
struct ProbabilityVolume {
  int width = 0;
  int height = 0;
  std::vector<double> planes;
  std::vector<double> prob;
  Mask pixel_valid;

  ProbabilityVolume() = default;
  ProbabilityVolume(int w, int h, std::vector<double> plane_depths)
      : width(w), height(h), planes(std::move(plane_depths)),
        prob(static_cast<std::size_t>(w) * h * planes.size(), 0.0),
        pixel_valid(w, h, 0) {}

  int num_planes() const { return static_cast<int>(planes.size()); }
  std::size_t index(int u, int v, int i) const {
    return (static_cast<std::size_t>(v) * width + u) * planes.size() + i;
  }
  std::span<double> prob_at(int u, int v) {
    return std::span<double>(prob).subspan(index(u, v, 0), planes.size());
  }
  std::span<const double> prob_at(int u, int v) const {
    return std::span<const double>(prob).subspan(index(u, v, 0), planes.size());
  }
};

/// Depth hypotheses in increasing depth order; endpoints are exact.
inline std::vector<double> plane_depths(const PlaneSweepConfig& cfg) {
  cfg.validate();
  const int n = cfg.num_planes;
  std::vector<double> out(n);
  for (int i = 0; i < n; ++i) {
    const double t = static_cast<double>(i) / (n - 1);
    if (cfg.sampling == DepthSampling::kUniform) {
      out[i] = cfg.depth_min + t * (cfg.depth_max - cfg.depth_min);
    } else {
      const double near_inv = 1.0 / cfg.depth_min;
      const double far_inv = 1.0 / cfg.depth_max;
      out[i] = 1.0 / (near_inv + t * (far_inv - near_inv));
    }
  }
  out.front() = cfg.depth_min;
  out.back() = cfg.depth_max;
  return out;
}

/// Spacing to the neighboring plane(s) around depth z: the width of the plane
/// interval that contains z (clamped to the first/last interval).
inline double local_plane_spacing(std::span<const double> planes, double z) {
  if (planes.size() < 2) return 0.0;
  auto it = std::upper_bound(planes.begin(), planes.end(), z);
  std::size_t hi = static_cast<std::size_t>(it - planes.begin());
  hi = std::clamp<std::size_t>(hi, 1, planes.size() - 1);
  return planes[hi] - planes[hi - 1];
}

namespace detail {

inline int channel_count(double) { return 1; }
inline int channel_count(const Eigen::Vector3d&) { return 3; }
inline double channel(double p, int) { return p; }
inline double channel(const Eigen::Vector3d& p, int c) { return p[c]; }

// Patch similarity costs. ZNCC cost is 1 - rho in [0, 2]. Two flat patches
// count as a perfect match, one flat patch against a textured one as
// uncorrelated (rho = 0).
inline double zncc_cost(std::span<const double> a, std::span<const double> b) {
  const double n = static_cast<double>(a.size());
  double ma = 0.0, mb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    ma += a[i];
    mb += b[i];
  }
  ma /= n;
  mb /= n;
  double saa = 0.0, sbb = 0.0, sab = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double da = a[i] - ma;
    const double db = b[i] - mb;
    saa += da * da;
    sbb += db * db;
    sab += da * db;
  }
  constexpr double kFlat = 1e-12;
  const bool flat_a = saa <= kFlat * n;
  const bool flat_b = sbb <= kFlat * n;
  if (flat_a && flat_b) return 0.0;
  if (flat_a || flat_b) return 1.0;
  const double rho = std::clamp(sab / std::sqrt(saa * sbb), -1.0, 1.0);
  return 1.0 - rho;
}

inline double sad_cost(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += std::abs(a[i] - b[i]);
  return s / static_cast<double>(a.size());
}

}  // namespace detail

/// Plane-sweep cost volume of the reference view against one or more source
/// views. Every patch pixel is warped individually through the plane and
/// sampled bilinearly; a view contributes at a plane only if its whole patch
/// lands inside the source image. Costs are averaged over contributing views.
/// Pixels whose patch leaves the reference image are masked at every plane.
template <typename Pixel>
CostVolume build_cost_volume(const Image<Pixel>& ref_image,
                             std::span<const Image<Pixel>> src_images,
                             const Camera& ref_camera,
                             std::span<const Camera> src_cameras,
                             const PlaneSweepConfig& cfg) {
  cfg.validate();
  ref_camera.intrinsics.validate();
  if (src_images.empty()) throw InputError("sweep: need at least one source view");
  if (src_images.size() != src_cameras.size())
    throw InputError("sweep: one camera per source image required");
  for (const auto& img : src_images) {
    if (!img.same_shape(ref_image))
      throw InputError("sweep: all views must have the same size");
  }

  const int w = ref_image.width();
  const int h = ref_image.height();
  CostVolume cv(w, h, plane_depths(cfg));
  const int n_planes = cv.num_planes();
  const int r = cfg.patch_radius;
  const int side = 2 * r + 1;
  const int channels = w * h > 0 ? detail::channel_count(ref_image(0, 0)) : 1;
  const std::size_t samples = static_cast<std::size_t>(side) * side * channels;

  std::vector<PlaneWarp> warps;
  warps.reserve(src_cameras.size());
  for (const auto& cam : src_cameras) {
    cam.intrinsics.validate();
    warps.emplace_back(ref_camera.intrinsics, cam.intrinsics,
                       relative_pose(ref_camera.pose, cam.pose));
  }

  parallel_for_rows(h, [&](int v) {
    std::vector<double> ref_patch(samples);
    std::vector<double> src_patch(samples);
    std::vector<double> sum(n_planes);
    std::vector<int> count(n_planes);
    for (int u = 0; u < w; ++u) {
      if (u - r < 0 || v - r < 0 || u + r >= w || v + r >= h) continue;
      std::size_t k = 0;
      for (int dv = -r; dv <= r; ++dv)
        for (int du = -r; du <= r; ++du)
          for (int c = 0; c < channels; ++c)
            ref_patch[k++] = detail::channel(ref_image(u + du, v + dv), c);

      std::fill(sum.begin(), sum.end(), 0.0);
      std::fill(count.begin(), count.end(), 0);
      for (std::size_t s = 0; s < warps.size(); ++s) {
        const auto& src = src_images[s];
        for (int i = 0; i < n_planes; ++i) {
          const double depth = cv.planes[i];
          bool ok = true;
          k = 0;
          for (int dv = -r; dv <= r && ok; ++dv) {
            for (int du = -r; du <= r; ++du) {
              const auto px = warps[s](PixelCoord{double(u + du), double(v + dv)},
                                       depth);
              if (!px) {
                ok = false;
                break;
              }
              const auto val = sample_bilinear(src, px->u, px->v);
              if (!val) {
                ok = false;
                break;
              }
              for (int c = 0; c < channels; ++c)
                src_patch[k++] = detail::channel(*val, c);
            }
          }
          if (!ok) continue;
          sum[i] += cfg.cost == MatchingCost::kZncc
                        ? detail::zncc_cost(ref_patch, src_patch)
                        : detail::sad_cost(ref_patch, src_patch);
          ++count[i];
        }
      }
      auto costs = cv.cost_at(u, v);
      auto valid = cv.valid_at(u, v);
      for (int i = 0; i < n_planes; ++i) {
        if (count[i] > 0) {
          costs[i] = sum[i] / count[i];
          valid[i] = 1;
        }
      }
    }
  });
  return cv;
}

/// Per-pixel softmax of -cost / temperature over the valid planes. Pixels
/// with fewer than min_valid_fraction of the planes valid are masked; by
/// default a pixel needs every hypothesis observed.
inline ProbabilityVolume to_probability(const CostVolume& cv, double temperature,
                                        double min_valid_fraction = 1.0) {
  if (!(temperature > 0.0)) throw InputError("sweep: temperature must be > 0");
  if (!(min_valid_fraction >= 0.0 && min_valid_fraction <= 1.0))
    throw InputError("sweep: min_valid_fraction must be in [0, 1]");
  ProbabilityVolume pv(cv.width, cv.height, cv.planes);
  const int n = cv.num_planes();
  parallel_for_rows(cv.height, [&](int v) {
    for (int u = 0; u < cv.width; ++u) {
      const auto costs = cv.cost_at(u, v);
      const auto valid = cv.valid_at(u, v);
      double best = std::numeric_limits<double>::infinity();
      int n_valid = 0;
      for (int i = 0; i < n; ++i) {
        if (!valid[i]) continue;
        best = std::min(best, costs[i]);
        ++n_valid;
      }
      if (n_valid == 0 || n_valid < min_valid_fraction * n) continue;
      auto p = pv.prob_at(u, v);
      double z = 0.0;
      for (int i = 0; i < n; ++i) {
        if (!valid[i]) continue;
        p[i] = std::exp(-(costs[i] - best) / temperature);
        z += p[i];
      }
      for (int i = 0; i < n; ++i) p[i] /= z;
      pv.pixel_valid(u, v) = 1;
    }
  });
  return pv;
}

/// Expected depth under each pixel's distribution.
inline DepthMap soft_argmin_depth(const ProbabilityVolume& pv) {
  DepthMap out(pv.width, pv.height);
  const int n = pv.num_planes();
  for (int v = 0; v < pv.height; ++v) {
    for (int u = 0; u < pv.width; ++u) {
      if (!pv.pixel_valid(u, v)) continue;
      const auto p = pv.prob_at(u, v);
      double z = 0.0;
      for (int i = 0; i < n; ++i) z += p[i] * pv.planes[i];
      out.z(u, v) = z;
      out.valid(u, v) = 1;
    }
  }
  return out;
}

/// Depth of the lowest-cost valid plane (ties resolve to the nearer plane).
inline DepthMap argmin_depth(const CostVolume& cv) {
  DepthMap out(cv.width, cv.height);
  const int n = cv.num_planes();
  for (int v = 0; v < cv.height; ++v) {
    for (int u = 0; u < cv.width; ++u) {
      const auto costs = cv.cost_at(u, v);
      const auto valid = cv.valid_at(u, v);
      int best = -1;
      for (int i = 0; i < n; ++i)
        if (valid[i] && (best < 0 || costs[i] < costs[best])) best = i;
      if (best < 0) continue;
      out.z(u, v) = cv.planes[best];
      out.valid(u, v) = 1;
    }
  }
  return out;
}

}  // namespace nastereo
