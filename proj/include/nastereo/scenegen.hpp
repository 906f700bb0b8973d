// Copyright 2026 The nastereo Authors.
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include <Eigen/Core>

#include "nastereo/camera.hpp"
#include "nastereo/error.hpp"
#include "nastereo/image.hpp"
#include "nastereo/parallel.hpp"

namespace nastereo {

/// World-frame plane Z = ax * X + ay * Y + b.
struct PlaneSurface {
  double ax = 0.0;
  double ay = 0.0;
  double b = 2.0;
};

struct SphereSurface {
  Eigen::Vector3d center{0.0, 0.0, 4.0};
  double radius = 1.0;
};

enum class TextureKind { kChecker, kValueNoise, kConstant };

/// Solid texture evaluated at world points, so every view sees the same
/// surface pattern.
struct Texture {
  TextureKind kind = TextureKind::kChecker;
  double period = 0.08;  // checker cell size, meters
  double scale = 0.05;   // value-noise lattice spacing, meters
  std::uint64_t seed = 0;
  double value = 0.5;  // constant texture intensity
};

struct SceneSpec {
  std::variant<PlaneSurface, SphereSurface> surface = PlaneSurface{};
  Texture texture;
  int width = 128;
  int height = 128;
  std::vector<Camera> cameras;
  int supersample = 4;  // per-axis sub-rays for image intensity
  /// Half-width, in pixels, of the tent filter the sub-rays are weighted by.
  /// 0.5 with uniform weights would be a box filter; the wider tent keeps the
  /// image smooth enough for accurate bilinear resampling.
  double filter_radius = 1.0;
  double background = 0.0;

  void validate() const;
};

struct RenderedView {
  GrayImage image;
  DepthMap depth_gt;
  NormalMap normal_gt;
  Camera camera;
};

/// SplitMix64 stream.
class SplitMix64 {
 public:
  explicit SplitMix64(std::uint64_t seed) : state_(seed) {}
  std::uint64_t next() {
    std::uint64_t z = (state_ += 0x9E3779B97F4A7C15ull);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
  }
  /// Uniform in (0, 1].
  double uniform_open() { return ((next() >> 11) + 1) * 0x1.0p-53; }
  /// Uniform in [0, 1).
  double uniform() { return (next() >> 11) * 0x1.0p-53; }
  /// Standard normal by Box-Muller (cosine branch).
  double normal() {
    const double r = std::sqrt(-2.0 * std::log(uniform_open()));
    return r * std::cos(2.0 * std::numbers::pi * uniform());
  }

 private:
  std::uint64_t state_;
};

namespace detail {

inline std::uint64_t mix64(std::uint64_t x) {
  x ^= x >> 33;
  x *= 0xFF51AFD7ED558CCDull;
  x ^= x >> 33;
  x *= 0xC4CEB9FE1A85EC53ull;
  return x ^ (x >> 33);
}

inline double lattice_value(std::int64_t i, std::int64_t j, std::int64_t k,
                            std::uint64_t seed) {
  std::uint64_t h = mix64(seed ^ 0x9E3779B97F4A7C15ull);
  h = mix64(h ^ static_cast<std::uint64_t>(i));
  h = mix64(h ^ static_cast<std::uint64_t>(j));
  h = mix64(h ^ static_cast<std::uint64_t>(k));
  return (h >> 11) * 0x1.0p-53;
}

inline double quintic(double t) { return t * t * t * (t * (t * 6.0 - 15.0) + 10.0); }

inline double value_noise(const Eigen::Vector3d& p, double scale, std::uint64_t seed) {
  const Eigen::Vector3d q = p / scale;
  const double fx = std::floor(q.x()), fy = std::floor(q.y()), fz = std::floor(q.z());
  const auto i = static_cast<std::int64_t>(fx);
  const auto j = static_cast<std::int64_t>(fy);
  const auto k = static_cast<std::int64_t>(fz);
  const double tx = quintic(q.x() - fx), ty = quintic(q.y() - fy),
               tz = quintic(q.z() - fz);
  auto lerp = [](double a, double b, double t) { return a + (b - a) * t; };
  double c[2][2];
  for (int dj = 0; dj < 2; ++dj)
    for (int dk = 0; dk < 2; ++dk)
      c[dj][dk] = lerp(lattice_value(i, j + dj, k + dk, seed),
                       lattice_value(i + 1, j + dj, k + dk, seed), tx);
  return lerp(lerp(c[0][0], c[1][0], ty), lerp(c[0][1], c[1][1], ty), tz);
}

inline double texture_at(const Texture& t, const Eigen::Vector3d& p) {
  switch (t.kind) {
    case TextureKind::kChecker: {
      // Irrational phase keeps cell walls off the axes and off regular
      // sampling grids.
      const auto cell = [&](double x, double phase) {
        return static_cast<std::int64_t>(std::floor(x / t.period + phase));
      };
      const std::int64_t parity = cell(p.x(), 0.3819660113) +
                                  cell(p.y(), 0.2360679775) +
                                  cell(p.z(), 0.1458980338);
      return (parity & 1) ? 0.8 : 0.2;
    }
    case TextureKind::kValueNoise: {
      const double coarse = value_noise(p, t.scale, t.seed);
      const double fine = value_noise(p, 0.5 * t.scale, t.seed + 1);
      return (coarse + 0.5 * fine) / 1.5;
    }
    case TextureKind::kConstant:
      return t.value;
  }
  return 0.0;
}

struct SurfaceHit {
  Eigen::Vector3d point;   // world
  Eigen::Vector3d normal;  // world, unit, orientation arbitrary
  double t;                // ray parameter; equals camera-frame depth
};

// Ray c + t * d where d's camera-frame Z component is 1.
inline std::optional<SurfaceHit> intersect(const PlaneSurface& s,
                                           const Eigen::Vector3d& c,
                                           const Eigen::Vector3d& d) {
  const Eigen::Vector3d g(s.ax, s.ay, -1.0);
  const double denom = g.dot(d);
  if (std::abs(denom) < 1e-15) return std::nullopt;
  const double t = -(g.dot(c) + s.b) / denom;
  if (!(t > 0.0)) return std::nullopt;
  return SurfaceHit{c + t * d, g.normalized(), t};
}

inline std::optional<SurfaceHit> intersect(const SphereSurface& s,
                                           const Eigen::Vector3d& c,
                                           const Eigen::Vector3d& d) {
  const Eigen::Vector3d oc = c - s.center;
  const double a = d.squaredNorm();
  const double b = oc.dot(d);
  const double cc = oc.squaredNorm() - s.radius * s.radius;
  const double disc = b * b - a * cc;
  if (disc < 0.0) return std::nullopt;
  const double root = std::sqrt(disc);
  double t = (-b - root) / a;
  if (!(t > 0.0)) t = (-b + root) / a;
  if (!(t > 0.0)) return std::nullopt;
  const Eigen::Vector3d p = c + t * d;
  return SurfaceHit{p, (p - s.center) / s.radius, t};
}

inline std::optional<SurfaceHit> intersect_scene(const SceneSpec& spec,
                                                 const Eigen::Vector3d& c,
                                                 const Eigen::Vector3d& d) {
  return std::visit([&](const auto& s) { return intersect(s, c, d); }, spec.surface);
}

}  // namespace detail

inline void SceneSpec::validate() const {
  if (width <= 0 || height <= 0) throw InputError("scene: image size must be positive");
  if (cameras.empty()) throw InputError("scene: need at least one camera");
  if (supersample < 1) throw InputError("scene: supersample must be >= 1");
  if (!(filter_radius > 0.0)) throw InputError("scene: filter_radius must be > 0");
  if (texture.kind == TextureKind::kChecker && !(texture.period > 0.0))
    throw InputError("scene: texture period must be > 0");
  if (texture.kind == TextureKind::kValueNoise && !(texture.scale > 0.0))
    throw InputError("scene: texture scale must be > 0");
  for (std::size_t i = 0; i < cameras.size(); ++i) {
    const auto& cam = cameras[i];
    cam.intrinsics.validate();
    cam.pose.validate();
    const std::string which = "camera " + std::to_string(i);
    if (const auto* sphere = std::get_if<SphereSurface>(&surface)) {
      if (!(sphere->radius > 0.0)) throw InputError("scene: sphere radius must be > 0");
      const double z = cam.pose.transform(sphere->center).z();
      if (!(z > sphere->radius))
        throw InputError("scene: sphere must lie entirely in front of " + which);
    } else {
      const auto& plane = std::get<PlaneSurface>(surface);
      if (!(plane.b > 0.0)) throw InputError("scene: plane offset b must be > 0");
      const Eigen::Vector3d c = cam.pose.center();
      const Eigen::Vector3d d = cam.pose.rotation.transpose() * Eigen::Vector3d::UnitZ();
      if (!detail::intersect(plane, c, d))
        throw InputError("scene: plane must be in front of " + which);
    }
  }
}

/// Renders every camera of the scene: exact depth and camera-facing normals
/// at pixel centers, and a box-filtered (supersampled) grayscale image of the
/// world-space texture. Pixels whose center ray misses the surface are masked.
inline std::vector<RenderedView> render(const SceneSpec& spec) {
  spec.validate();
  std::vector<RenderedView> views;
  views.reserve(spec.cameras.size());
  const int ss = spec.supersample;
  for (const auto& cam : spec.cameras) {
    RenderedView view;
    view.camera = cam;
    view.image = GrayImage(spec.width, spec.height, spec.background);
    view.depth_gt = DepthMap(spec.width, spec.height);
    view.normal_gt = NormalMap(spec.width, spec.height);
    const Eigen::Matrix3d rt = cam.pose.rotation.transpose();
    const Eigen::Matrix3d kinv = cam.intrinsics.inverse_matrix();
    const Eigen::Vector3d c = cam.pose.center();
    auto ray = [&](double u, double v) -> Eigen::Vector3d {
      return rt * (kinv * Eigen::Vector3d(u, v, 1.0));
    };

    parallel_for_rows(spec.height, [&](int v) {
      for (int u = 0; u < spec.width; ++u) {
        if (auto hit = detail::intersect_scene(spec, c, ray(u, v))) {
          view.depth_gt.z(u, v) = hit->t;
          view.depth_gt.valid(u, v) = 1;
          Eigen::Vector3d n = cam.pose.rotation * hit->normal;
          const Eigen::Vector3d p_cam = cam.pose.transform(hit->point);
          if (n.dot(p_cam) > 0.0) n = -n;
          view.normal_gt.n(u, v) = n.normalized();
          view.normal_gt.valid(u, v) = 1;
        }
        double acc = 0.0;
        double wsum = 0.0;
        const double fr = spec.filter_radius;
        for (int sy = 0; sy < ss; ++sy) {
          for (int sx = 0; sx < ss; ++sx) {
            const double ox = ((sx + 0.5) / ss * 2.0 - 1.0) * fr;
            const double oy = ((sy + 0.5) / ss * 2.0 - 1.0) * fr;
            const double wgt = (1.0 - std::abs(ox) / fr) * (1.0 - std::abs(oy) / fr);
            const auto sub = detail::intersect_scene(spec, c, ray(u + ox, v + oy));
            acc += wgt * (sub ? detail::texture_at(spec.texture, sub->point)
                              : spec.background);
            wsum += wgt;
          }
        }
        view.image(u, v) = acc / wsum;
      }
    });
    views.push_back(std::move(view));
  }
  return views;
}

/// Adds i.i.d. N(0, sigma^2) noise to valid pixels, visiting them in row-major
/// order with a seeded SplitMix64 stream. Results stay >= min_depth.
inline DepthMap add_depth_noise(const DepthMap& d, double sigma, std::uint64_t seed,
                                double min_depth = 1e-6) {
  if (!(sigma >= 0.0)) throw InputError("noise: sigma must be >= 0");
  DepthMap out = d;
  if (sigma == 0.0) return out;
  SplitMix64 rng(seed);
  for (int v = 0; v < d.height(); ++v) {
    for (int u = 0; u < d.width(); ++u) {
      if (!d.is_valid(u, v)) continue;
      out.z(u, v) = std::max(min_depth, d.z(u, v) + sigma * rng.normal());
    }
  }
  return out;
}

/// Convenience rig: reference camera at the world origin looking down +Z and
/// further cameras translated along +X by multiples of `baseline`.
inline std::vector<Camera> stereo_rig(const CameraIntrinsics& k, double baseline,
                                      int views = 2) {
  std::vector<Camera> cams;
  for (int i = 0; i < views; ++i) {
    Camera cam;
    cam.intrinsics = k;
    cam.pose.translation = Eigen::Vector3d(-baseline * i, 0.0, 0.0);
    cams.push_back(cam);
  }
  return cams;
}

}  // namespace nastereo
