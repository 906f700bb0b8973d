// Copyright 2026 The nastereo Authors.
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <cmath>
#include <optional>
#include <string>
#include <utility>

#include <Eigen/Core>

#include "nastereo/camera.hpp"
#include "nastereo/error.hpp"
#include "nastereo/image.hpp"

namespace nastereo {

/// Depth gradient in meters per pixel.
struct GradientField {
  Image<double> dzdu;
  Image<double> dzdv;
  Mask valid;

  GradientField() = default;
  GradientField(int w, int h) : dzdu(w, h, 0.0), dzdv(w, h, 0.0), valid(w, h, 0) {}
  int width() const { return dzdu.width(); }
  int height() const { return dzdu.height(); }
};

/// World-space surface slopes (dZ/dX, dZ/dY), dimensionless.
struct TangentField {
  Image<double> dzdx;
  Image<double> dzdy;
  Mask valid;

  TangentField() = default;
  TangentField(int w, int h) : dzdx(w, h, 0.0), dzdy(w, h, 0.0), valid(w, h, 0) {}
};

struct LossWeights {
  double lambda_z = 0.7;
  double lambda_n = 3.0;
  double lambda_c = 1.0;
  double huber_delta = 1.0;

  void validate() const {
    if (!(lambda_z >= 0.0) || !(lambda_n >= 0.0) || !(lambda_c >= 0.0))
      throw InputError("loss weights must be >= 0");
    if (!(huber_delta > 0.0)) throw InputError("huber_delta must be > 0");
  }
};

/// Smooth-L1 style Huber: r^2 / (2 delta) inside |r| <= delta, |r| - delta/2
/// outside.
inline double huber(double r, double delta = 1.0) {
  const double a = std::abs(r);
  return a <= delta ? 0.5 * r * r / delta : a - 0.5 * delta;
}

/// d huber / dr.
inline double huber_derivative(double r, double delta = 1.0) {
  if (std::abs(r) <= delta) return r / delta;
  return r > 0.0 ? 1.0 : -1.0;
}

/// Running mean of Huber terms, summed in insertion order so results are
/// reproducible bit for bit.
class HuberMean {
 public:
  explicit HuberMean(double delta) : delta_(delta) {}
  void add(double r) {
    sum_ += huber(r, delta_);
    ++count_;
  }
  std::size_t count() const { return count_; }
  double mean() const { return count_ ? sum_ / static_cast<double>(count_) : 0.0; }

 private:
  double delta_;
  double sum_ = 0.0;
  std::size_t count_ = 0;
};

/// 3x3 Sobel kernels scaled by 1/8 so a linear ramp returns its slope per
/// pixel. Indexed [dv + 1][du + 1].
inline constexpr std::array<std::array<double, 3>, 3> kSobelU{{
    {-1.0 / 8, 0.0, 1.0 / 8},
    {-2.0 / 8, 0.0, 2.0 / 8},
    {-1.0 / 8, 0.0, 1.0 / 8},
}};
inline constexpr std::array<std::array<double, 3>, 3> kSobelV{{
    {-1.0 / 8, -2.0 / 8, -1.0 / 8},
    {0.0, 0.0, 0.0},
    {1.0 / 8, 2.0 / 8, 1.0 / 8},
}};

/// True when the full 3x3 neighborhood of (u, v) is inside and valid.
inline bool sobel_support_valid(const DepthMap& d, int u, int v) {
  if (u < 1 || v < 1 || u + 1 >= d.width() || v + 1 >= d.height()) return false;
  for (int dv = -1; dv <= 1; ++dv)
    for (int du = -1; du <= 1; ++du)
      if (!d.is_valid(u + du, v + dv)) return false;
  return true;
}

/// Gradient estimate from the depth map alone (normalized Sobel).
inline GradientField grad_estimate_sobel(const DepthMap& d) {
  GradientField g(d.width(), d.height());
  for (int v = 0; v < d.height(); ++v) {
    for (int u = 0; u < d.width(); ++u) {
      if (!sobel_support_valid(d, u, v)) continue;
      double gu = 0.0, gv = 0.0;
      for (int dv = -1; dv <= 1; ++dv) {
        for (int du = -1; du <= 1; ++du) {
          const double z = d.z(u + du, v + dv);
          gu += kSobelU[dv + 1][du + 1] * z;
          gv += kSobelV[dv + 1][du + 1] * z;
        }
      }
      g.dzdu(u, v) = gu;
      g.dzdv(u, v) = gv;
      g.valid(u, v) = 1;
    }
  }
  return g;
}

/// Per-pixel factors (cu, cv) with Estimate 2 = (cu * Z, cv * Z). Depend only
/// on the normal and the pixel position; nullopt on grazing normals or a
/// vanishing denominator.
inline std::optional<std::pair<double, double>> normal_gradient_factors(
    const Eigen::Vector3d& n, int u, int v, const CameraIntrinsics& k) {
  if (!(std::abs(n.z()) >= 1e-6)) return std::nullopt;
  const double denom = 1.0 + n.x() * (u - k.uc) / (n.z() * k.fx) +
                       n.y() * (v - k.vc) / (n.z() * k.fy);
  if (!(std::abs(denom) >= 1e-6)) return std::nullopt;
  return std::pair{-n.x() / (n.z() * k.fx) / denom, -n.y() / (n.z() * k.fy) / denom};
}

/// Gradient estimate from depth and normals through the pinhole model.
inline GradientField grad_estimate_normal(const DepthMap& d, const NormalMap& n,
                                          const CameraIntrinsics& k) {
  if (d.width() != n.width() || d.height() != n.height())
    throw InputError("depth and normal maps differ in size");
  GradientField g(d.width(), d.height());
  for (int v = 0; v < d.height(); ++v) {
    for (int u = 0; u < d.width(); ++u) {
      if (!d.is_valid(u, v) || !n.is_valid(u, v)) continue;
      const auto f = normal_gradient_factors(n.n(u, v), u, v, k);
      if (!f) continue;
      const double z = d.z(u, v);
      g.dzdu(u, v) = f->first * z;
      g.dzdv(u, v) = f->second * z;
      g.valid(u, v) = 1;
    }
  }
  return g;
}

/// Pixel-space depth-normal consistency: Huber of the difference between the
/// Sobel and normal-based gradient estimates, averaged over both components
/// of every pixel where both are valid.
inline double loss_consistency(const DepthMap& d, const NormalMap& n,
                               const CameraIntrinsics& k, double delta = 1.0) {
  const GradientField e1 = grad_estimate_sobel(d);
  const GradientField e2 = grad_estimate_normal(d, n, k);
  HuberMean acc(delta);
  for (int v = 0; v < d.height(); ++v) {
    for (int u = 0; u < d.width(); ++u) {
      if (!e1.valid(u, v) || !e2.valid(u, v)) continue;
      acc.add(e1.dzdu(u, v) - e2.dzdu(u, v));
      acc.add(e1.dzdv(u, v) - e2.dzdv(u, v));
    }
  }
  if (acc.count() == 0) throw InputError("L_c: no jointly valid pixels");
  return acc.mean();
}

/// World-space slopes implied by the normals alone.
inline TangentField grad_estimate_tangent(const NormalMap& n) {
  TangentField t(n.width(), n.height());
  for (int v = 0; v < n.height(); ++v) {
    for (int u = 0; u < n.width(); ++u) {
      if (!n.is_valid(u, v)) continue;
      const Eigen::Vector3d& nn = n.n(u, v);
      if (!(std::abs(nn.z()) >= 1e-6)) continue;
      t.dzdx(u, v) = -nn.x() / nn.z();
      t.dzdy(u, v) = -nn.y() / nn.z();
      t.valid(u, v) = 1;
    }
  }
  return t;
}

namespace detail {

// Residuals of the tangent-plane relation dZ = dX * gx + dY * gy over the
// forward neighbor pairs of (u, v). The +u pair is solved for dZ/dX, the +v
// pair for dZ/dY. Calls emit(residual, pair_kind) where kind 0 = +u, 1 = +v.
template <typename Emit>
void tangent_residuals(const DepthMap& d, const TangentField& t,
                       const CameraIntrinsics& k, int u, int v, Emit&& emit) {
  if (!d.is_valid(u, v) || !t.valid(u, v)) return;
  const double z = d.z(u, v);
  const double x = z * (u - k.uc) / k.fx;
  const double y = z * (v - k.vc) / k.fy;
  const double gx = t.dzdx(u, v);
  const double gy = t.dzdy(u, v);
  if (u + 1 < d.width() && d.is_valid(u + 1, v)) {
    const double zq = d.z(u + 1, v);
    const double dz = zq - z;
    const double dx = zq * (u + 1 - k.uc) / k.fx - x;
    const double dy = zq * (v - k.vc) / k.fy - y;
    if (std::abs(dx) >= 1e-9) emit((dz - dy * gy) / dx - gx, 0);
  }
  if (v + 1 < d.height() && d.is_valid(u, v + 1)) {
    const double zq = d.z(u, v + 1);
    const double dz = zq - z;
    const double dx = zq * (u - k.uc) / k.fx - x;
    const double dy = zq * (v + 1 - k.vc) / k.fy - y;
    if (std::abs(dy) >= 1e-9) emit((dz - dx * gx) / dy - gy, 1);
  }
}

}  // namespace detail

/// World-space consistency baseline: finite-difference slopes between
/// unprojected forward neighbors against the normal-implied slopes.
inline double loss_tangent(const DepthMap& d, const NormalMap& n,
                           const CameraIntrinsics& k, double delta = 1.0) {
  if (d.width() != n.width() || d.height() != n.height())
    throw InputError("depth and normal maps differ in size");
  const TangentField t = grad_estimate_tangent(n);
  HuberMean acc(delta);
  for (int v = 0; v < d.height(); ++v)
    for (int u = 0; u < d.width(); ++u)
      detail::tangent_residuals(d, t, k, u, v, [&](double r, int) { acc.add(r); });
  if (acc.count() == 0) throw InputError("L_t: no valid neighbor pairs");
  return acc.mean();
}

struct LossBreakdown {
  double l_z = 0.0;
  double l_n = 0.0;
  double total = 0.0;
};

/// Supervised loss: L_z = H(Z2 - Zgt) + lambda_z H(Z1 - Zgt),
/// L_n = H(n - n_gt), L = L_z + lambda_n L_n. Each H is a mean over the
/// jointly valid elements (three components per normal).
inline LossBreakdown loss_total(const DepthMap& d1, const DepthMap& d2,
                                const DepthMap& d_gt, const NormalMap& n,
                                const NormalMap& n_gt, const LossWeights& w) {
  w.validate();
  const int width = d_gt.width();
  const int height = d_gt.height();
  for (const DepthMap* d : {&d1, &d2})
    if (d->width() != width || d->height() != height)
      throw InputError("loss_total: depth maps differ in size");
  if (n.width() != width || n.height() != height || n_gt.width() != width ||
      n_gt.height() != height)
    throw InputError("loss_total: normal maps differ in size");

  HuberMean z2(w.huber_delta), z1(w.huber_delta), nn(w.huber_delta);
  for (int v = 0; v < height; ++v) {
    for (int u = 0; u < width; ++u) {
      if (!d_gt.is_valid(u, v)) continue;
      if (d2.is_valid(u, v)) z2.add(d2.z(u, v) - d_gt.z(u, v));
      if (d1.is_valid(u, v)) z1.add(d1.z(u, v) - d_gt.z(u, v));
    }
  }
  for (int v = 0; v < height; ++v) {
    for (int u = 0; u < width; ++u) {
      if (!n.is_valid(u, v) || !n_gt.is_valid(u, v)) continue;
      const Eigen::Vector3d r = n.n(u, v) - n_gt.n(u, v);
      for (int c = 0; c < 3; ++c) nn.add(r[c]);
    }
  }
  if (z2.count() == 0 || z1.count() == 0)
    throw InputError("loss_total: no valid depth pixels");
  if (nn.count() == 0) throw InputError("loss_total: no valid normal pixels");

  LossBreakdown out;
  out.l_z = z2.mean() + w.lambda_z * z1.mean();
  out.l_n = nn.mean();
  out.total = out.l_z + w.lambda_n * out.l_n;
  return out;
}

}  // namespace nastereo
