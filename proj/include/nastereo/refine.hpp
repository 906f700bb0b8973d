// Copyright 2026 The nastereo Authors.
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "nastereo/camera.hpp"
#include "nastereo/consistency.hpp"
#include "nastereo/error.hpp"
#include "nastereo/image.hpp"

namespace nastereo {

enum class ConsistencyTerm { kPixelSpace, kWorldSpace };

struct RefineConfig {
  double lambda_c = 1.0;
  int max_iters = 200;
  /// Step in per-pixel units: the update is Z -= step_size * N * grad(E),
  /// N being the number of valid pixels, so the step does not depend on the
  /// mean reduction of the objective.
  double step_size = 1.0;
  double convergence_tol = 1e-9;
  /// Normals are held fixed; joint normal refinement is not supported.
  bool fix_normals = true;
  ConsistencyTerm term = ConsistencyTerm::kPixelSpace;
  double huber_delta = 1.0;
  bool backtracking = true;
  int max_halvings = 40;
  double min_depth = 1e-6;
  /// Trust region: no pixel moves by more than this fraction of its current
  /// depth in one step. 0 disables the cap.
  double max_relative_step = 0.05;

  void validate() const {
    if (!(lambda_c >= 0.0)) throw InputError("refine: lambda_c must be >= 0");
    if (max_iters < 1) throw InputError("refine: max_iters must be >= 1");
    if (!(step_size > 0.0)) throw InputError("refine: step_size must be > 0");
    if (!(convergence_tol >= 0.0))
      throw InputError("refine: convergence_tol must be >= 0");
    if (!fix_normals) throw InputError("refine: only fixed normals are supported");
    if (!(huber_delta > 0.0)) throw InputError("refine: huber_delta must be > 0");
    if (!(min_depth > 0.0)) throw InputError("refine: min_depth must be > 0");
    if (!(max_relative_step >= 0.0))
      throw InputError("refine: max_relative_step must be >= 0");
  }
};

struct RefineIteration {
  int iter = 0;
  double objective = 0.0;
  double data_term = 0.0;
  double consistency_term = 0.0;
};

struct RefineResult {
  DepthMap depth;
  std::vector<RefineIteration> trace;
  bool converged = false;
};

/// Thrown when the objective rises for five consecutive accepted steps.
class DivergenceError : public NumericalError {
 public:
  DivergenceError(const std::string& what, std::vector<RefineIteration> trace)
      : NumericalError(what), trace_(std::move(trace)) {}
  const std::vector<RefineIteration>& trace() const { return trace_; }

 private:
  std::vector<RefineIteration> trace_;
};

struct ObjectiveValue {
  double total = 0.0;
  double data = 0.0;
  double consistency = 0.0;
  Image<double> gradient;  // empty unless requested
};

/// E(Z) = H(Z - Z_raw) + lambda_c * C(Z), with C the pixel-space (L_c) or
/// world-space (L_t) consistency loss, and its analytic gradient. The Sobel
/// part of the L_c gradient is the adjoint stencil; pixels without full Sobel
/// support have no consistency residual of their own.
class RefineObjective {
 public:
  RefineObjective(const DepthMap& raw, const NormalMap& normals,
                  const CameraIntrinsics& k, const RefineConfig& cfg)
      : raw_(raw), k_(k), cfg_(cfg), tangent_(grad_estimate_tangent(normals)) {
    if (raw.width() != normals.width() || raw.height() != normals.height())
      throw InputError("refine: depth and normal maps differ in size");
    const int w = raw.width(), h = raw.height();
    factors_ = Image<std::optional<std::pair<double, double>>>(w, h);
    for (int v = 0; v < h; ++v) {
      for (int u = 0; u < w; ++u) {
        if (!raw.is_valid(u, v)) continue;
        ++valid_count_;
        if (!normals.is_valid(u, v) || !sobel_support_valid(raw, u, v)) continue;
        factors_(u, v) = normal_gradient_factors(normals.n(u, v), u, v, k);
        if (factors_(u, v)) ++residual_pixels_;
      }
    }
  }

  std::size_t valid_count() const { return valid_count_; }

  ObjectiveValue evaluate(const Image<double>& z, bool with_gradient) const {
    const int w = raw_.width(), h = raw_.height();
    const double delta = cfg_.huber_delta;
    ObjectiveValue out;
    if (with_gradient) out.gradient = Image<double>(w, h, 0.0);

    double data_sum = 0.0;
    for (int v = 0; v < h; ++v) {
      for (int u = 0; u < w; ++u) {
        if (!raw_.is_valid(u, v)) continue;
        const double r = z(u, v) - raw_.z(u, v);
        data_sum += huber(r, delta);
        if (with_gradient)
          out.gradient(u, v) += huber_derivative(r, delta) / valid_count_;
      }
    }
    out.data = valid_count_ ? data_sum / valid_count_ : 0.0;

    if (cfg_.lambda_c > 0.0) {
      out.consistency = cfg_.term == ConsistencyTerm::kPixelSpace
                            ? pixel_space(z, with_gradient ? &out.gradient : nullptr)
                            : world_space(z, with_gradient ? &out.gradient : nullptr);
    }
    out.total = out.data + cfg_.lambda_c * out.consistency;
    return out;
  }

 private:
  double pixel_space(const Image<double>& z, Image<double>* grad) const {
    if (residual_pixels_ == 0) return 0.0;
    const double scale = 1.0 / (2.0 * static_cast<double>(residual_pixels_));
    const double delta = cfg_.huber_delta;
    const double lambda = cfg_.lambda_c;
    double sum = 0.0;
    for (int v = 0; v < z.height(); ++v) {
      for (int u = 0; u < z.width(); ++u) {
        const auto& f = factors_(u, v);
        if (!f) continue;
        double su = 0.0, sv = 0.0;
        for (int dv = -1; dv <= 1; ++dv) {
          for (int du = -1; du <= 1; ++du) {
            su += kSobelU[dv + 1][du + 1] * z(u + du, v + dv);
            sv += kSobelV[dv + 1][du + 1] * z(u + du, v + dv);
          }
        }
        const double ru = su - f->first * z(u, v);
        const double rv = sv - f->second * z(u, v);
        sum += huber(ru, delta) + huber(rv, delta);
        if (!grad) continue;
        const double gu = lambda * scale * huber_derivative(ru, delta);
        const double gv = lambda * scale * huber_derivative(rv, delta);
        for (int dv = -1; dv <= 1; ++dv)
          for (int du = -1; du <= 1; ++du)
            (*grad)(u + du, v + dv) +=
                gu * kSobelU[dv + 1][du + 1] + gv * kSobelV[dv + 1][du + 1];
        (*grad)(u, v) -= gu * f->first + gv * f->second;
      }
    }
    return sum * scale;
  }

  double world_space(const Image<double>& z, Image<double>* grad) const {
    const int w = z.width(), h = z.height();
    const double delta = cfg_.huber_delta;
    const auto& k = k_;
    // Terms are collected first: the mean needs their count before any
    // gradient contribution can be scaled.
    struct Term {
      int u, v, qu, qv;
      double r, dr_dp, dr_dq;
    };
    std::vector<Term> terms;
    for (int v = 0; v < h; ++v) {
      for (int u = 0; u < w; ++u) {
        if (!raw_.is_valid(u, v) || !tangent_.valid(u, v)) continue;
        const double zp = z(u, v);
        const double gx = tangent_.dzdx(u, v);
        const double gy = tangent_.dzdy(u, v);
        if (u + 1 < w && raw_.is_valid(u + 1, v)) {
          const double zq = z(u + 1, v);
          const double dz = zq - zp;
          const double dx = (zq * (u + 1 - k.uc) - zp * (u - k.uc)) / k.fx;
          if (std::abs(dx) >= 1e-9) {
            const double kappa = 1.0 - (v - k.vc) * gy / k.fy;
            const double r = kappa * dz / dx - gx;
            const double dq = kappa * (dx - dz * (u + 1 - k.uc) / k.fx) / (dx * dx);
            const double dp = kappa * (-dx + dz * (u - k.uc) / k.fx) / (dx * dx);
            terms.push_back({u, v, u + 1, v, r, dp, dq});
          }
        }
        if (v + 1 < h && raw_.is_valid(u, v + 1)) {
          const double zq = z(u, v + 1);
          const double dz = zq - zp;
          const double dy = (zq * (v + 1 - k.vc) - zp * (v - k.vc)) / k.fy;
          if (std::abs(dy) >= 1e-9) {
            const double kappa = 1.0 - (u - k.uc) * gx / k.fx;
            const double r = kappa * dz / dy - gy;
            const double dq = kappa * (dy - dz * (v + 1 - k.vc) / k.fy) / (dy * dy);
            const double dp = kappa * (-dy + dz * (v - k.vc) / k.fy) / (dy * dy);
            terms.push_back({u, v, u, v + 1, r, dp, dq});
          }
        }
      }
    }
    if (terms.empty()) return 0.0;
    const double scale = 1.0 / static_cast<double>(terms.size());
    double sum = 0.0;
    for (const auto& t : terms) {
      sum += huber(t.r, delta);
      if (!grad) continue;
      const double g = cfg_.lambda_c * scale * huber_derivative(t.r, delta);
      (*grad)(t.u, t.v) += g * t.dr_dp;
      (*grad)(t.qu, t.qv) += g * t.dr_dq;
    }
    return sum * scale;
  }

  const DepthMap& raw_;
  CameraIntrinsics k_;
  RefineConfig cfg_;
  TangentField tangent_;
  Image<std::optional<std::pair<double, double>>> factors_;
  std::size_t valid_count_ = 0;
  std::size_t residual_pixels_ = 0;
};

/// Gradient descent on RefineObjective with halving backtracking. The trace
/// holds the objective before the first step and after every accepted step.
inline RefineResult refine_depth(const DepthMap& raw, const NormalMap& normals,
                                 const CameraIntrinsics& k, const RefineConfig& cfg) {
  cfg.validate();
  k.validate();
  for (int v = 0; v < raw.height(); ++v)
    for (int u = 0; u < raw.width(); ++u)
      if (raw.is_valid(u, v) && !(raw.z(u, v) > 0.0 && std::isfinite(raw.z(u, v))))
        throw InputError("refine: input depth must be positive on valid pixels");

  const RefineObjective objective(raw, normals, k, cfg);
  RefineResult result;
  result.depth = raw;
  if (objective.valid_count() == 0) {
    result.converged = true;
    return result;
  }
  const double n_valid = static_cast<double>(objective.valid_count());

  Image<double>& z = result.depth.z;
  ObjectiveValue cur = objective.evaluate(z, true);
  result.trace.push_back({0, cur.total, cur.data, cur.consistency});

  auto take_step = [&](double alpha) {
    Image<double> next = z;
    for (int v = 0; v < z.height(); ++v)
      for (int u = 0; u < z.width(); ++u)
        if (raw.is_valid(u, v)) {
          double step = alpha * n_valid * cur.gradient(u, v);
          if (cfg.max_relative_step > 0.0) {
            const double cap = cfg.max_relative_step * z(u, v);
            step = std::clamp(step, -cap, cap);
          }
          next(u, v) = std::max(cfg.min_depth, z(u, v) - step);
        }
    return next;
  };

  double alpha = cfg.step_size;
  int rising = 0;
  for (int it = 1; it <= cfg.max_iters; ++it) {
    for (double g : cur.gradient.pixels())
      if (!std::isfinite(g)) throw NumericalError("refine: non-finite gradient");

    Image<double> next;
    ObjectiveValue val;
    bool accepted = false;
    if (cfg.backtracking) {
      for (int halving = 0; halving <= cfg.max_halvings; ++halving) {
        next = take_step(alpha);
        val = objective.evaluate(next, true);
        if (val.total <= cur.total) {
          accepted = true;
          break;
        }
        alpha *= 0.5;
      }
      if (!accepted) {
        // no descent at any tried step length: stationary to working precision
        result.converged = true;
        break;
      }
    } else {
      next = take_step(alpha);
      val = objective.evaluate(next, true);
    }
    if (!std::isfinite(val.total)) throw NumericalError("refine: non-finite objective");

    const double prev = cur.total;
    z = std::move(next);
    cur = std::move(val);
    result.trace.push_back({it, cur.total, cur.data, cur.consistency});

    if (cur.total > prev) {
      if (++rising >= 5)
        throw DivergenceError("refine: objective increased for 5 iterations",
                              result.trace);
    } else {
      rising = 0;
    }
    if (cfg.backtracking) alpha = std::min(cfg.step_size, 2.0 * alpha);
    const double decrease = prev - cur.total;
    if (cur.total == 0.0 || (decrease >= 0.0 && decrease <= cfg.convergence_tol * prev)) {
      result.converged = true;
      break;
    }
  }
  return result;
}

}  // namespace nastereo
