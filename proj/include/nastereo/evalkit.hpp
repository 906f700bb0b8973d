// Copyright 2026 The nastereo Authors.
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "nastereo/camera.hpp"
#include "nastereo/error.hpp"
#include "nastereo/image.hpp"
#include "nastereo/normals.hpp"

namespace nastereo {

struct DepthMetrics {
  double abs_rel = 0.0;
  double abs_diff = 0.0;
  double sq_rel = 0.0;
  double rmse = 0.0;
  double rmse_log = 0.0;
  double delta1 = 0.0;
  double delta2 = 0.0;
  double delta3 = 0.0;
  std::size_t pixel_count = 0;
  /// Pixels left out of rmse_log because the prediction was not positive.
  std::size_t log_excluded = 0;
};

struct NormalMetrics {
  double mean_angle = 0.0;
  double median_angle = 0.0;
  double frac_11_25 = 0.0;
  double frac_22_5 = 0.0;
  double frac_30 = 0.0;
  std::size_t pixel_count = 0;
};

struct MetricsReport {
  std::optional<DepthMetrics> depth;
  std::optional<NormalMetrics> normal;
};

/// Standard depth error statistics over pixels valid in both maps with
/// gt > 0. Inlier ratios use strict max(p/g, g/p) < 1.25^i.
inline DepthMetrics depth_metrics(const DepthMap& pred, const DepthMap& gt) {
  if (pred.width() != gt.width() || pred.height() != gt.height())
    throw InputError("depth_metrics: shape mismatch");
  DepthMetrics m;
  double abs_rel = 0, abs_diff = 0, sq_rel = 0, sq = 0, sq_log = 0;
  std::size_t d1 = 0, d2 = 0, d3 = 0, n = 0, n_log = 0;
  constexpr double t1 = 1.25, t2 = 1.25 * 1.25, t3 = 1.25 * 1.25 * 1.25;
  for (int v = 0; v < gt.height(); ++v) {
    for (int u = 0; u < gt.width(); ++u) {
      if (!pred.is_valid(u, v) || !gt.is_valid(u, v)) continue;
      const double p = pred.z(u, v);
      const double g = gt.z(u, v);
      if (!(g > 0.0)) continue;
      const double e = p - g;
      ++n;
      abs_rel += std::abs(e) / g;
      abs_diff += std::abs(e);
      sq_rel += e * e / g;
      sq += e * e;
      if (p > 0.0) {
        const double l = std::log(p) - std::log(g);
        sq_log += l * l;
        ++n_log;
        const double ratio = std::max(p / g, g / p);
        d1 += ratio < t1;
        d2 += ratio < t2;
        d3 += ratio < t3;
      } else {
        ++m.log_excluded;
      }
    }
  }
  if (n == 0) throw InputError("depth_metrics: no jointly valid pixels");
  const double dn = static_cast<double>(n);
  m.pixel_count = n;
  m.abs_rel = abs_rel / dn;
  m.abs_diff = abs_diff / dn;
  m.sq_rel = sq_rel / dn;
  m.rmse = std::sqrt(sq / dn);
  m.rmse_log = n_log ? std::sqrt(sq_log / static_cast<double>(n_log)) : 0.0;
  m.delta1 = static_cast<double>(d1) / dn;
  m.delta2 = static_cast<double>(d2) / dn;
  m.delta3 = static_cast<double>(d3) / dn;
  return m;
}

/// Median; an even count averages the two central order statistics.
inline double median(std::vector<double> values) {
  if (values.empty()) return 0.0;
  const std::size_t mid = values.size() / 2;
  std::nth_element(values.begin(), values.begin() + mid, values.end());
  const double hi = values[mid];
  if (values.size() % 2 == 1) return hi;
  const double lo = *std::max_element(values.begin(), values.begin() + mid);
  return 0.5 * (lo + hi);
}

inline NormalMetrics normal_metrics(const NormalMap& pred, const NormalMap& gt) {
  if (pred.width() != gt.width() || pred.height() != gt.height())
    throw InputError("normal_metrics: shape mismatch");
  std::vector<double> angles;
  for (int v = 0; v < gt.height(); ++v)
    for (int u = 0; u < gt.width(); ++u)
      if (pred.is_valid(u, v) && gt.is_valid(u, v))
        angles.push_back(angle_between(pred.n(u, v), gt.n(u, v)));
  if (angles.empty()) throw InputError("normal_metrics: no jointly valid pixels");
  NormalMetrics m;
  const double n = static_cast<double>(angles.size());
  double sum = 0.0;
  std::size_t a = 0, b = 0, c = 0;
  for (double x : angles) {
    sum += x;
    a += x < 11.25;
    b += x < 22.5;
    c += x < 30.0;
  }
  m.pixel_count = angles.size();
  m.mean_angle = sum / n;
  m.frac_11_25 = a / n;
  m.frac_22_5 = b / n;
  m.frac_30 = c / n;
  m.median_angle = median(std::move(angles));
  return m;
}

struct ViewSelectionParams {
  double theta0 = 5.0;  // degrees
  double sigma1 = 1.0;
  double sigma2 = 10.0;

  void validate() const {
    if (!(sigma1 > 0.0) || !(sigma2 > 0.0))
      throw InputError("view selection: sigma1 and sigma2 must be > 0");
  }
};

/// Piecewise Gaussian favoring baseline angle theta0: width sigma1 below the
/// peak, sigma2 above.
inline double gaussian_weight(double theta, const ViewSelectionParams& p = {}) {
  const double d = theta - p.theta0;
  const double s = theta <= p.theta0 ? p.sigma1 : p.sigma2;
  return std::exp(-d * d / (2.0 * s * s));
}

/// Baseline angle (degrees) subtended at `point` by the two camera centers;
/// nullopt when the point coincides with either center.
inline std::optional<double> baseline_angle(const Point3& point, const Point3& ci,
                                            const Point3& cj) {
  const Eigen::Vector3d a = ci - point;
  const Eigen::Vector3d b = cj - point;
  const double na = a.norm(), nb = b.norm();
  if (!(na > 0.0) || !(nb > 0.0)) return std::nullopt;
  return angle_between(a / na, b / nb);
}

/// View-pair score: sum of gaussian_weight over the baseline angles of the
/// shared world points.
inline double view_pair_score(std::span<const Point3> points, const Point3& ci,
                              const Point3& cj, const ViewSelectionParams& p = {}) {
  p.validate();
  double score = 0.0;
  for (const auto& x : points)
    if (auto theta = baseline_angle(x, ci, cj)) score += gaussian_weight(*theta, p);
  return score;
}

namespace detail {

inline std::string format_metric(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.9g", v);
  return buf;
}

inline std::vector<std::pair<std::string, std::string>> report_fields(
    const MetricsReport& r) {
  std::vector<std::pair<std::string, std::string>> f;
  if (r.depth) {
    const auto& d = *r.depth;
    f.emplace_back("abs_rel", format_metric(d.abs_rel));
    f.emplace_back("abs_diff", format_metric(d.abs_diff));
    f.emplace_back("sq_rel", format_metric(d.sq_rel));
    f.emplace_back("rmse", format_metric(d.rmse));
    f.emplace_back("rmse_log", format_metric(d.rmse_log));
    f.emplace_back("delta1", format_metric(d.delta1));
    f.emplace_back("delta2", format_metric(d.delta2));
    f.emplace_back("delta3", format_metric(d.delta3));
  }
  if (r.normal) {
    const auto& n = *r.normal;
    f.emplace_back("mean_angle", format_metric(n.mean_angle));
    f.emplace_back("median_angle", format_metric(n.median_angle));
    f.emplace_back("frac_11_25", format_metric(n.frac_11_25));
    f.emplace_back("frac_22_5", format_metric(n.frac_22_5));
    f.emplace_back("frac_30", format_metric(n.frac_30));
  }
  std::size_t count = r.depth ? r.depth->pixel_count : 0;
  if (!r.depth && r.normal) count = r.normal->pixel_count;
  f.emplace_back("pixel_count", std::to_string(count));
  return f;
}

}  // namespace detail

/// "key = value" lines, one per field.
inline std::string to_key_value(const MetricsReport& r) {
  std::string out;
  for (const auto& [k, v] : detail::report_fields(r)) out += k + " = " + v + "\n";
  return out;
}

/// Header line plus one data row. Normal columns are absent when the report
/// has no normal part.
inline std::string to_csv(const MetricsReport& r) {
  std::string header, row;
  for (const auto& [k, v] : detail::report_fields(r)) {
    if (!header.empty()) {
      header += ',';
      row += ',';
    }
    header += k;
    row += v;
  }
  return header + "\n" + row + "\n";
}

}  // namespace nastereo
