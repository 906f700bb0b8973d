// Copyright 2026 The nastereo Authors.
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <optional>
#include <stdexcept>

#include <Eigen/Core>
#include <Eigen/LU>

#include "nastereo/error.hpp"

namespace nastereo {

using Point3 = Eigen::Vector3d;

/// Pinhole intrinsics in pixels.
struct CameraIntrinsics {
  double fx = 1.0;
  double fy = 1.0;
  double uc = 0.0;
  double vc = 0.0;

  void validate() const {
    if (!(fx > 0.0) || !(fy > 0.0) || !std::isfinite(fx) || !std::isfinite(fy))
      throw InputError("intrinsics: focal lengths must be positive and finite");
    if (!std::isfinite(uc) || !std::isfinite(vc))
      throw InputError("intrinsics: principal point must be finite");
  }

  Eigen::Matrix3d matrix() const {
    Eigen::Matrix3d k;
    k << fx, 0.0, uc, 0.0, fy, vc, 0.0, 0.0, 1.0;
    return k;
  }
  Eigen::Matrix3d inverse_matrix() const {
    Eigen::Matrix3d k;
    k << 1.0 / fx, 0.0, -uc / fx, 0.0, 1.0 / fy, -vc / fy, 0.0, 0.0, 1.0;
    return k;
  }
};

/// Rigid world-to-camera transform: x_cam = rotation * x_world + translation.
struct CameraPose {
  Eigen::Matrix3d rotation = Eigen::Matrix3d::Identity();
  Eigen::Vector3d translation = Eigen::Vector3d::Zero();

  static CameraPose identity() { return {}; }

  void validate() const {
    const double ortho =
        (rotation * rotation.transpose() - Eigen::Matrix3d::Identity())
            .cwiseAbs()
            .maxCoeff();
    if (!(ortho <= 1e-9) || !(std::abs(rotation.determinant() - 1.0) <= 1e-9))
      throw InputError("pose: rotation must be orthonormal with det +1");
    if (!translation.allFinite())
      throw InputError("pose: translation must be finite");
  }

  Point3 transform(const Point3& p) const { return rotation * p + translation; }

  /// Camera center in world coordinates.
  Point3 center() const { return -rotation.transpose() * translation; }

  CameraPose inverse() const {
    CameraPose out;
    out.rotation = rotation.transpose();
    out.translation = -out.rotation * translation;
    return out;
  }
};

struct Camera {
  CameraIntrinsics intrinsics;
  CameraPose pose;
};

struct PixelCoord {
  double u = 0.0;
  double v = 0.0;
};

/// Transform taking reference-camera coordinates to source-camera coordinates.
inline CameraPose relative_pose(const CameraPose& ref, const CameraPose& src) {
  CameraPose out;
  out.rotation = src.rotation * ref.rotation.transpose();
  out.translation = src.translation - out.rotation * ref.translation;
  return out;
}

inline PixelCoord project(const Point3& p, const CameraIntrinsics& k) {
  if (!(p.z() > 0.0)) throw std::domain_error("project: point has Z <= 0");
  return {k.fx * p.x() / p.z() + k.uc, k.fy * p.y() / p.z() + k.vc};
}

inline Point3 unproject(PixelCoord px, double depth, const CameraIntrinsics& k) {
  if (!(depth > 0.0)) throw std::domain_error("unproject: depth must be > 0");
  return {depth * (px.u - k.uc) / k.fx, depth * (px.v - k.vc) / k.fy, depth};
}

/// Maps reference pixels through the fronto-parallel plane Z = depth into a
/// source view. Precomputes rotation * K_ref^-1 so repeated warps against the
/// same view pair cost one 3x3 product each.
class PlaneWarp {
 public:
  PlaneWarp(const CameraIntrinsics& k_ref, const CameraIntrinsics& k_src,
            const CameraPose& ref_to_src)
      : k_src_(k_src),
        ray_to_src_(ref_to_src.rotation * k_ref.inverse_matrix()),
        t_(ref_to_src.translation) {}

  std::optional<PixelCoord> operator()(PixelCoord px, double plane_depth) const {
    const Point3 q =
        plane_depth * (ray_to_src_ * Eigen::Vector3d(px.u, px.v, 1.0)) + t_;
    if (!(q.z() > 0.0)) return std::nullopt;
    return PixelCoord{k_src_.fx * q.x() / q.z() + k_src_.uc,
                      k_src_.fy * q.y() / q.z() + k_src_.vc};
  }

 private:
  CameraIntrinsics k_src_;
  Eigen::Matrix3d ray_to_src_;
  Eigen::Vector3d t_;
};

/// Unprojects px onto the plane Z = plane_depth of the reference frame, moves
/// the point into the source frame and projects it. Points landing behind
/// the source camera yield nullopt.
inline std::optional<PixelCoord> warp_plane(PixelCoord px, double plane_depth,
                                            const CameraIntrinsics& k_ref,
                                            const CameraIntrinsics& k_src,
                                            const CameraPose& pose_ref_to_src) {
  const Point3 p = unproject(px, plane_depth, k_ref);
  const Point3 q = pose_ref_to_src.transform(p);
  if (!(q.z() > 0.0)) return std::nullopt;
  return project(q, k_src);
}

}  // namespace nastereo
