// Copyright 2026 The nastereo Authors.
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <filesystem>
#include <string>

#include "nastereo/nastereo.hpp"

namespace nastereo::testing {

inline CameraIntrinsics k100() { return {100.0, 100.0, 64.0, 64.0}; }

/// One camera at the origin looking at Z = ax X + ay Y + b.
inline RenderedView render_plane(double ax, double b, const CameraIntrinsics& k = k100(),
                                 int size = 128) {
  SceneSpec spec;
  spec.surface = PlaneSurface{ax, 0.0, b};
  spec.width = spec.height = size;
  spec.cameras = {Camera{k, CameraPose::identity()}};
  return render(spec).front();
}

inline RenderedView render_sphere(const CameraIntrinsics& k = k100(), int size = 128) {
  SceneSpec spec;
  spec.surface = SphereSurface{};
  spec.width = spec.height = size;
  spec.cameras = {Camera{k, CameraPose::identity()}};
  return render(spec).front();
}

inline DepthMap constant_depth(int w, int h, double z) {
  DepthMap d(w, h);
  for (auto& x : d.z.pixels()) x = z;
  for (auto& m : d.valid.pixels()) m = 1;
  return d;
}

inline NormalMap constant_normals(int w, int h, const Eigen::Vector3d& n) {
  NormalMap out(w, h);
  for (auto& x : out.n.pixels()) x = n.normalized();
  for (auto& m : out.valid.pixels()) m = 1;
  return out;
}

/// Fresh empty directory under the system temp dir.
inline std::filesystem::path scratch_dir(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / ("nastereo_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace nastereo::testing
