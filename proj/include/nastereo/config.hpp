// Copyright 2026 The nastereo Authors.
// SPDX-License-Identifier: Apache-2.0
//
// Flat key-value configuration for scenes and pipeline stages.
#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "nastereo/camera.hpp"
#include "nastereo/consistency.hpp"
#include "nastereo/error.hpp"
#include "nastereo/evalkit.hpp"
#include "nastereo/io.hpp"
#include "nastereo/normals.hpp"
#include "nastereo/refine.hpp"
#include "nastereo/scenegen.hpp"
#include "nastereo/sweep.hpp"

namespace nastereo {

/// Scene description file, e.g.
///
///   surface = plane
///   plane = 0.5 0 2          # ax ay b
///   texture = checker
///   texture_period = 0.08
///   intrinsics = 100 100 64 64
///   views = 2
///   baseline = 0.1
///
/// Cameras default to a horizontal rig; camera_<i> = r00 .. r22 tx ty tz
/// replaces the pose of view i.
struct SynthSpec {
  SceneSpec scene;
  /// Extra i.i.d. noise for a noisy depth copy per view; 0 writes none.
  double depth_noise_sigma = 0.0;
  std::uint64_t seed = 0;
};

inline SynthSpec parse_synth_spec(const io::KeyValues& kv) {
  static constexpr std::array<std::string_view, 18> kKnown = {
      "surface",       "plane",      "sphere_center",  "sphere_radius",
      "texture",       "texture_period", "texture_scale", "texture_value",
      "width",         "height",     "intrinsics",     "views",
      "baseline",      "supersample", "filter_radius", "background",
      "depth_noise_sigma", "seed"};
  for (const auto& [key, value] : kv.values()) {
    bool known = false;
    for (auto name : kKnown) known = known || key == name;
    if (!known && key.rfind("camera_", 0) != 0)
      throw InputError(kv.origin() + ": unknown key '" + key + "'");
  }

  SynthSpec out;
  SceneSpec& s = out.scene;
  const std::string surface = kv.get_string("surface", "plane");
  if (surface == "plane") {
    PlaneSurface p;
    if (kv.has("plane")) {
      const auto c = kv.get_doubles("plane", 3);
      p = PlaneSurface{c[0], c[1], c[2]};
    }
    s.surface = p;
  } else if (surface == "sphere") {
    SphereSurface sp;
    if (kv.has("sphere_center")) {
      const auto c = kv.get_doubles("sphere_center", 3);
      sp.center = Eigen::Vector3d(c[0], c[1], c[2]);
    }
    sp.radius = kv.get_double("sphere_radius", sp.radius);
    s.surface = sp;
  } else {
    throw InputError(kv.origin() + ": key 'surface': expected plane or sphere, got '" +
                     surface + "'");
  }

  const std::string texture = kv.get_string("texture", "checker");
  if (texture == "checker") {
    s.texture.kind = TextureKind::kChecker;
  } else if (texture == "noise") {
    s.texture.kind = TextureKind::kValueNoise;
  } else if (texture == "constant") {
    s.texture.kind = TextureKind::kConstant;
  } else {
    throw InputError(kv.origin() +
                     ": key 'texture': expected checker, noise or constant, got '" +
                     texture + "'");
  }
  s.texture.period = kv.get_double("texture_period", s.texture.period);
  s.texture.scale = kv.get_double("texture_scale", s.texture.scale);
  s.texture.value = kv.get_double("texture_value", s.texture.value);
  const int seed = kv.get_int("seed", 0);
  if (seed < 0) throw InputError(kv.origin() + ": key 'seed': must be >= 0");
  out.seed = static_cast<std::uint64_t>(seed);
  s.texture.seed = out.seed;

  s.width = kv.get_int("width", s.width);
  s.height = kv.get_int("height", s.height);
  s.supersample = kv.get_int("supersample", s.supersample);
  s.filter_radius = kv.get_double("filter_radius", s.filter_radius);
  s.background = kv.get_double("background", s.background);
  out.depth_noise_sigma = kv.get_double("depth_noise_sigma", 0.0);
  if (!(out.depth_noise_sigma >= 0.0))
    throw InputError(kv.origin() + ": key 'depth_noise_sigma': must be >= 0");

  CameraIntrinsics k{100.0, 100.0, (s.width - 1) / 2.0, (s.height - 1) / 2.0};
  if (kv.has("intrinsics")) {
    const auto c = kv.get_doubles("intrinsics", 4);
    k = CameraIntrinsics{c[0], c[1], c[2], c[3]};
  }
  const int views = kv.get_int("views", 2);
  if (views < 1) throw InputError(kv.origin() + ": key 'views': must be >= 1");
  s.cameras = stereo_rig(k, kv.get_double("baseline", 0.1), views);
  for (int i = 0; i < views; ++i) {
    const std::string key = "camera_" + std::to_string(i);
    if (!kv.has(key)) continue;
    const auto c = kv.get_doubles(key, 12);
    CameraPose& pose = s.cameras[i].pose;
    for (int r = 0; r < 3; ++r)
      for (int col = 0; col < 3; ++col) pose.rotation(r, col) = c[3 * r + col];
    pose.translation = Eigen::Vector3d(c[9], c[10], c[11]);
  }
  for (const auto& [key, value] : kv.values()) {
    if (key.rfind("camera_", 0) != 0) continue;
    bool used = false;
    for (int i = 0; i < views; ++i) used = used || key == "camera_" + std::to_string(i);
    if (!used) throw InputError(kv.origin() + ": unknown key '" + key + "'");
  }
  try {
    s.validate();
  } catch (const InputError& e) {
    throw InputError(kv.origin() + ": " + e.what());
  }
  return out;
}

/// Pipeline settings shared by the sweep, eval, refine and viewscore
/// commands. Every key is optional.
struct RunConfig {
  PlaneSweepConfig sweep;
  double min_valid_fraction = 1.0;
  DepthNormalConfig depth_normals;
  VolumeNormalConfig volume_normals;
  LossWeights loss;
  RefineConfig refine;
  ViewSelectionParams view_selection;
  std::uint64_t seed = 0;

  void validate() const {
    sweep.validate();
    if (!(min_valid_fraction >= 0.0 && min_valid_fraction <= 1.0))
      throw InputError("config: min_valid_fraction must be in [0, 1]");
    loss.validate();
    refine.validate();
    view_selection.validate();
  }
};

inline MatchingCost parse_cost(const std::string& s) {
  if (s == "zncc") return MatchingCost::kZncc;
  if (s == "sad") return MatchingCost::kSad;
  throw InputError("cost must be sad or zncc, got '" + s + "'");
}

inline ConsistencyTerm parse_loss(const std::string& s) {
  if (s == "lc") return ConsistencyTerm::kPixelSpace;
  if (s == "lt") return ConsistencyTerm::kWorldSpace;
  throw InputError("loss must be lc or lt, got '" + s + "'");
}

inline RunConfig parse_run_config(const io::KeyValues& kv) {
  static constexpr std::array<std::string_view, 29> kKnown = {
      "num_planes",     "depth_min",       "depth_max",       "sampling",
      "cost",           "patch_radius",    "temperature",     "min_valid_fraction",
      "normal_window",  "discontinuity_factor", "volume_band", "lambda_z",
      "lambda_n",       "lambda_c",        "huber_delta",     "max_iters",
      "step_size",      "convergence_tol", "loss",            "backtracking",
      "max_halvings",   "min_depth",       "max_relative_step", "theta0",
      "sigma1",         "sigma2",          "seed",            "min_probability",
      "volume_window"};
  kv.require_known(kKnown);

  RunConfig c;
  auto& sw = c.sweep;
  sw.num_planes = kv.get_int("num_planes", sw.num_planes);
  sw.depth_min = kv.get_double("depth_min", sw.depth_min);
  sw.depth_max = kv.get_double("depth_max", sw.depth_max);
  const std::string sampling = kv.get_string("sampling", "inverse");
  if (sampling == "inverse") {
    sw.sampling = DepthSampling::kInverseDepth;
  } else if (sampling == "uniform") {
    sw.sampling = DepthSampling::kUniform;
  } else {
    throw InputError(kv.origin() + ": key 'sampling': expected inverse or uniform");
  }
  try {
    sw.cost = parse_cost(kv.get_string("cost", "zncc"));
    c.refine.term = parse_loss(kv.get_string("loss", "lc"));
  } catch (const InputError& e) {
    throw InputError(kv.origin() + ": " + e.what());
  }
  sw.patch_radius = kv.get_int("patch_radius", sw.patch_radius);
  sw.temperature = kv.get_double("temperature", sw.temperature);
  c.min_valid_fraction = kv.get_double("min_valid_fraction", c.min_valid_fraction);

  c.depth_normals.window = kv.get_int("normal_window", c.depth_normals.window);
  c.depth_normals.discontinuity_factor =
      kv.get_double("discontinuity_factor", c.depth_normals.discontinuity_factor);
  c.volume_normals.window = kv.get_int("volume_window", c.volume_normals.window);
  c.volume_normals.band = kv.get_int("volume_band", c.volume_normals.band);
  c.volume_normals.min_probability =
      kv.get_double("min_probability", c.volume_normals.min_probability);

  c.loss.lambda_z = kv.get_double("lambda_z", c.loss.lambda_z);
  c.loss.lambda_n = kv.get_double("lambda_n", c.loss.lambda_n);
  c.loss.lambda_c = kv.get_double("lambda_c", c.loss.lambda_c);
  c.loss.huber_delta = kv.get_double("huber_delta", c.loss.huber_delta);

  auto& r = c.refine;
  r.lambda_c = c.loss.lambda_c;
  r.huber_delta = c.loss.huber_delta;
  r.max_iters = kv.get_int("max_iters", r.max_iters);
  r.step_size = kv.get_double("step_size", r.step_size);
  r.convergence_tol = kv.get_double("convergence_tol", r.convergence_tol);
  r.backtracking = kv.get_int("backtracking", r.backtracking ? 1 : 0) != 0;
  r.max_halvings = kv.get_int("max_halvings", r.max_halvings);
  r.min_depth = kv.get_double("min_depth", r.min_depth);
  r.max_relative_step = kv.get_double("max_relative_step", r.max_relative_step);

  c.view_selection.theta0 = kv.get_double("theta0", c.view_selection.theta0);
  c.view_selection.sigma1 = kv.get_double("sigma1", c.view_selection.sigma1);
  c.view_selection.sigma2 = kv.get_double("sigma2", c.view_selection.sigma2);
  const int seed = kv.get_int("seed", 0);
  if (seed < 0) throw InputError(kv.origin() + ": key 'seed': must be >= 0");
  c.seed = static_cast<std::uint64_t>(seed);

  try {
    c.validate();
  } catch (const InputError& e) {
    throw InputError(kv.origin() + ": " + e.what());
  }
  return c;
}

}  // namespace nastereo
