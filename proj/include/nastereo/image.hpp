// Copyright 2026 The nastereo Authors.
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cassert>
#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Core>

namespace nastereo {

/// Dense row-major 2D grid. Pixel (u, v) is column u, row v; the origin is
/// the center of the top-left pixel.
template <typename T>
class Image {
 public:
  using value_type = T;

  Image() = default;
  Image(int width, int height, const T& fill = T{})
      : width_(width), height_(height),
        data_(static_cast<std::size_t>(checked_area(width, height)), fill) {}

  int width() const { return width_; }
  int height() const { return height_; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  bool contains(int u, int v) const {
    return u >= 0 && v >= 0 && u < width_ && v < height_;
  }
  bool same_shape(int w, int h) const { return w == width_ && h == height_; }
  template <typename U>
  bool same_shape(const Image<U>& o) const {
    return same_shape(o.width(), o.height());
  }

  T& operator()(int u, int v) {
    assert(contains(u, v));
    return data_[index(u, v)];
  }
  const T& operator()(int u, int v) const {
    assert(contains(u, v));
    return data_[index(u, v)];
  }

  std::span<T> pixels() { return data_; }
  std::span<const T> pixels() const { return data_; }
  std::span<T> row(int v) {
    return std::span<T>(data_).subspan(index(0, v), width_);
  }
  std::span<const T> row(int v) const {
    return std::span<const T>(data_).subspan(index(0, v), width_);
  }

  void fill(const T& value) { std::fill(data_.begin(), data_.end(), value); }

  bool operator==(const Image& o) const = default;

 private:
  static long checked_area(int w, int h) {
    if (w < 0 || h < 0) throw std::invalid_argument("negative image size");
    return static_cast<long>(w) * h;
  }
  std::size_t index(int u, int v) const {
    return static_cast<std::size_t>(v) * width_ + u;
  }

  int width_ = 0;
  int height_ = 0;
  std::vector<T> data_;
};

using Mask = Image<std::uint8_t>;
using GrayImage = Image<double>;
using RgbImage = Image<Eigen::Vector3d>;

/// Per-pixel depth in meters. Z > 0 wherever valid.
struct DepthMap {
  Image<double> z;
  Mask valid;

  DepthMap() = default;
  DepthMap(int width, int height, double fill = 0.0, bool valid_fill = false)
      : z(width, height, fill), valid(width, height, valid_fill ? 1 : 0) {}

  int width() const { return z.width(); }
  int height() const { return z.height(); }
  bool is_valid(int u, int v) const { return valid(u, v) != 0; }
  std::size_t valid_count() const {
    std::size_t n = 0;
    for (auto m : valid.pixels()) n += m != 0;
    return n;
  }
};

/// Per-pixel unit normal in the reference camera frame, facing the camera
/// (n . ray < 0). Invalid pixels hold the zero vector.
struct NormalMap {
  Image<Eigen::Vector3d> n;
  Mask valid;

  NormalMap() = default;
  NormalMap(int width, int height)
      : n(width, height, Eigen::Vector3d::Zero()), valid(width, height, 0) {}

  int width() const { return n.width(); }
  int height() const { return n.height(); }
  bool is_valid(int u, int v) const { return valid(u, v) != 0; }
};

/// Bilinear sample at continuous (u, v). Returns nullopt outside
/// [0, W-1] x [0, H-1]; coordinates within 1e-9 px of an edge are snapped
/// onto it so round-off in upstream warps does not drop border samples.
template <typename T>
std::optional<T> sample_bilinear(const Image<T>& img, double u, double v) {
  constexpr double kEdge = 1e-9;
  const double max_u = img.width() - 1;
  const double max_v = img.height() - 1;
  if (!(u >= -kEdge) || !(v >= -kEdge) || !(u <= max_u + kEdge) || !(v <= max_v + kEdge))
    return std::nullopt;
  u = std::clamp(u, 0.0, max_u);
  v = std::clamp(v, 0.0, max_v);
  int u0 = static_cast<int>(u);
  int v0 = static_cast<int>(v);
  // keep the 2x2 stencil inside the image on the last row/column
  if (u0 == img.width() - 1 && u0 > 0) --u0;
  if (v0 == img.height() - 1 && v0 > 0) --v0;
  const double a = u - u0;
  const double b = v - v0;
  const int u1 = std::min(u0 + 1, img.width() - 1);
  const int v1 = std::min(v0 + 1, img.height() - 1);
  const T top = img(u0, v0) * (1.0 - a) + img(u1, v0) * a;
  const T bottom = img(u0, v1) * (1.0 - a) + img(u1, v1) * a;
  return T(top * (1.0 - b) + bottom * b);
}

}  // namespace nastereo
