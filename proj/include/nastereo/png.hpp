// Copyright 2026 The nastereo Authors.
// SPDX-License-Identifier: Apache-2.0
//
// PNG export for visualization and RGB-D interoperability. Requires libpng.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <memory>
#include <vector>

#include <png.h>

#include "nastereo/error.hpp"
#include "nastereo/image.hpp"

namespace nastereo::io {

namespace detail {

inline void write_png_rows(const std::filesystem::path& path, int width, int height,
                           int bit_depth, int color_type, int bytes_per_pixel,
                           const std::vector<std::uint8_t>& raster) {
  std::unique_ptr<FILE, int (*)(FILE*)> fp(std::fopen(path.c_str(), "wb"), &std::fclose);
  if (!fp) throw InputError("cannot open " + path.string() + " for writing");
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    png_destroy_write_struct(&png, &info);
    throw InputError("libpng initialization failed");
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw InputError("failed writing " + path.string());
  }
  png_init_io(png, fp.get());
  png_set_IHDR(png, info, width, height, bit_depth, color_type, PNG_INTERLACE_NONE,
               PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  const std::size_t stride = static_cast<std::size_t>(width) * bytes_per_pixel;
  for (int v = 0; v < height; ++v)
    png_write_row(png, const_cast<png_bytep>(raster.data() + v * stride));
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

}  // namespace detail

/// 8-bit RGB visualization, channel = (n + 1) / 2 * 255. Invalid pixels are
/// black.
inline void write_normal_png(const std::filesystem::path& path, const NormalMap& n) {
  std::vector<std::uint8_t> raster(static_cast<std::size_t>(n.width()) * n.height() * 3, 0);
  for (int v = 0; v < n.height(); ++v)
    for (int u = 0; u < n.width(); ++u) {
      if (!n.is_valid(u, v)) continue;
      for (int c = 0; c < 3; ++c) {
        const double x = std::clamp((n.n(u, v)[c] + 1.0) * 0.5 * 255.0, 0.0, 255.0);
        raster[(static_cast<std::size_t>(v) * n.width() + u) * 3 + c] =
            static_cast<std::uint8_t>(std::lround(x));
      }
    }
  detail::write_png_rows(path, n.width(), n.height(), 8, PNG_COLOR_TYPE_RGB, 3, raster);
}

/// 16-bit grayscale depth in millimeters; invalid pixels are 0.
inline void write_depth_png_mm(const std::filesystem::path& path, const DepthMap& d) {
  std::vector<std::uint8_t> raster(static_cast<std::size_t>(d.width()) * d.height() * 2, 0);
  for (int v = 0; v < d.height(); ++v)
    for (int u = 0; u < d.width(); ++u) {
      if (!d.is_valid(u, v)) continue;
      const double mm = std::clamp(d.z(u, v) * 1000.0, 0.0, 65535.0);
      const auto q = static_cast<std::uint16_t>(std::lround(mm));
      const std::size_t i = (static_cast<std::size_t>(v) * d.width() + u) * 2;
      raster[i] = static_cast<std::uint8_t>(q >> 8);  // PNG is big-endian
      raster[i + 1] = static_cast<std::uint8_t>(q & 0xFF);
    }
  detail::write_png_rows(path, d.width(), d.height(), 16, PNG_COLOR_TYPE_GRAY, 2, raster);
}

}  // namespace nastereo::io
