// Copyright 2026 The nastereo Authors.
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "nastereo/camera.hpp"
#include "nastereo/error.hpp"
#include "nastereo/image.hpp"
#include "nastereo/sweep.hpp"

namespace nastereo::io {

namespace fs = std::filesystem;

// ---------------------------------------------------------------------------
// PFM
//
// "Pf" (one channel) or "PF" (three channels), then "width height", then a
// scale whose sign gives the byte order (negative = little-endian). Rows are
// stored bottom-up. Written files are always little-endian with scale -1.
// ---------------------------------------------------------------------------

struct PfmImage {
  int width = 0;
  int height = 0;
  int channels = 1;
  std::vector<float> data;  // top-down, row-major, interleaved channels

  float at(int u, int v, int c = 0) const {
    return data[(static_cast<std::size_t>(v) * width + u) * channels + c];
  }
};

inline void write_pfm(const fs::path& path, const PfmImage& img) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw InputError("cannot open " + path.string() + " for writing");
  f << (img.channels == 3 ? "PF" : "Pf") << '\n'
    << img.width << ' ' << img.height << '\n'
    << "-1.0\n";
  const std::size_t row = static_cast<std::size_t>(img.width) * img.channels;
  std::vector<unsigned char> bytes(row * sizeof(float));
  for (int v = img.height - 1; v >= 0; --v) {
    for (std::size_t i = 0; i < row; ++i) {
      std::uint32_t bits = std::bit_cast<std::uint32_t>(img.data[v * row + i]);
      for (int b = 0; b < 4; ++b) bytes[i * 4 + b] = (bits >> (8 * b)) & 0xFF;
    }
    f.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
  }
  if (!f) throw InputError("failed writing " + path.string());
}

inline PfmImage read_pfm(const fs::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw InputError("cannot open " + path.string());
  std::string magic;
  f >> magic;
  PfmImage img;
  if (magic == "Pf") {
    img.channels = 1;
  } else if (magic == "PF") {
    img.channels = 3;
  } else {
    throw InputError(path.string() + ": not a PFM file (bad magic)");
  }
  double scale = 0.0;
  f >> img.width >> img.height >> scale;
  if (!f || img.width <= 0 || img.height <= 0 || scale == 0.0)
    throw InputError(path.string() + ": malformed PFM header");
  f.get();  // single whitespace before the raster
  const bool little = scale < 0.0;
  const std::size_t row = static_cast<std::size_t>(img.width) * img.channels;
  img.data.resize(row * img.height);
  std::vector<unsigned char> bytes(row * sizeof(float));
  for (int v = img.height - 1; v >= 0; --v) {
    f.read(reinterpret_cast<char*>(bytes.data()),
           static_cast<std::streamsize>(bytes.size()));
    if (!f) throw InputError(path.string() + ": truncated PFM raster");
    for (std::size_t i = 0; i < row; ++i) {
      std::uint32_t bits = 0;
      for (int b = 0; b < 4; ++b) {
        const int shift = little ? 8 * b : 8 * (3 - b);
        bits |= static_cast<std::uint32_t>(bytes[i * 4 + b]) << shift;
      }
      img.data[v * row + i] = std::bit_cast<float>(bits);
    }
  }
  return img;
}

/// Invalid pixels are written as 0.
inline void write_depth_pfm(const fs::path& path, const DepthMap& d) {
  PfmImage img{d.width(), d.height(), 1, {}};
  img.data.resize(static_cast<std::size_t>(d.width()) * d.height());
  for (int v = 0; v < d.height(); ++v)
    for (int u = 0; u < d.width(); ++u)
      img.data[static_cast<std::size_t>(v) * d.width() + u] =
          d.is_valid(u, v) ? static_cast<float>(d.z(u, v)) : 0.0f;
  write_pfm(path, img);
}

/// Pixels that are positive and finite are valid.
inline DepthMap read_depth_pfm(const fs::path& path) {
  const PfmImage img = read_pfm(path);
  if (img.channels != 1) throw InputError(path.string() + ": expected 1-channel PFM");
  DepthMap d(img.width, img.height);
  for (int v = 0; v < img.height; ++v) {
    for (int u = 0; u < img.width; ++u) {
      const double z = img.at(u, v);
      if (std::isfinite(z) && z > 0.0) {
        d.z(u, v) = z;
        d.valid(u, v) = 1;
      }
    }
  }
  return d;
}

/// Invalid pixels are written as the zero vector.
inline void write_normal_pfm(const fs::path& path, const NormalMap& n) {
  PfmImage img{n.width(), n.height(), 3, {}};
  img.data.resize(static_cast<std::size_t>(n.width()) * n.height() * 3);
  for (int v = 0; v < n.height(); ++v)
    for (int u = 0; u < n.width(); ++u)
      for (int c = 0; c < 3; ++c)
        img.data[(static_cast<std::size_t>(v) * n.width() + u) * 3 + c] =
            n.is_valid(u, v) ? static_cast<float>(n.n(u, v)[c]) : 0.0f;
  write_pfm(path, img);
}

/// Non-zero finite vectors are valid; they are renormalized after the float
/// round trip.
inline NormalMap read_normal_pfm(const fs::path& path) {
  const PfmImage img = read_pfm(path);
  if (img.channels != 3) throw InputError(path.string() + ": expected 3-channel PFM");
  NormalMap n(img.width, img.height);
  for (int v = 0; v < img.height; ++v) {
    for (int u = 0; u < img.width; ++u) {
      const Eigen::Vector3d x(img.at(u, v, 0), img.at(u, v, 1), img.at(u, v, 2));
      const double norm = x.norm();
      if (std::isfinite(norm) && norm > 1e-6) {
        n.n(u, v) = x / norm;
        n.valid(u, v) = 1;
      }
    }
  }
  return n;
}

inline void write_gray_pfm(const fs::path& path, const Image<double>& g) {
  PfmImage img{g.width(), g.height(), 1, {}};
  img.data.reserve(g.size());
  for (double x : g.pixels()) img.data.push_back(static_cast<float>(x));
  write_pfm(path, img);
}

// ---------------------------------------------------------------------------
// PGM (binary P5, 8 or 16 bit, big-endian samples)
// ---------------------------------------------------------------------------

/// Intensities in [0, 1] are clamped and quantized to maxval.
inline void write_pgm(const fs::path& path, const GrayImage& img, int maxval = 65535) {
  if (maxval != 255 && maxval != 65535) throw InputError("pgm: maxval must be 255 or 65535");
  std::ofstream f(path, std::ios::binary);
  if (!f) throw InputError("cannot open " + path.string() + " for writing");
  f << "P5\n" << img.width() << ' ' << img.height() << '\n' << maxval << '\n';
  for (double x : img.pixels()) {
    const double c = std::clamp(x, 0.0, 1.0);
    const auto q = static_cast<unsigned>(std::lround(c * maxval));
    if (maxval == 255) {
      f.put(static_cast<char>(q));
    } else {
      f.put(static_cast<char>(q >> 8));
      f.put(static_cast<char>(q & 0xFF));
    }
  }
  if (!f) throw InputError("failed writing " + path.string());
}

inline void write_mask_pgm(const fs::path& path, const Mask& m) {
  GrayImage g(m.width(), m.height());
  for (int v = 0; v < m.height(); ++v)
    for (int u = 0; u < m.width(); ++u) g(u, v) = m(u, v) ? 1.0 : 0.0;
  write_pgm(path, g, 255);
}

inline GrayImage read_pgm(const fs::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw InputError("cannot open " + path.string());
  auto token = [&]() {
    std::string t;
    while (f >> std::ws && f.peek() == '#') {
      std::string line;
      std::getline(f, line);
    }
    f >> t;
    return t;
  };
  if (token() != "P5") throw InputError(path.string() + ": not a binary PGM");
  int w = 0, h = 0, maxval = 0;
  try {
    w = std::stoi(token());
    h = std::stoi(token());
    maxval = std::stoi(token());
  } catch (...) {
    throw InputError(path.string() + ": malformed PGM header");
  }
  if (w <= 0 || h <= 0 || maxval <= 0 || maxval > 65535)
    throw InputError(path.string() + ": malformed PGM header");
  f.get();
  GrayImage img(w, h);
  const bool wide = maxval > 255;
  for (auto& x : img.pixels()) {
    unsigned q = static_cast<unsigned char>(f.get());
    if (wide) q = (q << 8) | static_cast<unsigned char>(f.get());
    x = static_cast<double>(q) / maxval;
  }
  if (!f) throw InputError(path.string() + ": truncated PGM raster");
  return img;
}

// ---------------------------------------------------------------------------
// Camera text file: "fx fy uc vc", three rotation rows, translation.
// ---------------------------------------------------------------------------

inline std::string format_double(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

inline void write_camera(const fs::path& path, const Camera& cam) {
  std::ofstream f(path);
  if (!f) throw InputError("cannot open " + path.string() + " for writing");
  const auto& k = cam.intrinsics;
  f << format_double(k.fx) << ' ' << format_double(k.fy) << ' ' << format_double(k.uc)
    << ' ' << format_double(k.vc) << '\n';
  for (int r = 0; r < 3; ++r)
    f << format_double(cam.pose.rotation(r, 0)) << ' '
      << format_double(cam.pose.rotation(r, 1)) << ' '
      << format_double(cam.pose.rotation(r, 2)) << '\n';
  f << format_double(cam.pose.translation.x()) << ' '
    << format_double(cam.pose.translation.y()) << ' '
    << format_double(cam.pose.translation.z()) << '\n';
}

inline Camera read_camera(const fs::path& path) {
  std::ifstream f(path);
  if (!f) throw InputError("cannot open camera file " + path.string());
  std::vector<double> values;
  std::string line;
  int lines = 0;
  while (std::getline(f, line)) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    ++lines;
    std::istringstream ss(line);
    std::string tok;
    while (ss >> tok) {
      try {
        std::size_t used = 0;
        values.push_back(std::stod(tok, &used));
        if (used != tok.size()) throw std::invalid_argument(tok);
      } catch (...) {
        throw InputError(path.string() + ": bad number '" + tok + "'");
      }
    }
  }
  if (lines != 5 || values.size() != 16)
    throw InputError(path.string() + ": expected 5 lines with 4+3+3+3+3 numbers");
  Camera cam;
  cam.intrinsics = {values[0], values[1], values[2], values[3]};
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 3; ++c) cam.pose.rotation(r, c) = values[4 + 3 * r + c];
  cam.pose.translation = {values[13], values[14], values[15]};
  try {
    cam.intrinsics.validate();
    cam.pose.validate();
  } catch (const InputError& e) {
    throw InputError(path.string() + ": " + e.what());
  }
  return cam;
}

// ---------------------------------------------------------------------------
// Flat key-value configuration: "key = value", '#' starts a comment.
// ---------------------------------------------------------------------------

class KeyValues {
 public:
  static KeyValues parse(std::istream& in, const std::string& origin) {
    KeyValues kv;
    kv.origin_ = origin;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
      const auto first = line.find_first_not_of(" \t\r");
      if (first == std::string::npos) continue;
      const auto eq = line.find('=');
      if (eq == std::string::npos)
        throw InputError(origin + ":" + std::to_string(lineno) + ": expected key = value");
      std::string key = trim(line.substr(0, eq));
      std::string value = trim(line.substr(eq + 1));
      if (key.empty())
        throw InputError(origin + ":" + std::to_string(lineno) + ": empty key");
      kv.values_[key] = value;
    }
    return kv;
  }

  static KeyValues load(const fs::path& path) {
    std::ifstream f(path);
    if (!f) throw InputError("cannot open config " + path.string());
    return parse(f, path.string());
  }

  bool has(const std::string& key) const { return values_.count(key) != 0; }
  const std::map<std::string, std::string>& values() const { return values_; }
  const std::string& origin() const { return origin_; }

  std::string get_string(const std::string& key, const std::string& fallback) const {
    auto it = values_.find(key);
    return it == values_.end() ? fallback : it->second;
  }

  double get_double(const std::string& key, double fallback) const {
    auto it = values_.find(key);
    if (it == values_.end()) return fallback;
    return parse_double(key, it->second);
  }

  int get_int(const std::string& key, int fallback) const {
    auto it = values_.find(key);
    if (it == values_.end()) return fallback;
    try {
      std::size_t used = 0;
      const int v = std::stoi(it->second, &used);
      if (used != it->second.size()) throw std::invalid_argument(key);
      return v;
    } catch (...) {
      throw InputError(origin_ + ": key '" + key + "': expected an integer");
    }
  }

  std::vector<double> get_doubles(const std::string& key, std::size_t count) const {
    auto it = values_.find(key);
    if (it == values_.end()) throw InputError(origin_ + ": missing key '" + key + "'");
    std::istringstream ss(it->second);
    std::vector<double> out;
    std::string tok;
    while (ss >> tok) out.push_back(parse_double(key, tok));
    if (out.size() != count)
      throw InputError(origin_ + ": key '" + key + "': expected " +
                       std::to_string(count) + " numbers");
    return out;
  }

  /// Throws naming the first key not in `known`.
  template <typename Range>
  void require_known(const Range& known) const {
    for (const auto& [k, v] : values_) {
      bool found = false;
      for (const auto& name : known) found = found || k == name;
      if (!found) throw InputError(origin_ + ": unknown key '" + k + "'");
    }
  }

 private:
  static std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
  }

  double parse_double(const std::string& key, const std::string& text) const {
    try {
      std::size_t used = 0;
      const double v = std::stod(text, &used);
      if (used != text.size() || !std::isfinite(v)) throw std::invalid_argument(key);
      return v;
    } catch (...) {
      throw InputError(origin_ + ": key '" + key + "': expected a number, got '" + text +
                       "'");
    }
  }

  std::string origin_;
  std::map<std::string, std::string> values_;
};

// ---------------------------------------------------------------------------
// Volume export: one 1-channel PFM per plane plus planes.txt.
// ---------------------------------------------------------------------------

inline std::string slice_name(int i) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "slice_%03d.pfm", i);
  return buf;
}

inline void write_probability_volume(const fs::path& dir, const ProbabilityVolume& pv) {
  fs::create_directories(dir);
  std::ofstream manifest(dir / "planes.txt");
  if (!manifest) throw InputError("cannot write " + (dir / "planes.txt").string());
  manifest << "# index depth_m file\n";
  for (int i = 0; i < pv.num_planes(); ++i) {
    PfmImage img{pv.width, pv.height, 1, {}};
    img.data.resize(static_cast<std::size_t>(pv.width) * pv.height);
    for (int v = 0; v < pv.height; ++v)
      for (int u = 0; u < pv.width; ++u)
        img.data[static_cast<std::size_t>(v) * pv.width + u] =
            static_cast<float>(pv.prob_at(u, v)[i]);
    write_pfm(dir / slice_name(i), img);
    manifest << i << ' ' << format_double(pv.planes[i]) << ' ' << slice_name(i) << '\n';
  }
}

/// Cost slices; planes where the pixel has no valid cost are written as NaN.
inline void write_cost_volume(const fs::path& dir, const CostVolume& cv) {
  fs::create_directories(dir);
  std::ofstream manifest(dir / "planes.txt");
  if (!manifest) throw InputError("cannot write " + (dir / "planes.txt").string());
  manifest << "# index depth_m file\n";
  for (int i = 0; i < cv.num_planes(); ++i) {
    PfmImage img{cv.width, cv.height, 1, {}};
    img.data.resize(static_cast<std::size_t>(cv.width) * cv.height);
    for (int v = 0; v < cv.height; ++v)
      for (int u = 0; u < cv.width; ++u)
        img.data[static_cast<std::size_t>(v) * cv.width + u] =
            cv.valid_at(u, v)[i] ? static_cast<float>(cv.cost_at(u, v)[i])
                                 : std::numeric_limits<float>::quiet_NaN();
    write_pfm(dir / slice_name(i), img);
    manifest << i << ' ' << format_double(cv.planes[i]) << ' ' << slice_name(i) << '\n';
  }
}

/// Reads a volume written by write_probability_volume. Pixels whose slices
/// sum to zero are masked; others are renormalized after the float round
/// trip.
inline ProbabilityVolume read_probability_volume(const fs::path& dir) {
  std::ifstream manifest(dir / "planes.txt");
  if (!manifest) throw InputError("missing " + (dir / "planes.txt").string());
  std::vector<double> planes;
  std::vector<std::string> files;
  std::string line;
  while (std::getline(manifest, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ss(line);
    int idx = 0;
    double depth = 0.0;
    std::string file;
    if (!(ss >> idx >> depth >> file))
      throw InputError((dir / "planes.txt").string() + ": malformed line '" + line + "'");
    planes.push_back(depth);
    files.push_back(file);
  }
  if (planes.size() < 2) throw InputError("volume needs at least two planes");
  std::vector<PfmImage> slices;
  for (const auto& f : files) slices.push_back(read_pfm(dir / f));
  const int w = slices[0].width, h = slices[0].height;
  for (const auto& s : slices)
    if (s.width != w || s.height != h || s.channels != 1)
      throw InputError("volume slices differ in shape");
  ProbabilityVolume pv(w, h, planes);
  for (int v = 0; v < h; ++v) {
    for (int u = 0; u < w; ++u) {
      auto p = pv.prob_at(u, v);
      double sum = 0.0;
      for (std::size_t i = 0; i < slices.size(); ++i) {
        p[i] = std::max(0.0, static_cast<double>(slices[i].at(u, v)));
        sum += p[i];
      }
      if (!(sum > 0.0)) continue;
      for (auto& x : p) x /= sum;
      pv.pixel_valid(u, v) = 1;
    }
  }
  return pv;
}

}  // namespace nastereo::io
