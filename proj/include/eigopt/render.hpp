#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <array>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>
#include <zlib.h>

#include "eigopt/mesh.hpp"

namespace eigopt {

struct Image {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> rgb;  // row-major, 3 bytes per pixel

  std::array<std::uint8_t, 3> pixel(int x, int y) const {
    size_t at = 3 * (static_cast<size_t>(y) * width + x);
    return {rgb[at], rgb[at + 1], rgb[at + 2]};
  }
};

enum class Colormap {
  red_blue,    // 0 = blue, 1 = red, through white
  sequential,  // 0 = white, 1 = dark red
};

namespace detail {

inline std::array<std::uint8_t, 3> map_color(Colormap cm, double t) {
  t = std::min(1.0, std::max(0.0, t));
  auto u8 = [](double v) { return static_cast<std::uint8_t>(std::lround(255.0 * v)); };
  if (cm == Colormap::red_blue) {
    if (t < 0.5) {
      double s = t / 0.5;  // blue -> white
      return {u8(s), u8(s), 255};
    }
    double s = (t - 0.5) / 0.5;  // white -> red
    return {255, u8(1.0 - s), u8(1.0 - s)};
  }
  // white -> dark red
  return {u8(1.0 - 0.6 * t), u8(1.0 - t), u8(1.0 - t)};
}

inline void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  out.push_back((v >> 24) & 0xff);
  out.push_back((v >> 16) & 0xff);
  out.push_back((v >> 8) & 0xff);
  out.push_back(v & 0xff);
}

inline void put_chunk(std::vector<std::uint8_t>& out, const char type[4],
                      const std::vector<std::uint8_t>& data) {
  put_u32(out, static_cast<std::uint32_t>(data.size()));
  size_t start = out.size();
  out.insert(out.end(), type, type + 4);
  out.insert(out.end(), data.begin(), data.end());
  std::uint32_t crc = crc32(0L, Z_NULL, 0);
  crc = crc32(crc, out.data() + start, static_cast<uInt>(4 + data.size()));
  put_u32(out, crc);
}

}  // namespace detail

inline void write_png(const std::string& path, const Image& img) {
  // filter byte 0 per scanline, then one zlib stream
  std::vector<std::uint8_t> raw;
  raw.reserve(static_cast<size_t>(img.height) * (1 + 3 * img.width));
  for (int y = 0; y < img.height; ++y) {
    raw.push_back(0);
    raw.insert(raw.end(), img.rgb.begin() + 3 * static_cast<size_t>(y) * img.width,
               img.rgb.begin() + 3 * static_cast<size_t>(y + 1) * img.width);
  }
  uLongf bound = compressBound(static_cast<uLong>(raw.size()));
  std::vector<std::uint8_t> compressed(bound);
  if (compress2(compressed.data(), &bound, raw.data(), static_cast<uLong>(raw.size()), 6) != Z_OK)
    throw std::runtime_error("png: deflate failed");
  compressed.resize(bound);

  std::vector<std::uint8_t> out = {0x89, 'P', 'N', 'G', '\r', '\n', 0x1a, '\n'};
  std::vector<std::uint8_t> ihdr;
  detail::put_u32(ihdr, img.width);
  detail::put_u32(ihdr, img.height);
  ihdr.push_back(8);  // bit depth
  ihdr.push_back(2);  // truecolor
  ihdr.push_back(0);
  ihdr.push_back(0);
  ihdr.push_back(0);
  detail::put_chunk(out, "IHDR", ihdr);
  detail::put_chunk(out, "IDAT", compressed);
  detail::put_chunk(out, "IEND", {});

  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("png: cannot open " + path);
  os.write(reinterpret_cast<const char*>(out.data()), static_cast<std::streamsize>(out.size()));
  if (!os) throw std::runtime_error("png: write failed for " + path);
}

namespace detail {

template <typename ValueAt>
Image rasterize(const Mesh& m, int width, Colormap cm, double vmin, double vmax,
                ValueAt&& value_at) {
  double x0 = 1e300, x1 = -1e300, y0 = 1e300, y1 = -1e300;
  for (const auto& p : m.vertices) {
    x0 = std::min(x0, p.x);
    x1 = std::max(x1, p.x);
    y0 = std::min(y0, p.y);
    y1 = std::max(y1, p.y);
  }
  double span = std::max(x1 - x0, 1e-12);
  int height = std::max(1, static_cast<int>(std::lround(width * (y1 - y0) / span)));
  Image img;
  img.width = width;
  img.height = height;
  img.rgb.assign(static_cast<size_t>(width) * height * 3, 255);

  double sx = (x1 - x0) / width, sy = (y1 - y0) / height;
  double range = (vmax > vmin) ? (vmax - vmin) : 1.0;
  for (int t = 0; t < m.num_elements(); ++t) {
    const auto& e = m.elements[t];
    Vec2 a = m.vertices[e[0]], b = m.vertices[e[1]], c = m.vertices[e[2]];
    double det = cross(b - a, c - a);
    int px0 = std::max(0, static_cast<int>((std::min({a.x, b.x, c.x}) - x0) / sx) - 1);
    int px1 = std::min(width - 1, static_cast<int>((std::max({a.x, b.x, c.x}) - x0) / sx) + 1);
    int py0 = std::max(0, static_cast<int>((std::min({a.y, b.y, c.y}) - y0) / sy) - 1);
    int py1 = std::min(height - 1, static_cast<int>((std::max({a.y, b.y, c.y}) - y0) / sy) + 1);
    for (int py = py0; py <= py1; ++py) {
      for (int px = px0; px <= px1; ++px) {
        Vec2 p{x0 + (px + 0.5) * sx, y0 + (py + 0.5) * sy};
        double lc = cross(b - a, p - a) / det;
        double lb = cross(p - a, c - a) / det;
        double la = 1.0 - lb - lc;
        const double tol = -1e-12;
        if (la < tol || lb < tol || lc < tol) continue;
        double v = value_at(t, la, lb, lc);
        auto color = map_color(cm, (v - vmin) / range);
        size_t at = 3 * (static_cast<size_t>(height - 1 - py) * width + px);
        img.rgb[at] = color[0];
        img.rgb[at + 1] = color[1];
        img.rgb[at + 2] = color[2];
      }
    }
  }
  return img;
}

}  // namespace detail

// Nodal field as a red(1)-blue(0) map on [0,1].
inline Image rasterize_nodal(const Mesh& m, const Eigen::VectorXd& values, int width = 480,
                             Colormap cm = Colormap::red_blue, double vmin = 0.0,
                             double vmax = 1.0) {
  if (values.size() != m.num_vertices())
    throw std::invalid_argument("rasterize_nodal: field size mismatch");
  return detail::rasterize(m, width, cm, vmin, vmax,
                           [&](int t, double l0, double l1, double l2) {
                             const auto& e = m.elements[t];
                             return l0 * values[e[0]] + l1 * values[e[1]] + l2 * values[e[2]];
                           });
}

// Per-element field with a sequential map scaled to the data range.
inline Image rasterize_cell(const Mesh& m, const Eigen::VectorXd& values, int width = 480) {
  if (values.size() != m.num_elements())
    throw std::invalid_argument("rasterize_cell: field size mismatch");
  double vmin = values.size() ? values.minCoeff() : 0.0;
  double vmax = values.size() ? values.maxCoeff() : 1.0;
  return detail::rasterize(m, width, Colormap::sequential, vmin, vmax,
                           [&](int t, double, double, double) { return values[t]; });
}

inline void render_png(const Mesh& m, const Eigen::VectorXd& nodal, const std::string& path) {
  write_png(path, rasterize_nodal(m, nodal));
}

inline void render_cell_png(const Mesh& m, const Eigen::VectorXd& cell, const std::string& path) {
  write_png(path, rasterize_cell(m, cell));
}

}  // namespace eigopt
