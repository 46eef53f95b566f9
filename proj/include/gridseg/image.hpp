#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "gridseg/common.hpp"

namespace gridseg {

// Full-resolution image, values in [0,1], row-major, channel-interleaved.
struct RasterImage {
  int height = 0;
  int width = 0;
  int channels = 0;  // 1 or 3
  std::vector<float> data;

  static RasterImage make(int h, int w, int c, float fill = 0.0f) {
    RasterImage img;
    img.height = h;
    img.width = w;
    img.channels = c;
    img.data.assign(static_cast<std::size_t>(h) * w * c, fill);
    return img;
  }
  float& at(int y, int x, int c) {
    return data[(static_cast<std::size_t>(y) * width + x) * channels + c];
  }
  float at(int y, int x, int c) const {
    return data[(static_cast<std::size_t>(y) * width + x) * channels + c];
  }
};

// Per-pixel values in {0,1}.
struct BinaryMask {
  int height = 0;
  int width = 0;
  std::vector<std::uint8_t> data;

  static BinaryMask make(int h, int w, std::uint8_t fill = 0) {
    BinaryMask m;
    m.height = h;
    m.width = w;
    m.data.assign(static_cast<std::size_t>(h) * w, fill);
    return m;
  }
  std::uint8_t& at(int y, int x) {
    return data[static_cast<std::size_t>(y) * width + x];
  }
  std::uint8_t at(int y, int x) const {
    return data[static_cast<std::size_t>(y) * width + x];
  }
};

// Edge strength in [0,1]; all-zero for a constant image, otherwise min-max
// normalized so min = 0 and max = 1.
struct BoundaryMap {
  int height = 0;
  int width = 0;
  std::vector<float> data;

  static BoundaryMap make(int h, int w, float fill = 0.0f) {
    BoundaryMap b;
    b.height = h;
    b.width = w;
    b.data.assign(static_cast<std::size_t>(h) * w, fill);
    return b;
  }
  float& at(int y, int x) {
    return data[static_cast<std::size_t>(y) * width + x];
  }
  float at(int y, int x) const {
    return data[static_cast<std::size_t>(y) * width + x];
  }
};

// File I/O. Formats: 8-bit PNG (gray/RGB) and binary PPM (P6) / PGM (P5).
// Loading rejects unreadable files, unsupported bit depths and images
// smaller than the 8x8 pipeline minimum.
RasterImage load_image(const std::string& path);

// Grayscale file thresholded at 0.5 (scaled value >= 0.5 -> 1).
BinaryMask load_mask(const std::string& path);

// Format chosen by extension (.png/.ppm/.pgm); samples written as
// round(v * 255).
void save_image(const RasterImage& img, const std::string& path);
void save_mask(const BinaryMask& mask, const std::string& path);

// 16-bit binary PGM (maxval 65535, big-endian samples).
void save_pgm16(const std::vector<std::uint16_t>& values, int height,
                int width, const std::string& path);
std::vector<std::uint16_t> load_pgm16(const std::string& path, int& height,
                                      int& width);

// BT.601 luma for 3-channel input, identity for 1-channel.
RasterImage to_grayscale(const RasterImage& img);

// Sobel gradient magnitude of the luma image, borders edge-replicated,
// min-max normalized. Constant input gives an all-zero map.
BoundaryMap boundary_map(const RasterImage& img);

// Separable Catmull-Rom (a = -0.5) resampling with edge-replicated borders;
// output clamped to [0,1].
RasterImage resize_bicubic(const RasterImage& img, int new_h, int new_w);

}  // namespace gridseg
