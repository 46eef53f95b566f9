#include "gridseg/image.hpp"

#include <algorithm>
#include <cmath>

namespace gridseg {

RasterImage to_grayscale(const RasterImage& img) {
  if (img.channels == 1) return img;
  if (img.channels != 3)
    throw input_error("to_grayscale: expected 1 or 3 channels");
  RasterImage out = RasterImage::make(img.height, img.width, 1);
  const float* src = img.data.data();
  float* dst = out.data.data();
  const std::size_t n = static_cast<std::size_t>(img.height) * img.width;
  for (std::size_t i = 0; i < n; ++i) {
    const float* p = src + i * 3;
    dst[i] = 0.299f * p[0] + 0.587f * p[1] + 0.114f * p[2];
  }
  return out;
}

BoundaryMap boundary_map(const RasterImage& img) {
  const RasterImage gray = to_grayscale(img);
  const int h = gray.height;
  const int w = gray.width;
  BoundaryMap map = BoundaryMap::make(h, w);

  auto px = [&](int y, int x) {
    y = std::clamp(y, 0, h - 1);
    x = std::clamp(x, 0, w - 1);
    return gray.at(y, x, 0);
  };

  float lo = 0.0f;
  float hi = 0.0f;
  bool first = true;
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const float gx = (px(y - 1, x + 1) + 2.0f * px(y, x + 1) + px(y + 1, x + 1)) -
                       (px(y - 1, x - 1) + 2.0f * px(y, x - 1) + px(y + 1, x - 1));
      const float gy = (px(y + 1, x - 1) + 2.0f * px(y + 1, x) + px(y + 1, x + 1)) -
                       (px(y - 1, x - 1) + 2.0f * px(y - 1, x) + px(y - 1, x + 1));
      const float g = std::sqrt(gx * gx + gy * gy);
      map.at(y, x) = g;
      if (first) {
        lo = hi = g;
        first = false;
      } else {
        lo = std::min(lo, g);
        hi = std::max(hi, g);
      }
    }
  }
  if (hi <= lo) {
    std::fill(map.data.begin(), map.data.end(), 0.0f);
    return map;
  }
  const float scale = 1.0f / (hi - lo);
  for (float& v : map.data) v = (v - lo) * scale;
  return map;
}

namespace {

// Catmull-Rom kernel, a = -0.5.
inline float cubic_weight(float d) {
  d = std::fabs(d);
  if (d < 1.0f) return (1.5f * d - 2.5f) * d * d + 1.0f;
  if (d < 2.0f) return ((-0.5f * d + 2.5f) * d - 4.0f) * d + 2.0f;
  return 0.0f;
}

// One separable pass along the row axis: src is len_in samples per line,
// lines * stride layout handled by the caller through accessors.
void resample_axis(const std::vector<float>& in, int lines, int len_in,
                   int channels, int len_out, std::vector<float>& out,
                   bool along_x) {
  // along_x: in is (lines, len_in, channels), out is (lines, len_out, channels)
  // else:    in is (len_in, lines, channels), out is (len_out, lines, channels)
  const float scale = static_cast<float>(len_in) / static_cast<float>(len_out);
  for (int o = 0; o < len_out; ++o) {
    const float src = (static_cast<float>(o) + 0.5f) * scale - 0.5f;
    const int base = static_cast<int>(std::floor(src));
    const float t = src - static_cast<float>(base);
    float wgt[4];
    for (int k = 0; k < 4; ++k)
      wgt[k] = cubic_weight(static_cast<float>(k - 1) - t);
    int idx[4];
    for (int k = 0; k < 4; ++k)
      idx[k] = std::clamp(base + k - 1, 0, len_in - 1);
    for (int line = 0; line < lines; ++line) {
      for (int c = 0; c < channels; ++c) {
        float acc = 0.0f;
        for (int k = 0; k < 4; ++k) {
          const std::size_t src_idx =
              along_x ? (static_cast<std::size_t>(line) * len_in + idx[k]) *
                                channels +
                            c
                      : (static_cast<std::size_t>(idx[k]) * lines + line) *
                                channels +
                            c;
          acc += wgt[k] * in[src_idx];
        }
        const std::size_t dst_idx =
            along_x
                ? (static_cast<std::size_t>(line) * len_out + o) * channels + c
                : (static_cast<std::size_t>(o) * lines + line) * channels + c;
        out[dst_idx] = acc;
      }
    }
  }
}

}  // namespace

RasterImage resize_bicubic(const RasterImage& img, int new_h, int new_w) {
  if (new_h < 1 || new_w < 1)
    throw input_error("resize_bicubic: target dimensions must be >= 1");
  const int c = img.channels;
  // Horizontal pass, then vertical; clamp once at the end.
  std::vector<float> mid(static_cast<std::size_t>(img.height) * new_w * c);
  resample_axis(img.data, img.height, img.width, c, new_w, mid, true);
  RasterImage out = RasterImage::make(new_h, new_w, c);
  resample_axis(mid, new_w, img.height, c, new_h, out.data, false);
  for (float& v : out.data) v = std::clamp(v, 0.0f, 1.0f);
  return out;
}

}  // namespace gridseg
