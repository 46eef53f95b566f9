#pragma once

#include <string>
#include <vector>

#include "gridseg/gridize.hpp"
#include "gridseg/image.hpp"

namespace gridseg {

// Per-cell values on an R x C grid, row-major, channel-interleaved.
struct GridTensor {
  int rows = 0;
  int cols = 0;
  int channels = 0;
  std::vector<float> data;

  static GridTensor make(int r, int c, int ch, float fill = 0.0f) {
    GridTensor t;
    t.rows = r;
    t.cols = c;
    t.channels = ch;
    t.data.assign(static_cast<std::size_t>(r) * c * ch, fill);
    return t;
  }
  float& at(int r, int c, int ch) {
    return data[(static_cast<std::size_t>(r) * cols + c) * channels + ch];
  }
  float at(int r, int c, int ch) const {
    return data[(static_cast<std::size_t>(r) * cols + c) * channels + ch];
  }
};

// Cell value = mean of the image over the cell, per channel.
GridTensor encode_image(const RasterImage& img, const SuperpixelGrid& grid);

// Cell value = 1 when the mask mean over the cell is >= 0.5, else 0.
GridTensor encode_label(const BinaryMask& mask, const SuperpixelGrid& grid);

// v' = (v - min) / (max - min) over all cells and channels jointly;
// a constant tensor maps to all zeros.
void minmax_normalize(GridTensor& t);

// Replicates each cell value over the cell's pixels.
RasterImage reconstruct(const GridTensor& t, const SuperpixelGrid& grid);

// Mirrors the tensor along the column axis.
GridTensor flip_horizontal(const GridTensor& t);

// Binary blob: magic "GRDT", u32 rows/cols/channels, little-endian f32 data.
void save_grid_tensor(const GridTensor& t, const std::string& path);
GridTensor load_grid_tensor(const std::string& path);

}  // namespace gridseg
