#include "gridseg/codec.hpp"

#include <algorithm>
#include <bit>
#include <cstdio>
#include <cstring>
#include <memory>

#include "gridseg/common.hpp"

static_assert(std::endian::native == std::endian::little,
              "tensor blobs are little-endian");

namespace gridseg {

namespace {

struct FileCloser {
  void operator()(std::FILE* f) const {
    if (f) std::fclose(f);
  }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

constexpr char kMagic[4] = {'G', 'R', 'D', 'T'};

void check_dims(int img_h, int img_w, const SuperpixelGrid& grid) {
  if (img_h != grid.img_h || img_w != grid.img_w)
    throw input_error("image dimensions do not match the grid");
}

}  // namespace

GridTensor encode_image(const RasterImage& img, const SuperpixelGrid& grid) {
  check_dims(img.height, img.width, grid);
  const int ch = img.channels;
  const int ncell = grid.dims.rows * grid.dims.cols;
  std::vector<double> acc(static_cast<std::size_t>(ncell) * ch, 0.0);
  for (std::int64_t p = 0; p < static_cast<std::int64_t>(grid.labels.size());
       ++p) {
    const std::int32_t lab = grid.labels[p];
    for (int c = 0; c < ch; ++c)
      acc[static_cast<std::size_t>(lab) * ch + c] += img.data[p * ch + c];
  }
  GridTensor t = GridTensor::make(grid.dims.rows, grid.dims.cols, ch);
  for (int i = 0; i < ncell; ++i) {
    if (grid.cell_sizes[i] == 0) throw input_error("grid has an empty cell");
    for (int c = 0; c < ch; ++c)
      t.data[static_cast<std::size_t>(i) * ch + c] = static_cast<float>(
          acc[static_cast<std::size_t>(i) * ch + c] / grid.cell_sizes[i]);
  }
  return t;
}

GridTensor encode_label(const BinaryMask& mask, const SuperpixelGrid& grid) {
  check_dims(mask.height, mask.width, grid);
  const int ncell = grid.dims.rows * grid.dims.cols;
  std::vector<std::int64_t> acc(ncell, 0);
  for (std::int64_t p = 0; p < static_cast<std::int64_t>(grid.labels.size());
       ++p)
    acc[grid.labels[p]] += mask.data[p];
  GridTensor t = GridTensor::make(grid.dims.rows, grid.dims.cols, 1);
  for (int i = 0; i < ncell; ++i) {
    if (grid.cell_sizes[i] == 0) throw input_error("grid has an empty cell");
    t.data[i] = 2 * acc[i] >= grid.cell_sizes[i] ? 1.0f : 0.0f;
  }
  return t;
}

void minmax_normalize(GridTensor& t) {
  if (t.data.empty()) return;
  float lo = t.data[0], hi = t.data[0];
  for (const float v : t.data) {
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  if (hi == lo) {
    std::fill(t.data.begin(), t.data.end(), 0.0f);
    return;
  }
  const float range = hi - lo;
  for (float& v : t.data) v = (v - lo) / range;
}

RasterImage reconstruct(const GridTensor& t, const SuperpixelGrid& grid) {
  if (t.rows != grid.dims.rows || t.cols != grid.dims.cols)
    throw input_error("tensor dimensions do not match the grid");
  RasterImage out = RasterImage::make(grid.img_h, grid.img_w, t.channels);
  const int ch = t.channels;
  for (std::int64_t p = 0; p < static_cast<std::int64_t>(grid.labels.size());
       ++p) {
    const std::int32_t lab = grid.labels[p];
    for (int c = 0; c < ch; ++c)
      out.data[p * ch + c] = t.data[static_cast<std::size_t>(lab) * ch + c];
  }
  return out;
}

GridTensor flip_horizontal(const GridTensor& t) {
  GridTensor out = GridTensor::make(t.rows, t.cols, t.channels);
  for (int r = 0; r < t.rows; ++r)
    for (int c = 0; c < t.cols; ++c)
      for (int ch = 0; ch < t.channels; ++ch)
        out.at(r, c, ch) = t.at(r, t.cols - 1 - c, ch);
  return out;
}

void save_grid_tensor(const GridTensor& t, const std::string& path) {
  FilePtr f(std::fopen(path.c_str(), "wb"));
  if (!f) throw input_error("cannot open file for writing: " + path);
  std::fwrite(kMagic, 1, 4, f.get());
  const std::uint32_t dims[3] = {static_cast<std::uint32_t>(t.rows),
                                 static_cast<std::uint32_t>(t.cols),
                                 static_cast<std::uint32_t>(t.channels)};
  std::fwrite(dims, sizeof(std::uint32_t), 3, f.get());
  std::fwrite(t.data.data(), sizeof(float), t.data.size(), f.get());
}

GridTensor load_grid_tensor(const std::string& path) {
  FilePtr f(std::fopen(path.c_str(), "rb"));
  if (!f) throw input_error("cannot open file: " + path);
  char magic[4];
  if (std::fread(magic, 1, 4, f.get()) != 4 ||
      std::memcmp(magic, kMagic, 4) != 0)
    throw format_error("not a grid tensor file: " + path);
  std::uint32_t dims[3];
  if (std::fread(dims, sizeof(std::uint32_t), 3, f.get()) != 3)
    throw format_error("truncated grid tensor header: " + path);
  if (dims[0] == 0 || dims[1] == 0 || dims[2] == 0 ||
      dims[0] > 1u << 20 || dims[1] > 1u << 20 || dims[2] > 1u << 10)
    throw format_error("implausible grid tensor dimensions: " + path);
  GridTensor t = GridTensor::make(static_cast<int>(dims[0]),
                                  static_cast<int>(dims[1]),
                                  static_cast<int>(dims[2]));
  if (std::fread(t.data.data(), sizeof(float), t.data.size(), f.get()) !=
      t.data.size())
    throw format_error("truncated grid tensor payload: " + path);
  return t;
}

}  // namespace gridseg
