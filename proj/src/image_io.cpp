#include <png.h>

#include <cctype>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <memory>
#include <vector>

#include "gridseg/image.hpp"

namespace gridseg {

namespace {

constexpr int kMinSide = 8;  // pipeline minimum

struct FileCloser {
  void operator()(std::FILE* f) const {
    if (f) std::fclose(f);
  }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

bool has_suffix(const std::string& s, const std::string& suf) {
  if (s.size() < suf.size()) return false;
  return std::equal(suf.rbegin(), suf.rend(), s.rbegin(), [](char a, char b) {
    return std::tolower(static_cast<unsigned char>(a)) ==
           std::tolower(static_cast<unsigned char>(b));
  });
}

std::uint8_t to_byte(float v) {
  const float q = std::round(v * 255.0f);
  return static_cast<std::uint8_t>(std::min(std::max(q, 0.0f), 255.0f));
}

// ---- PNG ----

struct PngReadGuard {
  png_structp png = nullptr;
  png_infop info = nullptr;
  ~PngReadGuard() {
    if (png) png_destroy_read_struct(&png, info ? &info : nullptr, nullptr);
  }
};

struct PngWriteGuard {
  png_structp png = nullptr;
  png_infop info = nullptr;
  ~PngWriteGuard() {
    if (png) png_destroy_write_struct(&png, info ? &info : nullptr);
  }
};

RasterImage read_png_file(std::FILE* f, const std::string& path) {
  PngReadGuard g;
  g.png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr,
                                 nullptr);
  if (!g.png) throw input_error("png: allocation failed");
  g.info = png_create_info_struct(g.png);
  if (!g.info) throw input_error("png: allocation failed");

  // Buffers live outside the setjmp scope.
  std::vector<std::uint8_t> pixels;
  std::vector<png_bytep> rows;
  png_uint_32 w = 0, h = 0;
  int bit_depth = 0, color_type = 0, channels = 0;

  if (setjmp(png_jmpbuf(g.png)))
    throw input_error("failed to decode PNG: " + path);

  png_init_io(g.png, f);
  png_read_info(g.png, g.info);
  png_get_IHDR(g.png, g.info, &w, &h, &bit_depth, &color_type, nullptr,
               nullptr, nullptr);
  if (w == 0 || h == 0) throw input_error("zero-sized image: " + path);
  if (bit_depth == 16)
    throw input_error("unsupported bit depth (16) in " + path);

  if (color_type == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(g.png);
  if (color_type == PNG_COLOR_TYPE_GRAY && bit_depth < 8)
    png_set_expand_gray_1_2_4_to_8(g.png);
  if (png_get_valid(g.png, g.info, PNG_INFO_tRNS))
    png_set_tRNS_to_alpha(g.png);
  png_set_strip_alpha(g.png);
  png_read_update_info(g.png, g.info);

  channels = png_get_channels(g.png, g.info);
  if (channels != 1 && channels != 3)
    throw input_error("unsupported channel count in " + path);

  const std::size_t row_bytes = png_get_rowbytes(g.png, g.info);
  pixels.resize(row_bytes * h);
  rows.resize(h);
  for (png_uint_32 y = 0; y < h; ++y) rows[y] = pixels.data() + y * row_bytes;
  png_read_image(g.png, rows.data());
  png_read_end(g.png, nullptr);

  RasterImage img = RasterImage::make(static_cast<int>(h),
                                      static_cast<int>(w), channels);
  const std::size_t n = img.data.size();
  for (std::size_t i = 0; i < n; ++i)
    img.data[i] = static_cast<float>(pixels[i]) / 255.0f;
  return img;
}

void write_png_file(const RasterImage& img, std::FILE* f,
                    const std::string& path) {
  PngWriteGuard g;
  g.png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr,
                                  nullptr);
  if (!g.png) throw input_error("png: allocation failed");
  g.info = png_create_info_struct(g.png);
  if (!g.info) throw input_error("png: allocation failed");

  std::vector<std::uint8_t> pixels(img.data.size());
  for (std::size_t i = 0; i < img.data.size(); ++i)
    pixels[i] = to_byte(img.data[i]);
  std::vector<png_bytep> rows(img.height);
  const std::size_t row_bytes =
      static_cast<std::size_t>(img.width) * img.channels;
  for (int y = 0; y < img.height; ++y)
    rows[y] = pixels.data() + static_cast<std::size_t>(y) * row_bytes;

  if (setjmp(png_jmpbuf(g.png)))
    throw input_error("failed to encode PNG: " + path);

  png_init_io(g.png, f);
  png_set_IHDR(g.png, g.info, img.width, img.height, 8,
               img.channels == 1 ? PNG_COLOR_TYPE_GRAY : PNG_COLOR_TYPE_RGB,
               PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
               PNG_FILTER_TYPE_DEFAULT);
  png_write_info(g.png, g.info);
  png_write_image(g.png, rows.data());
  png_write_end(g.png, nullptr);
}

// ---- PNM (binary PPM/PGM) ----

int pnm_next_int(std::FILE* f, const std::string& path) {
  int ch = std::fgetc(f);
  while (ch != EOF) {
    if (ch == '#') {
      while (ch != EOF && ch != '\n') ch = std::fgetc(f);
    } else if (!std::isspace(ch)) {
      break;
    }
    ch = std::fgetc(f);
  }
  if (ch == EOF) throw input_error("truncated PNM header: " + path);
  int value = 0;
  bool any = false;
  while (ch != EOF && std::isdigit(ch)) {
    value = value * 10 + (ch - '0');
    any = true;
    ch = std::fgetc(f);
  }
  if (!any) throw input_error("malformed PNM header: " + path);
  return value;
}

RasterImage read_pnm_file(std::FILE* f, const std::string& path) {
  char magic[2];
  if (std::fread(magic, 1, 2, f) != 2 || magic[0] != 'P' ||
      (magic[1] != '5' && magic[1] != '6'))
    throw input_error("not a binary PGM/PPM file: " + path);
  const int channels = magic[1] == '6' ? 3 : 1;
  const int w = pnm_next_int(f, path);
  const int h = pnm_next_int(f, path);
  const int maxval = pnm_next_int(f, path);
  if (w == 0 || h == 0) throw input_error("zero-sized image: " + path);
  if (maxval <= 0 || maxval > 255)
    throw input_error("unsupported bit depth (maxval " +
                      std::to_string(maxval) + ") in " + path);
  const std::size_t n = static_cast<std::size_t>(w) * h * channels;
  std::vector<std::uint8_t> raw(n);
  if (std::fread(raw.data(), 1, n, f) != n)
    throw input_error("truncated PNM payload: " + path);
  RasterImage img = RasterImage::make(h, w, channels);
  const float denom = static_cast<float>(maxval);
  for (std::size_t i = 0; i < n; ++i)
    img.data[i] = static_cast<float>(raw[i]) / denom;
  return img;
}

void write_pnm_file(const RasterImage& img, std::FILE* f) {
  std::fprintf(f, "P%c\n%d %d\n255\n", img.channels == 3 ? '6' : '5',
               img.width, img.height);
  std::vector<std::uint8_t> raw(img.data.size());
  for (std::size_t i = 0; i < img.data.size(); ++i)
    raw[i] = to_byte(img.data[i]);
  std::fwrite(raw.data(), 1, raw.size(), f);
}

bool is_png_signature(std::FILE* f) {
  unsigned char sig[8];
  const std::size_t got = std::fread(sig, 1, 8, f);
  std::rewind(f);
  return got == 8 && png_sig_cmp(sig, 0, 8) == 0;
}

}  // namespace

RasterImage load_image(const std::string& path) {
  FilePtr f(std::fopen(path.c_str(), "rb"));
  if (!f) throw input_error("cannot open image file: " + path);
  RasterImage img = is_png_signature(f.get()) ? read_png_file(f.get(), path)
                                              : read_pnm_file(f.get(), path);
  if (img.height < kMinSide || img.width < kMinSide)
    throw input_error("image below 8x8 pipeline minimum: " + path);
  return img;
}

BinaryMask load_mask(const std::string& path) {
  FilePtr f(std::fopen(path.c_str(), "rb"));
  if (!f) throw input_error("cannot open mask file: " + path);
  const RasterImage img = is_png_signature(f.get())
                              ? read_png_file(f.get(), path)
                              : read_pnm_file(f.get(), path);
  if (img.channels != 1)
    throw input_error("mask is not grayscale: " + path);
  BinaryMask mask = BinaryMask::make(img.height, img.width);
  for (std::size_t i = 0; i < img.data.size(); ++i)
    mask.data[i] = img.data[i] >= 0.5f ? 1 : 0;
  return mask;
}

void save_image(const RasterImage& img, const std::string& path) {
  FilePtr f(std::fopen(path.c_str(), "wb"));
  if (!f) throw input_error("cannot open file for writing: " + path);
  if (has_suffix(path, ".png")) {
    write_png_file(img, f.get(), path);
  } else if (has_suffix(path, ".ppm") || has_suffix(path, ".pgm")) {
    write_pnm_file(img, f.get());
  } else {
    throw input_error("unsupported image extension: " + path);
  }
}

void save_mask(const BinaryMask& mask, const std::string& path) {
  RasterImage img = RasterImage::make(mask.height, mask.width, 1);
  for (std::size_t i = 0; i < mask.data.size(); ++i)
    img.data[i] = mask.data[i] ? 1.0f : 0.0f;
  save_image(img, path);
}

void save_pgm16(const std::vector<std::uint16_t>& values, int height,
                int width, const std::string& path) {
  if (values.size() != static_cast<std::size_t>(height) * width)
    throw input_error("save_pgm16: size mismatch");
  FilePtr f(std::fopen(path.c_str(), "wb"));
  if (!f) throw input_error("cannot open file for writing: " + path);
  std::fprintf(f.get(), "P5\n%d %d\n65535\n", width, height);
  std::vector<std::uint8_t> raw(values.size() * 2);
  for (std::size_t i = 0; i < values.size(); ++i) {
    raw[2 * i] = static_cast<std::uint8_t>(values[i] >> 8);
    raw[2 * i + 1] = static_cast<std::uint8_t>(values[i] & 0xff);
  }
  std::fwrite(raw.data(), 1, raw.size(), f.get());
}

std::vector<std::uint16_t> load_pgm16(const std::string& path, int& height,
                                      int& width) {
  FilePtr f(std::fopen(path.c_str(), "rb"));
  if (!f) throw input_error("cannot open file: " + path);
  char magic[2];
  if (std::fread(magic, 1, 2, f.get()) != 2 || magic[0] != 'P' ||
      magic[1] != '5')
    throw input_error("not a binary PGM file: " + path);
  width = pnm_next_int(f.get(), path);
  height = pnm_next_int(f.get(), path);
  const int maxval = pnm_next_int(f.get(), path);
  if (maxval != 65535)
    throw input_error("expected 16-bit PGM in " + path);
  const std::size_t n = static_cast<std::size_t>(width) * height;
  std::vector<std::uint8_t> raw(n * 2);
  if (std::fread(raw.data(), 1, raw.size(), f.get()) != raw.size())
    throw input_error("truncated PGM payload: " + path);
  std::vector<std::uint16_t> values(n);
  for (std::size_t i = 0; i < n; ++i)
    values[i] = static_cast<std::uint16_t>((raw[2 * i] << 8) | raw[2 * i + 1]);
  return values;
}

}  // namespace gridseg
