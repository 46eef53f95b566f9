#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>

#include "doctest.h"
#include "gridseg/image.hpp"

using namespace gridseg;

namespace {

std::string temp_path(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / "gridseg_img_tests";
  std::filesystem::create_directories(dir);
  return (dir / name).string();
}

RasterImage byte_exact_image(int h, int w, int ch, std::uint32_t seed) {
  std::mt19937 rng(seed);
  RasterImage img = RasterImage::make(h, w, ch);
  for (float& v : img.data)
    v = static_cast<float>(uniform_int(rng, 0, 255)) / 255.0f;
  return img;
}

// Straight 2-D Catmull-Rom resampling in double, clamped indices. Slow but
// independent of the separable production code.
double ref_kernel(double t) {
  const double a = -0.5, x = std::abs(t);
  if (x < 1.0) return ((a + 2.0) * x - (a + 3.0)) * x * x + 1.0;
  if (x < 2.0) return (((x - 5.0) * x + 8.0) * x - 4.0) * a;
  return 0.0;
}

RasterImage ref_bicubic(const RasterImage& img, int nh, int nw) {
  RasterImage out = RasterImage::make(nh, nw, img.channels);
  const double sy = static_cast<double>(img.height) / nh;
  const double sx = static_cast<double>(img.width) / nw;
  for (int y = 0; y < nh; ++y) {
    const double fy = (y + 0.5) * sy - 0.5;
    const int by = static_cast<int>(std::floor(fy));
    for (int x = 0; x < nw; ++x) {
      const double fx = (x + 0.5) * sx - 0.5;
      const int bx = static_cast<int>(std::floor(fx));
      for (int c = 0; c < img.channels; ++c) {
        double acc = 0.0;
        for (int i = -1; i <= 2; ++i) {
          const int yy = std::clamp(by + i, 0, img.height - 1);
          const double wy = ref_kernel(fy - (by + i));
          for (int j = -1; j <= 2; ++j) {
            const int xx = std::clamp(bx + j, 0, img.width - 1);
            acc += wy * ref_kernel(fx - (bx + j)) * img.at(yy, xx, c);
          }
        }
        out.at(y, x, c) = static_cast<float>(std::clamp(acc, 0.0, 1.0));
      }
    }
  }
  return out;
}

}  // namespace

TEST_CASE("png round trip preserves byte-exact rgb values") {
  const RasterImage img = byte_exact_image(16, 12, 3, 7);
  const std::string path = temp_path("rt_rgb.png");
  save_image(img, path);
  const RasterImage back = load_image(path);
  REQUIRE(back.height == 16);
  REQUIRE(back.width == 12);
  REQUIRE(back.channels == 3);
  for (std::size_t i = 0; i < img.data.size(); ++i)
    CHECK(back.data[i] == img.data[i]);
}

TEST_CASE("png round trip preserves grayscale") {
  const RasterImage img = byte_exact_image(9, 21, 1, 8);
  const std::string path = temp_path("rt_gray.png");
  save_image(img, path);
  const RasterImage back = load_image(path);
  REQUIRE(back.channels == 1);
  for (std::size_t i = 0; i < img.data.size(); ++i)
    CHECK(back.data[i] == img.data[i]);
}

TEST_CASE("ppm and pgm round trips") {
  const RasterImage rgb = byte_exact_image(10, 14, 3, 9);
  const std::string p6 = temp_path("rt.ppm");
  save_image(rgb, p6);
  const RasterImage back6 = load_image(p6);
  CHECK(back6.data == rgb.data);

  const RasterImage gray = byte_exact_image(14, 10, 1, 10);
  const std::string p5 = temp_path("rt.pgm");
  save_image(gray, p5);
  const RasterImage back5 = load_image(p5);
  CHECK(back5.data == gray.data);
}

TEST_CASE("pgm16 round trips big-endian 16-bit values") {
  std::vector<std::uint16_t> vals = {0, 1, 255, 256, 1000, 65535};
  const std::string path = temp_path("rt16.pgm");
  save_pgm16(vals, 2, 3, path);
  int h = 0, w = 0;
  const std::vector<std::uint16_t> back = load_pgm16(path, h, w);
  CHECK(h == 2);
  CHECK(w == 3);
  CHECK(back == vals);
}

TEST_CASE("mask threshold splits at half intensity") {
  RasterImage img = RasterImage::make(8, 8, 1);
  for (int x = 0; x < 8; ++x) {
    img.at(0, x, 0) = 127.0f / 255.0f;
    img.at(1, x, 0) = 128.0f / 255.0f;
  }
  const std::string path = temp_path("mask_thresh.png");
  save_image(img, path);
  const BinaryMask m = load_mask(path);
  CHECK(m.at(0, 0) == 0);
  CHECK(m.at(1, 0) == 1);
  CHECK(m.at(2, 0) == 0);
}

TEST_CASE("mask round trip") {
  BinaryMask m = BinaryMask::make(11, 9);
  std::mt19937 rng(11);
  for (auto& v : m.data) v = uniform_int(rng, 0, 1);
  const std::string path = temp_path("rt_mask.png");
  save_mask(m, path);
  const BinaryMask back = load_mask(path);
  CHECK(back.data == m.data);
}

TEST_CASE("loader rejects bad inputs") {
  CHECK_THROWS_WITH_AS(load_image(temp_path("nope.png")),
                       doctest::Contains("nope.png"), input_error);

  const std::string tiny = temp_path("tiny.pgm");
  {
    std::ofstream f(tiny, std::ios::binary);
    f << "P5\n4 4\n255\n";
    for (int i = 0; i < 16; ++i) f.put('\0');
  }
  CHECK_THROWS_AS(load_image(tiny), input_error);

  std::vector<std::uint16_t> vals(96, 300);
  const std::string deep = temp_path("deep.pgm");
  save_pgm16(vals, 8, 12, deep);
  CHECK_THROWS_WITH_AS(load_image(deep), doctest::Contains("bit depth"),
                       input_error);

  const std::string rgbmask = temp_path("rgbmask.png");
  save_image(byte_exact_image(8, 8, 3, 12), rgbmask);
  CHECK_THROWS_AS(load_mask(rgbmask), input_error);

  CHECK_THROWS_WITH_AS(save_image(byte_exact_image(8, 8, 1, 13),
                                  temp_path("out.bmp")),
                       doctest::Contains("extension"), input_error);
}

TEST_CASE("pnm header comments and whitespace are tolerated") {
  const std::string path = temp_path("comments.pgm");
  {
    std::ofstream f(path, std::ios::binary);
    f << "P5\n# a comment\n 8 # widths\n8\n# more\n255\n";
    for (int i = 0; i < 64; ++i) f.put(static_cast<char>(i));
  }
  const RasterImage img = load_image(path);
  CHECK(img.height == 8);
  CHECK(img.width == 8);
  CHECK(img.at(0, 1, 0) == 1.0f / 255.0f);
}

TEST_CASE("grayscale uses bt601 weights") {
  RasterImage img = RasterImage::make(8, 8, 3);
  img.at(0, 0, 0) = 1.0f;
  img.at(0, 1, 1) = 1.0f;
  img.at(0, 2, 2) = 1.0f;
  img.at(0, 3, 0) = 0.5f;
  img.at(0, 3, 1) = 0.5f;
  img.at(0, 3, 2) = 0.5f;
  const RasterImage g = to_grayscale(img);
  REQUIRE(g.channels == 1);
  CHECK(g.at(0, 0, 0) == doctest::Approx(0.299).epsilon(1e-6));
  CHECK(g.at(0, 1, 0) == doctest::Approx(0.587).epsilon(1e-6));
  CHECK(g.at(0, 2, 0) == doctest::Approx(0.114).epsilon(1e-6));
  CHECK(g.at(0, 3, 0) == doctest::Approx(0.5).epsilon(1e-6));
}

TEST_CASE("boundary map is zero on constants and peaks on a step edge") {
  const RasterImage flat = RasterImage::make(16, 16, 3, 0.7f);
  const BoundaryMap bflat = boundary_map(flat);
  for (const float v : bflat.data) CHECK(v == 0.0f);

  RasterImage step = RasterImage::make(16, 16, 1);
  for (int y = 0; y < 16; ++y)
    for (int x = 8; x < 16; ++x) step.at(y, x, 0) = 1.0f;
  const BoundaryMap b = boundary_map(step);
  float lo = 2.0f, hi = -1.0f;
  for (const float v : b.data) {
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  CHECK(lo == 0.0f);
  CHECK(hi == 1.0f);
  CHECK(b.at(8, 7) > b.at(8, 2));
  CHECK(b.at(8, 8) > b.at(8, 13));
}

TEST_CASE("bicubic resize identity and constant cases are exact") {
  const RasterImage img = byte_exact_image(13, 17, 3, 21);
  const RasterImage same = resize_bicubic(img, 13, 17);
  CHECK(same.data == img.data);

  const RasterImage flat = RasterImage::make(10, 10, 1, 0.25f);
  const RasterImage up = resize_bicubic(flat, 23, 31);
  for (const float v : up.data) CHECK(v == doctest::Approx(0.25).epsilon(1e-6));
}

TEST_CASE("bicubic half-phase taps match catmull-rom weights") {
  RasterImage src = RasterImage::make(1, 4, 1);
  src.at(0, 0, 0) = 0.0f;
  src.at(0, 1, 0) = 0.4f;
  src.at(0, 2, 0) = 0.8f;
  src.at(0, 3, 0) = 0.4f;
  const RasterImage out = resize_bicubic(src, 1, 2);
  // taps at src x = 0.5 and 2.5: weights (-0.0625, 0.5625, 0.5625, -0.0625)
  CHECK(out.at(0, 0, 0) == doctest::Approx(0.175).epsilon(1e-6));
  CHECK(out.at(0, 1, 0) == doctest::Approx(0.625).epsilon(1e-6));
}

TEST_CASE("bicubic resize matches a direct 2-d reference") {
  std::mt19937 rng(31);
  for (int trial = 0; trial < 8; ++trial) {
    const int h = uniform_int(rng, 4, 24), w = uniform_int(rng, 4, 24);
    const int nh = uniform_int(rng, 2, 30), nw = uniform_int(rng, 2, 30);
    RasterImage img = RasterImage::make(h, w, trial % 2 ? 3 : 1);
    for (float& v : img.data) v = uniform01(rng);
    const RasterImage got = resize_bicubic(img, nh, nw);
    const RasterImage want = ref_bicubic(img, nh, nw);
    REQUIRE(got.data.size() == want.data.size());
    for (std::size_t i = 0; i < got.data.size(); ++i) {
      CHECK(std::abs(got.data[i] - want.data[i]) < 1e-4f);
      CHECK(got.data[i] >= 0.0f);
      CHECK(got.data[i] <= 1.0f);
    }
  }
}
