#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include "doctest.h"
#include "gridseg/codec.hpp"
#include "gridseg/eval.hpp"
#include "gridseg/gridize.hpp"
#include "gridseg/training.hpp"

using namespace gridseg;
namespace fs = std::filesystem;

namespace {

fs::path temp_dir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / "gridseg_eval_tests" / name;
  fs::create_directories(dir);
  return dir;
}

std::string read_file(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  std::stringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

RasterImage map_1xn(std::initializer_list<float> vals) {
  RasterImage s = RasterImage::make(1, static_cast<int>(vals.size()), 1);
  std::copy(vals.begin(), vals.end(), s.data.begin());
  return s;
}

BinaryMask mask_1xn(std::initializer_list<int> vals) {
  BinaryMask m = BinaryMask::make(1, static_cast<int>(vals.size()));
  std::copy(vals.begin(), vals.end(), m.data.begin());
  return m;
}

// direct per-threshold scan, the oracle pr_curve must match exactly
std::vector<PrPoint> brute_pr(const RasterImage& s, const BinaryMask& gt) {
  std::vector<PrPoint> out(256);
  for (int t = 0; t < 256; ++t) {
    const double tau = static_cast<double>(t) / 255.0;
    std::int64_t pred = 0, tp = 0, npos = 0;
    for (std::size_t i = 0; i < s.data.size(); ++i) {
      npos += gt.data[i];
      if (static_cast<double>(s.data[i]) > tau) {
        ++pred;
        tp += gt.data[i];
      }
    }
    out[t].tau = tau;
    out[t].precision = pred ? static_cast<double>(tp) / pred : 0.0;
    out[t].recall = static_cast<double>(tp) / npos;
  }
  return out;
}

}  // namespace

TEST_CASE("mae compares maps to masks") {
  CHECK(mae(map_1xn({0.25f, 0.75f}), mask_1xn({0, 1})) ==
        doctest::Approx(0.25).epsilon(1e-12));
  CHECK(mae(map_1xn({0.0f, 1.0f}), mask_1xn({0, 1})) == 0.0);
  CHECK(mae(map_1xn({0.5f, 0.5f, 0.5f}), mask_1xn({1, 0, 1})) ==
        doctest::Approx(0.5).epsilon(1e-12));
  CHECK_THROWS_AS(mae(map_1xn({0.5f}), mask_1xn({0, 1})), input_error);
  CHECK_THROWS_AS(mae(RasterImage::make(1, 2, 3, 0.5f), mask_1xn({0, 1})),
                  input_error);
}

TEST_CASE("pr curve hand values on a 2x2 map") {
  RasterImage s = RasterImage::make(2, 2, 1);
  s.data = {0.9f, 0.6f, 0.4f, 0.1f};
  BinaryMask gt = BinaryMask::make(2, 2);
  gt.data = {1, 1, 0, 0};
  const auto pr = pr_curve(s, gt);
  REQUIRE(pr.size() == 256);
  for (int t = 0; t < 256; ++t)
    CHECK(pr[t].tau == static_cast<double>(t) / 255.0);

  CHECK(pr[0].precision == doctest::Approx(0.5).epsilon(1e-12));  // all 4 pass
  CHECK(pr[0].recall == 1.0);
  CHECK(pr[76].precision == doctest::Approx(2.0 / 3.0).epsilon(1e-12));
  CHECK(pr[76].recall == 1.0);
  CHECK(pr[127].precision == 1.0);
  CHECK(pr[127].recall == 1.0);
  CHECK(pr[229].recall == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(pr[255].precision == 0.0);  // empty prediction set
  CHECK(pr[255].recall == 0.0);

  for (int t = 1; t < 256; ++t) CHECK(pr[t].recall <= pr[t - 1].recall);

  CHECK_THROWS_WITH_AS(pr_curve(s, BinaryMask::make(2, 2)),
                       doctest::Contains("no positive"), input_error);
}

TEST_CASE("pr curve matches a per-threshold scan exactly") {
  std::mt19937 rng(17);
  for (int trial = 0; trial < 50; ++trial) {
    const int h = uniform_int(rng, 2, 16);
    const int w = uniform_int(rng, 2, 16);
    RasterImage s = RasterImage::make(h, w, 1);
    for (float& v : s.data) {
      // mix smooth values with exact threshold-grid values
      v = uniform01(rng) < 0.5f
              ? uniform01(rng)
              : static_cast<float>(uniform_int(rng, 0, 255)) / 255.0f;
    }
    BinaryMask gt = BinaryMask::make(h, w);
    bool any = false;
    for (auto& v : gt.data) {
      v = uniform01(rng) < 0.4f ? 1 : 0;
      any = any || v;
    }
    if (!any) gt.data[0] = 1;

    const auto got = pr_curve(s, gt);
    const auto want = brute_pr(s, gt);
    REQUIRE(got.size() == want.size());
    for (int t = 0; t < 256; ++t) {
      CHECK(got[t].precision == want[t].precision);
      CHECK(got[t].recall == want[t].recall);
    }
  }
}

TEST_CASE("adaptive fbeta doubles the mean and weighs precision") {
  // 5 bright pixels, 4 of them correct, 8 GT positives:
  // PRE 0.8, REC 0.5, tau = 2 * 0.3 = 0.6
  RasterImage s = RasterImage::make(4, 5, 1, 0.1f);
  BinaryMask gt = BinaryMask::make(4, 5);
  for (int i = 0; i < 5; ++i) s.data[i] = 0.9f;
  for (int i = 1; i < 5; ++i) gt.data[i] = 1;    // 4 bright hits
  for (int i = 10; i < 14; ++i) gt.data[i] = 1;  // 4 dim misses
  const FbetaResult r = adaptive_fbeta(s, gt);
  CHECK(r.tau == doctest::Approx(0.6).epsilon(1e-6));
  CHECK(r.precision == doctest::Approx(0.8).epsilon(1e-9));
  CHECK(r.recall == doctest::Approx(0.5).epsilon(1e-9));
  CHECK(r.fbeta == doctest::Approx(0.7027).epsilon(1e-4));
  CHECK(r.fbeta == doctest::Approx(1.3 * 0.8 * 0.5 / (0.3 * 0.8 + 0.5)).epsilon(1e-9));

  const BinaryMask b = adaptive_binarize(s);
  std::int64_t on = 0;
  for (int i = 0; i < 20; ++i) on += b.data[i];
  CHECK(on == 5);
  for (int i = 0; i < 5; ++i) CHECK(b.data[i] == 1);
}

TEST_CASE("adaptive threshold is capped below one") {
  RasterImage s = RasterImage::make(2, 2, 1, 1.0f);
  s.data[3] = 0.9f;
  BinaryMask gt = BinaryMask::make(2, 2);
  gt.data = {1, 1, 1, 0};
  const FbetaResult r = adaptive_fbeta(s, gt);
  CHECK(r.tau == doctest::Approx(1.0 - 1.0 / 510.0).epsilon(1e-12));
  CHECK(r.precision == 1.0);  // the three 1.0 pixels survive the cap
  CHECK(r.recall == 1.0);
}

TEST_CASE("fbeta is zero when nothing is predicted and nothing hit") {
  const RasterImage s = RasterImage::make(3, 3, 1, 0.0f);
  BinaryMask gt = BinaryMask::make(3, 3);
  gt.data[4] = 1;
  const FbetaResult r = adaptive_fbeta(s, gt);
  CHECK(r.precision == 0.0);
  CHECK(r.recall == 0.0);
  CHECK(r.fbeta == 0.0);
}

TEST_CASE("majority vote needs more than half of the maps") {
  // 1x8 maps: bright set selected, dim elsewhere
  const auto sel_map = [](std::initializer_list<int> sel) {
    RasterImage s = RasterImage::make(1, 8, 1, 0.05f);
    for (const int i : sel) s.data[static_cast<std::size_t>(i)] = 0.9f;
    return s;
  };
  const std::vector<RasterImage> trio{sel_map({0, 1, 3}), sel_map({0, 2, 3}),
                                      sel_map({0, 5})};
  const BinaryMask v3 = majority_vote(trio);
  CHECK(v3.data == std::vector<std::uint8_t>{1, 0, 0, 1, 0, 0, 0, 0});

  // even count: 2 of 4 agreeing is not enough
  const std::vector<RasterImage> quad{sel_map({0, 1}), sel_map({0, 1}),
                                      sel_map({0, 2}), sel_map({0, 3})};
  const BinaryMask v4 = majority_vote(quad);
  CHECK(v4.data == std::vector<std::uint8_t>{1, 0, 0, 0, 0, 0, 0, 0});

  // single map degenerates to the adaptive binarization
  const RasterImage solo = sel_map({2, 6});
  const BinaryMask v1 = majority_vote({solo});
  CHECK(v1.data == adaptive_binarize(solo).data);

  // unanimous copies change nothing, order does not matter
  const std::vector<RasterImage> copies{solo, solo, solo};
  CHECK(majority_vote(copies).data == adaptive_binarize(solo).data);
  const std::vector<RasterImage> shuffled{trio[2], trio[0], trio[1]};
  CHECK(majority_vote(shuffled).data == v3.data);

  CHECK_THROWS_AS(majority_vote({}), input_error);
}

TEST_CASE("downsample dims mirror the cell budget arithmetic") {
  const GridDims a = downsample_dims(300, 400, 950);
  CHECK(a.rows == 27);
  CHECK(a.cols == 35);
  const GridDims b = downsample_dims(240, 240, 900);
  CHECK(b.rows == 30);
  CHECK(b.cols == 30);
  const GridDims c = downsample_dims(100, 100, 4);
  CHECK(c.rows == 2);
  CHECK(c.cols == 2);
}

TEST_CASE("baseline downsampling keeps constants and binary masks") {
  const RasterImage img = RasterImage::make(120, 160, 3, 0.625f);
  BinaryMask mask = BinaryMask::make(120, 160);
  for (int y = 0; y < 120; ++y)
    for (int x = 0; x < 80; ++x) mask.at(y, x) = 1;

  const auto [low, lowmask] = downsample_baseline(img, mask, 96);
  const GridDims dims = downsample_dims(120, 160, 96);
  CHECK(low.height == dims.rows);
  CHECK(low.width == dims.cols);
  CHECK(low.channels == 3);
  for (const float v : low.data) CHECK(v == doctest::Approx(0.625).epsilon(1e-6));
  REQUIRE(lowmask.height == dims.rows);
  std::int64_t on = 0;
  for (const auto v : lowmask.data) {
    CHECK((v == 0 || v == 1));
    on += v;
  }
  const double frac = static_cast<double>(on) / (dims.rows * dims.cols);
  CHECK(frac > 0.4);
  CHECK(frac < 0.6);

  RasterImage lowgray = RasterImage::make(low.height, low.width, 1);
  for (int y = 0; y < low.height; ++y)
    for (int x = 0; x < low.width; ++x) lowgray.at(y, x, 0) = low.at(y, x, 0);
  const RasterImage up = upsample_prediction(lowgray, 120, 160);
  CHECK(up.height == 120);
  CHECK(up.width == 160);
  for (const float v : up.data) CHECK(v == doctest::Approx(0.625).epsilon(1e-6));

  // sharp steps may ring, the upsample stays clamped
  RasterImage steps = RasterImage::make(6, 6, 1);
  for (int y = 0; y < 6; ++y)
    for (int x = 0; x < 6; ++x) steps.at(y, x, 0) = (x + y) % 2 ? 1.0f : 0.0f;
  const RasterImage up2 = upsample_prediction(steps, 60, 60);
  for (const float v : up2.data) {
    CHECK(v >= 0.0f);
    CHECK(v <= 1.0f);
  }
}

TEST_CASE("downsample sample prep mirrors the grid encoder contract") {
  const fs::path dir = temp_dir("lowres");
  const auto entries = generate_synthetic(dir.string(), 2, 55);
  PrepStats stats;
  const auto samples = prepare_downsample_samples(entries, {80}, 2, &stats);
  CHECK(stats.used == 2);
  CHECK(stats.skipped == 0);
  REQUIRE(samples.size() == 2);
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const RasterImage img = load_image(entries[i].image_path);
    const GridDims dims = downsample_dims(img.height, img.width, 80);
    CHECK(samples[i].input.rows == dims.rows);
    CHECK(samples[i].input.cols == dims.cols);
    CHECK(samples[i].input.channels == 3);
    const auto [lo, hi] =
        std::minmax_element(samples[i].input.data.begin(), samples[i].input.data.end());
    CHECK(*lo == 0.0f);
    CHECK(*hi == 1.0f);
    for (const float v : samples[i].target.data) CHECK((v == 0.0f || v == 1.0f));
  }
}

TEST_CASE("predictor specs parse into the three kinds") {
  const Predictor gt = make_predictor("stub:gt");
  CHECK(gt.kind == Predictor::Kind::stub_gt);
  const Predictor c = make_predictor("stub:const=0.25");
  CHECK(c.kind == Predictor::Kind::stub_const);
  CHECK(c.const_value == 0.25f);
  CHECK_THROWS_AS(make_predictor("stub:wat"), input_error);
  CHECK_THROWS_AS(make_predictor("stub:const=x"), input_error);
  CHECK_THROWS_AS(make_predictor("/no/such/model.gsnet"), input_error);

  NetworkModel m = make_model(2, 1, 3);
  std::mt19937 rng(61);
  xavier_init(m, rng);
  const fs::path dir = temp_dir("spec");
  const std::string path = (dir / "m.gsnet").string();
  save_model(m, path);
  const Predictor net = make_predictor(path);
  CHECK(net.kind == Predictor::Kind::network);
  CHECK(net.model.filters == 2);
}

TEST_CASE("network predictions are cell-constant full-resolution maps") {
  std::mt19937 rng(62);
  const SynthSample scene = synth_image(rng);
  NetworkModel m = make_model(2, 1, 3);
  xavier_init(m, rng);

  const RasterImage map = predict_saliency(m, scene.image, 80, 1);
  CHECK(map.height == scene.image.height);
  CHECK(map.width == scene.image.width);
  CHECK(map.channels == 1);
  for (const float v : map.data) {
    CHECK(v > 0.0f);
    CHECK(v < 1.0f);
  }

  const SuperpixelGrid grid = gridize(scene.image, 80, 1);
  std::vector<float> per_cell(
      static_cast<std::size_t>(grid.dims.rows) * grid.dims.cols,
      -1.0f);
  for (std::size_t p = 0; p < grid.labels.size(); ++p) {
    float& slot = per_cell[static_cast<std::size_t>(grid.labels[p])];
    if (slot < 0.0f) slot = map.data[p];
    CHECK(map.data[p] == slot);
  }

  const RasterImage again = predict_saliency(m, scene.image, 80, 3);
  CHECK(again.data == map.data);

  const RasterImage base = predict_baseline(m, scene.image, 80, 1);
  CHECK(base.height == scene.image.height);
  CHECK(base.width == scene.image.width);
  for (const float v : base.data) {
    CHECK(v >= 0.0f);
    CHECK(v <= 1.0f);
  }
}

TEST_CASE("quantized ground truth beats a constant map on a dataset") {
  const fs::path dir = temp_dir("dataset");
  const auto entries = generate_synthetic(dir.string(), 3, 99);

  Predictor gt = make_predictor("stub:gt");
  const EvalReport rep =
      evaluate_dataset(gt, entries, {100}, EvalMode::single, 2);
  REQUIRE(rep.rows.size() == 3);
  CHECK(rep.excluded.empty());
  REQUIRE(rep.pr.size() == 256);

  // row metrics equal the hand-computed quantized-GT comparison
  const RasterImage img = load_image(entries[0].image_path);
  const BinaryMask mask = load_mask(entries[0].mask_path);
  const SuperpixelGrid grid = gridize(img, 100, 1);
  const RasterImage quant = reconstruct(encode_label(mask, grid), grid);
  CHECK(rep.rows[0].id == entries[0].image_path);
  CHECK(rep.rows[0].mae == doctest::Approx(mae(quant, mask)).epsilon(1e-12));
  const FbetaResult fb = adaptive_fbeta(quant, mask);
  CHECK(rep.rows[0].fbeta == doctest::Approx(fb.fbeta).epsilon(1e-12));

  double sum_mae = 0.0;
  for (const auto& r : rep.rows) {
    CHECK(r.mae <= 0.10);
    CHECK(r.fbeta >= 0.80);
    sum_mae += r.mae;
  }
  CHECK(rep.mean_mae == doctest::Approx(sum_mae / 3.0).epsilon(1e-12));

  Predictor flat = make_predictor("stub:const=0.5");
  const EvalReport rep_flat =
      evaluate_dataset(flat, entries, {100}, EvalMode::single, 2);
  REQUIRE(rep_flat.rows.size() == 3);
  for (const auto& r : rep_flat.rows) {
    CHECK(r.mae == doctest::Approx(0.5).epsilon(1e-6));
    CHECK(r.fbeta == 0.0);  // tau caps at ~0.998, nothing survives strictly
  }
  CHECK(rep.mean_mae < rep_flat.mean_mae);
  CHECK(rep.mean_fbeta > rep_flat.mean_fbeta);

  // voting across granularities stays close to the ground truth
  const EvalReport rep_vote =
      evaluate_dataset(gt, entries, {80, 100, 120}, EvalMode::vote, 2);
  REQUIRE(rep_vote.rows.size() == 3);
  for (const auto& r : rep_vote.rows) {
    CHECK(r.mae <= 0.15);
    CHECK(r.fbeta >= 0.75);
  }

  // thread count leaves the report untouched
  const EvalReport rep1 = evaluate_dataset(gt, entries, {100}, EvalMode::single, 1);
  REQUIRE(rep1.rows.size() == 3);
  for (std::size_t i = 0; i < 3; ++i) {
    CHECK(rep1.rows[i].mae == rep.rows[i].mae);
    CHECK(rep1.rows[i].fbeta == rep.rows[i].fbeta);
  }
}

TEST_CASE("broken images are excluded, not fatal") {
  const fs::path dir = temp_dir("excluded");
  auto entries = generate_synthetic(dir.string(), 2, 7);
  entries.push_back({(dir / "ghost.png").string(), (dir / "ghost_m.png").string()});

  Predictor gt = make_predictor("stub:gt");
  const EvalReport rep =
      evaluate_dataset(gt, entries, {90}, EvalMode::single, 2);
  CHECK(rep.rows.size() == 2);
  REQUIRE(rep.excluded.size() == 1);
  CHECK(rep.excluded[0].find("ghost.png") != std::string::npos);

  const std::vector<ManifestEntry> all_bad{entries.back()};
  CHECK_THROWS_AS(evaluate_dataset(gt, all_bad, {90}, EvalMode::single, 1),
                  input_error);
}

TEST_CASE("report files carry the accounting header and mean row") {
  const fs::path dir = temp_dir("reports");
  const auto entries = generate_synthetic(dir.string(), 2, 8);
  Predictor gt = make_predictor("stub:gt");
  const EvalReport rep = evaluate_dataset(gt, entries, {90}, EvalMode::single, 2);

  const fs::path csv = dir / "out.report.csv";
  write_report_csv(csv.string(), rep);
  const std::string text = read_file(csv);
  CHECK(text.rfind("# images 2 excluded 0", 0) == 0);
  CHECK(text.find("image_id,mae,fbeta,precision,recall,tau\n") != std::string::npos);
  CHECK(text.find("\nmean,") != std::string::npos);
  CHECK(std::count(text.begin(), text.end(), '\n') == 5);

  const fs::path prcsv = dir / "out.pr.csv";
  write_pr_csv(prcsv.string(), rep);
  const std::string prtext = read_file(prcsv);
  CHECK(std::count(prtext.begin(), prtext.end(), '\n') == 257);
  CHECK(prtext.rfind("tau,precision,recall", 0) == 0);

  const fs::path svg = dir / "pr.svg";
  write_pr_svg(svg.string(), rep.pr);
  const std::string svgtext = read_file(svg);
  CHECK(svgtext.find("<svg") != std::string::npos);
  CHECK(svgtext.find("polyline") != std::string::npos);

  const fs::path bars = dir / "bars.svg";
  write_bars_svg(bars.string(), {{"a", 0.5}, {"b", 0.9}});
  const std::string barstext = read_file(bars);
  CHECK(barstext.find("<svg") != std::string::npos);
  CHECK(barstext.find("rect") != std::string::npos);
}
