#include "gridseg/eval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <optional>

#include "gridseg/codec.hpp"
#include "gridseg/gridize.hpp"

namespace gridseg {

namespace {

constexpr double kBeta2 = 0.3;
constexpr double kTauCap = 1.0 - 1.0 / 510.0;

void check_dims(const RasterImage& s, const BinaryMask& gt) {
  if (s.channels != 1) throw input_error("saliency map must be 1-channel");
  if (s.height != gt.height || s.width != gt.width)
    throw input_error("saliency map and ground truth dimensions differ");
}

std::int64_t count_positive(const BinaryMask& gt) {
  std::int64_t n = 0;
  for (const std::uint8_t v : gt.data) n += v != 0;
  return n;
}

double fbeta_of(double pre, double rec) {
  if (pre == 0.0 && rec == 0.0) return 0.0;
  return (1.0 + kBeta2) * pre * rec / (kBeta2 * pre + rec);
}

double adaptive_tau(const RasterImage& s) {
  double sum = 0.0;
  for (const float v : s.data) sum += v;
  return std::min(2.0 * sum / static_cast<double>(s.data.size()), kTauCap);
}

Tensor4 tensor_from_grid(const GridTensor& g) {
  Tensor4 t = Tensor4::make(1, g.rows, g.cols, g.channels);
  std::copy(g.data.begin(), g.data.end(), t.v.begin());
  return t;
}

GridTensor grid_from_image(const RasterImage& img) {
  GridTensor g = GridTensor::make(img.height, img.width, img.channels);
  g.data = img.data;
  return g;
}

RasterImage image_from_probs(const Tensor4& probs) {
  RasterImage out = RasterImage::make(probs.h, probs.w, 1);
  out.data.assign(probs.v.begin(), probs.v.end());
  for (const float v : out.data)
    if (!std::isfinite(v))
      throw numeric_error("model produced a non-finite saliency value");
  return out;
}

}  // namespace

double mae(const RasterImage& s, const BinaryMask& gt) {
  check_dims(s, gt);
  double sum = 0.0;
  for (std::size_t i = 0; i < s.data.size(); ++i)
    sum += std::abs(static_cast<double>(s.data[i]) - gt.data[i]);
  return sum / static_cast<double>(s.data.size());
}

std::vector<PrPoint> pr_curve(const RasterImage& s, const BinaryMask& gt) {
  check_dims(s, gt);
  const std::int64_t npos = count_positive(gt);
  if (npos == 0)
    throw input_error("ground truth has no positive pixel");

  // Bin k holds pixels with ceil(255*S) == k, so the prediction set at
  // tau = t/255 is exactly the bins above t.
  std::int64_t all[256] = {0}, pos[256] = {0};
  for (std::size_t i = 0; i < s.data.size(); ++i) {
    int k = static_cast<int>(
        std::ceil(255.0 * static_cast<double>(s.data[i])));
    k = std::clamp(k, 0, 255);
    ++all[k];
    pos[k] += gt.data[i] != 0;
  }
  std::vector<PrPoint> out(256);
  std::int64_t pred = 0, tp = 0;
  for (int t = 255; t >= 0; --t) {
    if (t < 255) {
      pred += all[t + 1];
      tp += pos[t + 1];
    }
    out[static_cast<std::size_t>(t)] = {
        t / 255.0,
        pred > 0 ? static_cast<double>(tp) / static_cast<double>(pred) : 0.0,
        static_cast<double>(tp) / static_cast<double>(npos)};
  }
  return out;
}

FbetaResult adaptive_fbeta(const RasterImage& s, const BinaryMask& gt) {
  check_dims(s, gt);
  const std::int64_t npos = count_positive(gt);
  if (npos == 0)
    throw input_error("ground truth has no positive pixel");
  const double tau = adaptive_tau(s);
  std::int64_t pred = 0, tp = 0;
  for (std::size_t i = 0; i < s.data.size(); ++i) {
    if (static_cast<double>(s.data[i]) > tau) {
      ++pred;
      tp += gt.data[i] != 0;
    }
  }
  FbetaResult r;
  r.tau = tau;
  r.precision = pred > 0 ? static_cast<double>(tp) / static_cast<double>(pred) : 0.0;
  r.recall = static_cast<double>(tp) / static_cast<double>(npos);
  r.fbeta = fbeta_of(r.precision, r.recall);
  return r;
}

BinaryMask adaptive_binarize(const RasterImage& s) {
  if (s.channels != 1) throw input_error("saliency map must be 1-channel");
  const double tau = adaptive_tau(s);
  BinaryMask out = BinaryMask::make(s.height, s.width);
  for (std::size_t i = 0; i < s.data.size(); ++i)
    out.data[i] = static_cast<double>(s.data[i]) > tau ? 1 : 0;
  return out;
}

BinaryMask majority_vote(const std::vector<RasterImage>& maps) {
  if (maps.empty()) throw input_error("majority vote needs at least one map");
  const int H = maps[0].height, W = maps[0].width;
  std::vector<int> votes(static_cast<std::size_t>(H) * W, 0);
  for (const RasterImage& m : maps) {
    if (m.height != H || m.width != W)
      throw input_error("majority vote maps have differing dimensions");
    const BinaryMask b = adaptive_binarize(m);
    for (std::size_t i = 0; i < votes.size(); ++i) votes[i] += b.data[i];
  }
  const int need = (static_cast<int>(maps.size()) + 2) / 2;
  BinaryMask out = BinaryMask::make(H, W);
  for (std::size_t i = 0; i < votes.size(); ++i)
    out.data[i] = votes[i] >= need ? 1 : 0;
  return out;
}

GridDims downsample_dims(int img_h, int img_w, int target_n) {
  if (img_h < 1 || img_w < 1 || target_n < 1)
    throw input_error("invalid downsampling request");
  const double n = target_n;
  const int h = std::max<long>(
      2, std::lround(std::sqrt(n * img_h / img_w)));
  const int w = std::max<long>(2, std::lround(n / h));
  return {h, w};
}

std::pair<RasterImage, BinaryMask> downsample_baseline(const RasterImage& img,
                                                       const BinaryMask& mask,
                                                       int target_n) {
  if (mask.height != img.height || mask.width != img.width)
    throw input_error("image and mask dimensions differ");
  const GridDims d = downsample_dims(img.height, img.width, target_n);
  RasterImage low = resize_bicubic(img, d.rows, d.cols);
  RasterImage mf = RasterImage::make(mask.height, mask.width, 1);
  for (std::size_t i = 0; i < mask.data.size(); ++i)
    mf.data[i] = mask.data[i] ? 1.0f : 0.0f;
  const RasterImage mlow = resize_bicubic(mf, d.rows, d.cols);
  BinaryMask out = BinaryMask::make(d.rows, d.cols);
  for (std::size_t i = 0; i < out.data.size(); ++i)
    out.data[i] = mlow.data[i] >= 0.5f ? 1 : 0;
  return {std::move(low), std::move(out)};
}

RasterImage upsample_prediction(const RasterImage& lowres, int img_h,
                                int img_w) {
  if (lowres.channels != 1)
    throw input_error("prediction must be 1-channel");
  return resize_bicubic(lowres, img_h, img_w);
}

std::vector<Sample> prepare_downsample_samples(
    const std::vector<ManifestEntry>& entries,
    const std::vector<int>& granularities, int threads, PrepStats* stats) {
  if (entries.empty()) throw input_error("no manifest entries");
  if (granularities.empty()) throw input_error("no granularities");
  const std::size_t per = granularities.size();
  std::vector<std::optional<Sample>> slots(entries.size() * per);
  std::vector<std::string> errors(slots.size());

  parallel_for(static_cast<std::int64_t>(entries.size()), threads,
               [&](std::int64_t lo, std::int64_t hi) {
    for (std::int64_t e = lo; e < hi; ++e) {
      const ManifestEntry& ent = entries[e];
      RasterImage img;
      BinaryMask mask;
      std::string load_err;
      try {
        img = load_image(ent.image_path);
        mask = load_mask(ent.mask_path);
        if (mask.height != img.height || mask.width != img.width)
          throw input_error("image and mask dimensions differ");
      } catch (const std::exception& ex) {
        load_err = ex.what();
      }
      for (std::size_t gi = 0; gi < per; ++gi) {
        const std::size_t slot = static_cast<std::size_t>(e) * per + gi;
        if (!load_err.empty()) {
          errors[slot] = ent.image_path + ": " + load_err;
          continue;
        }
        try {
          auto [low, mlow] = downsample_baseline(img, mask, granularities[gi]);
          Sample s;
          s.input = grid_from_image(low);
          minmax_normalize(s.input);
          s.target = GridTensor::make(mlow.height, mlow.width, 1);
          for (std::size_t i = 0; i < mlow.data.size(); ++i)
            s.target.data[i] = mlow.data[i] ? 1.0f : 0.0f;
          s.granularity = granularities[gi];
          s.source = ent.image_path;
          slots[slot] = std::move(s);
        } catch (const std::exception& ex) {
          errors[slot] = ent.image_path + " @" +
                         std::to_string(granularities[gi]) + ": " + ex.what();
        }
      }
    }
  });

  std::vector<Sample> out;
  out.reserve(slots.size());
  for (std::size_t i = 0; i < slots.size(); ++i) {
    if (slots[i]) {
      out.push_back(std::move(*slots[i]));
    } else if (stats) {
      ++stats->skipped;
      stats->messages.push_back(errors[i]);
    }
  }
  if (stats) stats->used += static_cast<std::int64_t>(out.size());
  return out;
}

Predictor make_predictor(const std::string& spec) {
  Predictor p;
  if (spec == "stub:gt") {
    p.kind = Predictor::Kind::stub_gt;
  } else if (spec.rfind("stub:const=", 0) == 0) {
    p.kind = Predictor::Kind::stub_const;
    const std::string v = spec.substr(11);
    try {
      std::size_t used = 0;
      p.const_value = std::stof(v, &used);
      if (used != v.size()) throw std::invalid_argument(v);
    } catch (const std::exception&) {
      throw input_error("bad constant in predictor spec: " + spec);
    }
  } else if (spec.rfind("stub:", 0) == 0) {
    throw input_error("unknown stub predictor: " + spec);
  } else {
    p.model = load_model(spec);
  }
  return p;
}

RasterImage predict_saliency(NetworkModel& model, const RasterImage& img,
                             int granularity, int threads) {
  const SuperpixelGrid grid = gridize(img, granularity, threads);
  GridTensor x = encode_image(img, grid);
  minmax_normalize(x);
  const Tensor4 probs = forward(model, tensor_from_grid(x), false, nullptr,
                                false, threads);
  GridTensor s = GridTensor::make(x.rows, x.cols, 1);
  s.data.assign(probs.v.begin(), probs.v.end());
  for (const float v : s.data)
    if (!std::isfinite(v))
      throw numeric_error("model produced a non-finite saliency value");
  return reconstruct(s, grid);
}

RasterImage predict_baseline(NetworkModel& model, const RasterImage& img,
                             int granularity, int threads) {
  const GridDims d = downsample_dims(img.height, img.width, granularity);
  const RasterImage low = resize_bicubic(img, d.rows, d.cols);
  GridTensor x = grid_from_image(low);
  minmax_normalize(x);
  const Tensor4 probs = forward(model, tensor_from_grid(x), false, nullptr,
                                false, threads);
  return upsample_prediction(image_from_probs(probs), img.height, img.width);
}

namespace {

RasterImage constant_map(int h, int w, float v) {
  return RasterImage::make(h, w, 1, v);
}

// One full-resolution map for one granularity under the given predictor.
RasterImage one_map(Predictor& pred, const RasterImage& img,
                    const BinaryMask& mask, int granularity, EvalMode mode,
                    int threads) {
  if (mode == EvalMode::baseline) {
    switch (pred.kind) {
      case Predictor::Kind::network:
        return predict_baseline(pred.model, img, granularity, threads);
      case Predictor::Kind::stub_gt: {
        const auto [low, mlow] = downsample_baseline(img, mask, granularity);
        RasterImage s = RasterImage::make(mlow.height, mlow.width, 1);
        for (std::size_t i = 0; i < mlow.data.size(); ++i)
          s.data[i] = mlow.data[i] ? 1.0f : 0.0f;
        return upsample_prediction(s, img.height, img.width);
      }
      case Predictor::Kind::stub_const:
        return constant_map(img.height, img.width, pred.const_value);
    }
  }
  switch (pred.kind) {
    case Predictor::Kind::network:
      return predict_saliency(pred.model, img, granularity, threads);
    case Predictor::Kind::stub_gt: {
      const SuperpixelGrid grid = gridize(img, granularity, threads);
      return reconstruct(encode_label(mask, grid), grid);
    }
    case Predictor::Kind::stub_const:
      return constant_map(img.height, img.width, pred.const_value);
  }
  throw input_error("unhandled predictor kind");
}

}  // namespace

EvalReport evaluate_dataset(Predictor& pred,
                            const std::vector<ManifestEntry>& entries,
                            const std::vector<int>& granularities,
                            EvalMode mode, int threads) {
  if (entries.empty()) throw input_error("no manifest entries");
  if (granularities.empty()) throw input_error("no granularities");

  struct Slot {
    bool ok = false;
    ImageEval row;
    std::vector<PrPoint> pr;
    std::string error;
  };
  std::vector<Slot> slots(entries.size());

  parallel_for(static_cast<std::int64_t>(entries.size()), threads,
               [&](std::int64_t lo, std::int64_t hi) {
    for (std::int64_t e = lo; e < hi; ++e) {
      Slot& slot = slots[static_cast<std::size_t>(e)];
      const ManifestEntry& ent = entries[static_cast<std::size_t>(e)];
      try {
        const RasterImage img = load_image(ent.image_path);
        const BinaryMask gt = load_mask(ent.mask_path);
        if (gt.height != img.height || gt.width != img.width)
          throw input_error("image and mask dimensions differ");

        RasterImage s;
        if (mode == EvalMode::vote) {
          std::vector<RasterImage> maps;
          maps.reserve(granularities.size());
          for (const int n : granularities)
            maps.push_back(one_map(pred, img, gt, n, mode, 1));
          const BinaryMask voted = majority_vote(maps);
          s = RasterImage::make(img.height, img.width, 1);
          for (std::size_t i = 0; i < voted.data.size(); ++i)
            s.data[i] = voted.data[i] ? 1.0f : 0.0f;
        } else {
          s = one_map(pred, img, gt, granularities[0], mode, 1);
        }

        slot.row.id = ent.image_path;
        slot.row.mae = mae(s, gt);
        const FbetaResult f = adaptive_fbeta(s, gt);
        slot.row.fbeta = f.fbeta;
        slot.row.precision = f.precision;
        slot.row.recall = f.recall;
        slot.row.tau = f.tau;
        slot.pr = pr_curve(s, gt);
        slot.ok = true;
      } catch (const std::exception& ex) {
        slot.error = ent.image_path + ": " + ex.what();
      }
    }
  });

  EvalReport rep;
  rep.pr.assign(256, PrPoint{});
  for (int t = 0; t < 256; ++t) rep.pr[static_cast<std::size_t>(t)].tau = t / 255.0;
  for (const Slot& slot : slots) {
    if (!slot.ok) {
      rep.excluded.push_back(slot.error);
      continue;
    }
    rep.rows.push_back(slot.row);
    rep.mean_mae += slot.row.mae;
    rep.mean_fbeta += slot.row.fbeta;
    rep.mean_precision += slot.row.precision;
    rep.mean_recall += slot.row.recall;
    rep.mean_tau += slot.row.tau;
    for (int t = 0; t < 256; ++t) {
      rep.pr[static_cast<std::size_t>(t)].precision +=
          slot.pr[static_cast<std::size_t>(t)].precision;
      rep.pr[static_cast<std::size_t>(t)].recall +=
          slot.pr[static_cast<std::size_t>(t)].recall;
    }
  }
  if (rep.rows.empty())
    throw input_error("no image could be evaluated");
  const double n = static_cast<double>(rep.rows.size());
  rep.mean_mae /= n;
  rep.mean_fbeta /= n;
  rep.mean_precision /= n;
  rep.mean_recall /= n;
  rep.mean_tau /= n;
  for (PrPoint& p : rep.pr) {
    p.precision /= n;
    p.recall /= n;
  }
  return rep;
}

namespace {

std::string fmt6(double v) {
  char buf[48];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

}  // namespace

void write_report_csv(const std::string& path, const EvalReport& report) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw input_error("cannot open file for writing: " + path);
  f << "# images " << report.rows.size() << " excluded "
    << report.excluded.size() << '\n';
  f << "image_id,mae,fbeta,precision,recall,tau\n";
  for (const ImageEval& r : report.rows) {
    f << r.id << ',' << fmt6(r.mae) << ',' << fmt6(r.fbeta) << ','
      << fmt6(r.precision) << ',' << fmt6(r.recall) << ',' << fmt6(r.tau)
      << '\n';
  }
  f << "mean," << fmt6(report.mean_mae) << ',' << fmt6(report.mean_fbeta)
    << ',' << fmt6(report.mean_precision) << ',' << fmt6(report.mean_recall)
    << ',' << fmt6(report.mean_tau) << '\n';
  if (!f) throw input_error("failed to write " + path);
}

void write_pr_csv(const std::string& path, const EvalReport& report) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw input_error("cannot open file for writing: " + path);
  f << "tau,precision,recall\n";
  for (const PrPoint& p : report.pr)
    f << fmt6(p.tau) << ',' << fmt6(p.precision) << ',' << fmt6(p.recall)
      << '\n';
  if (!f) throw input_error("failed to write " + path);
}

namespace {

constexpr int kSvgW = 480, kSvgH = 360;
constexpr int kMargin = 48;

double plot_x(double v) { return kMargin + v * (kSvgW - 2 * kMargin); }
double plot_y(double v) { return kSvgH - kMargin - v * (kSvgH - 2 * kMargin); }

void svg_header(std::ofstream& f) {
  f << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kSvgW
    << "\" height=\"" << kSvgH << "\" viewBox=\"0 0 " << kSvgW << ' '
    << kSvgH << "\">\n"
    << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
}

void svg_axes(std::ofstream& f, const char* xlabel, const char* ylabel) {
  f << "<line x1=\"" << kMargin << "\" y1=\"" << kSvgH - kMargin
    << "\" x2=\"" << kSvgW - kMargin << "\" y2=\"" << kSvgH - kMargin
    << "\" stroke=\"black\"/>\n"
    << "<line x1=\"" << kMargin << "\" y1=\"" << kSvgH - kMargin
    << "\" x2=\"" << kMargin << "\" y2=\"" << kMargin
    << "\" stroke=\"black\"/>\n"
    << "<text x=\"" << kSvgW / 2 << "\" y=\"" << kSvgH - 12
    << "\" text-anchor=\"middle\" font-size=\"12\">" << xlabel << "</text>\n"
    << "<text x=\"14\" y=\"" << kSvgH / 2
    << "\" text-anchor=\"middle\" font-size=\"12\" transform=\"rotate(-90 14 "
    << kSvgH / 2 << ")\">" << ylabel << "</text>\n";
  for (int i = 0; i <= 5; ++i) {
    const double v = i / 5.0;
    f << "<text x=\"" << fmt6(plot_x(v)) << "\" y=\"" << kSvgH - kMargin + 16
      << "\" text-anchor=\"middle\" font-size=\"10\">" << i * 2 / 10.0
      << "</text>\n"
      << "<text x=\"" << kMargin - 6 << "\" y=\"" << fmt6(plot_y(v) + 4)
      << "\" text-anchor=\"end\" font-size=\"10\">" << i * 2 / 10.0
      << "</text>\n";
  }
}

}  // namespace

void write_pr_svg(const std::string& path, const std::vector<PrPoint>& pr) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw input_error("cannot open file for writing: " + path);
  svg_header(f);
  svg_axes(f, "recall", "precision");
  f << "<polyline fill=\"none\" stroke=\"#c33\" stroke-width=\"1.5\" points=\"";
  for (const PrPoint& p : pr)
    f << fmt6(plot_x(p.recall)) << ',' << fmt6(plot_y(p.precision)) << ' ';
  f << "\"/>\n</svg>\n";
  if (!f) throw input_error("failed to write " + path);
}

void write_bars_svg(const std::string& path,
                    const std::vector<std::pair<std::string, double>>& bars) {
  if (bars.empty()) throw input_error("no bars to plot");
  std::ofstream f(path, std::ios::binary);
  if (!f) throw input_error("cannot open file for writing: " + path);
  svg_header(f);
  svg_axes(f, "", "F-beta");
  const double span = kSvgW - 2.0 * kMargin;
  const double slot = span / static_cast<double>(bars.size());
  for (std::size_t i = 0; i < bars.size(); ++i) {
    const double x = kMargin + slot * (static_cast<double>(i) + 0.2);
    const double h = std::clamp(bars[i].second, 0.0, 1.0) *
                     (kSvgH - 2.0 * kMargin);
    f << "<rect x=\"" << fmt6(x) << "\" y=\"" << fmt6(kSvgH - kMargin - h)
      << "\" width=\"" << fmt6(slot * 0.6) << "\" height=\"" << fmt6(h)
      << "\" fill=\"#48a\"/>\n"
      << "<text x=\"" << fmt6(x + slot * 0.3) << "\" y=\""
      << kSvgH - kMargin + 16 << "\" text-anchor=\"middle\" font-size=\"10\">"
      << bars[i].first << "</text>\n"
      << "<text x=\"" << fmt6(x + slot * 0.3) << "\" y=\""
      << fmt6(kSvgH - kMargin - h - 4)
      << "\" text-anchor=\"middle\" font-size=\"10\">" << fmt6(bars[i].second)
      << "</text>\n";
  }
  f << "</svg>\n";
  if (!f) throw input_error("failed to write " + path);
}

}  // namespace gridseg
