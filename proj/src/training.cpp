#include "gridseg/training.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>

#include "gridseg/gridize.hpp"

namespace fs = std::filesystem;

namespace gridseg {

namespace {

std::string trim(const std::string& s) {
  std::size_t a = s.find_first_not_of(" \t");
  std::size_t b = s.find_last_not_of(" \t");
  return a == std::string::npos ? std::string() : s.substr(a, b - a + 1);
}

void strip_cr(std::string& line) {
  if (!line.empty() && line.back() == '\r') line.pop_back();
}

// Nadam moves the weights at roughly the learning rate no matter how small
// the gradients get, so at short iteration counts the 0.99-momentum running
// stats trail the live activation distribution by a wide margin. Re-estimate
// them with frozen weights before each validation so eval-mode losses (and
// snapshot selection) describe the current weights.
constexpr int kCalibBatches = 400;

void refresh_running_stats(NetworkModel& model, const std::vector<Sample>& train,
                           const TrainConfig& cfg, int threads) {
  BatchScheduler calib(train, cfg.batch_size, cfg.seed + 3);
  for (int k = 0; k < kCalibBatches; ++k) {
    const Batch b = make_batch(train, calib.next());
    forward(model, b.x, true, nullptr, true, threads);
  }
}

}  // namespace

std::vector<ManifestEntry> load_manifest(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw input_error("cannot open manifest: " + path);
  const fs::path base = fs::path(path).parent_path();
  const auto resolve = [&base](const std::string& s) {
    const fs::path p(s);
    return (p.is_absolute() ? p : base / p).string();
  };
  std::vector<ManifestEntry> out;
  std::string line;
  int lineno = 0;
  while (std::getline(f, line)) {
    ++lineno;
    strip_cr(line);
    if (line.empty()) continue;
    const std::size_t tab = line.find('\t');
    if (tab == std::string::npos || tab == 0 || tab + 1 == line.size())
      throw input_error(path + ":" + std::to_string(lineno) +
                        ": expected image_path<TAB>mask_path");
    out.push_back({resolve(line.substr(0, tab)), resolve(line.substr(tab + 1))});
  }
  if (out.empty()) throw input_error("empty manifest: " + path);
  return out;
}

std::vector<Sample> prepare_samples(const std::vector<ManifestEntry>& entries,
                                    const std::vector<int>& granularities,
                                    int threads, PrepStats* stats) {
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
          const SuperpixelGrid grid = gridize(img, granularities[gi], 1);
          Sample s;
          s.input = encode_image(img, grid);
          minmax_normalize(s.input);
          s.target = encode_label(mask, grid);
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

Sample augment_flip(const Sample& s, std::mt19937& rng) {
  Sample out = s;
  if (uniform01(rng) < 0.5f) {
    out.input = flip_horizontal(s.input);
    out.target = flip_horizontal(s.target);
  }
  return out;
}

Batch make_batch(const std::vector<Sample>& samples,
                 const std::vector<int>& idx) {
  if (idx.empty()) throw input_error("empty batch");
  const Sample& first = samples.at(static_cast<std::size_t>(idx[0]));
  const int R = first.input.rows, C = first.input.cols;
  Batch b;
  b.x = Tensor4::make(static_cast<int>(idx.size()), R, C, 3);
  b.y = Tensor4::make(static_cast<int>(idx.size()), R, C, 1);
  const std::size_t xplane = static_cast<std::size_t>(R) * C * 3;
  const std::size_t yplane = static_cast<std::size_t>(R) * C;
  for (std::size_t k = 0; k < idx.size(); ++k) {
    const Sample& s = samples.at(static_cast<std::size_t>(idx[k]));
    if (s.input.rows != R || s.input.cols != C)
      throw input_error("mixed grid shapes in one batch");
    if (s.input.channels != 3 || s.target.channels != 1 ||
        s.target.rows != R || s.target.cols != C)
      throw input_error("sample tensor shape is invalid");
    std::copy(s.input.data.begin(), s.input.data.end(),
              b.x.v.begin() + static_cast<std::ptrdiff_t>(k * xplane));
    std::copy(s.target.data.begin(), s.target.data.end(),
              b.y.v.begin() + static_cast<std::ptrdiff_t>(k * yplane));
  }
  return b;
}

BatchScheduler::BatchScheduler(const std::vector<Sample>& samples,
                               int batch_size, std::uint32_t seed)
    : batch_size_(batch_size), rng_(seed) {
  if (samples.empty()) throw input_error("no samples to schedule");
  if (batch_size < 1) throw input_error("batch size must be >= 1");
  std::vector<std::pair<int, int>> keys;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const std::pair<int, int> key{samples[i].input.rows, samples[i].input.cols};
    std::size_t k = 0;
    while (k < keys.size() && keys[k] != key) ++k;
    if (k == keys.size()) {
      keys.push_back(key);
      buckets_.emplace_back();
    }
    buckets_[k].push_back(static_cast<int>(i));
  }
}

void BatchScheduler::reshuffle() {
  const auto shuffle = [this](std::vector<int>& v) {
    for (std::size_t i = v.size(); i > 1; --i)
      std::swap(v[i - 1],
                v[uniform_int(rng_, 0, static_cast<int>(i) - 1)]);
  };
  std::vector<int> order(buckets_.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);
  shuffle(order);
  queue_.clear();
  for (const int bi : order) {
    std::vector<int> members = buckets_[static_cast<std::size_t>(bi)];
    shuffle(members);
    for (std::size_t at = 0; at < members.size(); at += batch_size_) {
      const std::size_t end =
          std::min(members.size(), at + static_cast<std::size_t>(batch_size_));
      queue_.emplace_back(members.begin() + static_cast<std::ptrdiff_t>(at),
                          members.begin() + static_cast<std::ptrdiff_t>(end));
    }
  }
  pos_ = 0;
}

const std::vector<int>& BatchScheduler::next() {
  if (pos_ >= queue_.size()) reshuffle();
  return queue_[pos_++];
}

std::vector<int> parse_int_list(const std::string& text) {
  std::vector<int> out;
  std::size_t at = 0;
  while (at <= text.size()) {
    const std::size_t comma = std::min(text.find(',', at), text.size());
    const std::string piece = trim(text.substr(at, comma - at));
    if (piece.empty()) throw input_error("empty entry in integer list");
    std::size_t used = 0;
    int v = 0;
    try {
      v = std::stoi(piece, &used);
    } catch (const std::exception&) {
      throw input_error("not an integer: '" + piece + "'");
    }
    if (used != piece.size()) throw input_error("not an integer: '" + piece + "'");
    out.push_back(v);
    at = comma + 1;
  }
  return out;
}

void apply_config_value(TrainConfig& cfg, const std::string& key,
                        const std::string& value) {
  const auto to_int = [&](const std::string& v) {
    std::size_t used = 0;
    int r = 0;
    try {
      r = std::stoi(v, &used);
    } catch (const std::exception&) {
      throw input_error("bad value for config key '" + key + "': " + v);
    }
    if (used != v.size())
      throw input_error("bad value for config key '" + key + "': " + v);
    return r;
  };
  if (key == "filters") {
    cfg.filters = to_int(value);
  } else if (key == "granularities") {
    cfg.granularities = parse_int_list(value);
  } else if (key == "batch_size") {
    cfg.batch_size = to_int(value);
  } else if (key == "learning_rate") {
    try {
      std::size_t used = 0;
      cfg.learning_rate = std::stof(value, &used);
      if (used != value.size()) throw std::invalid_argument(value);
    } catch (const std::exception&) {
      throw input_error("bad value for config key 'learning_rate': " + value);
    }
  } else if (key == "iterations") {
    cfg.iterations = to_int(value);
  } else if (key == "val_interval") {
    cfg.val_interval = to_int(value);
  } else if (key == "seed") {
    cfg.seed = static_cast<std::uint32_t>(to_int(value));
  } else {
    throw input_error("unknown config key '" + key + "'");
  }
}

TrainConfig load_train_config(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw input_error("cannot open config: " + path);
  TrainConfig cfg;
  std::string line;
  int lineno = 0;
  while (std::getline(f, line)) {
    ++lineno;
    strip_cr(line);
    const std::string body = trim(line);
    if (body.empty() || body[0] == '#') continue;
    const std::size_t eq = body.find('=');
    if (eq == std::string::npos)
      throw input_error(path + ":" + std::to_string(lineno) +
                        ": expected key=value");
    apply_config_value(cfg, trim(body.substr(0, eq)), trim(body.substr(eq + 1)));
  }
  return cfg;
}

double validation_loss(NetworkModel& model, const std::vector<Sample>& val,
                       int threads) {
  if (val.empty()) throw input_error("empty validation set");
  std::vector<int> one{0};
  std::vector<Sample> holder(1);
  double sum = 0.0;
  for (const Sample& s : val) {
    holder[0] = s;
    const Batch b = make_batch(holder, one);
    const Tensor4 probs = forward(model, b.x, false, nullptr, false, threads);
    sum += bce_loss(probs, b.y);
  }
  return sum / static_cast<double>(val.size());
}

TrainResult train_model(const TrainConfig& cfg,
                        const std::vector<Sample>& train,
                        const std::vector<Sample>& val, int threads,
                        const std::string& diag_path,
                        const std::function<void(const TrainLogRow&)>& on_row) {
  if (train.empty()) throw input_error("empty training set");
  if (val.empty()) throw input_error("empty validation set");
  if (cfg.iterations < 1 || cfg.batch_size < 1 || cfg.val_interval < 1 ||
      cfg.filters < 1)
    throw input_error("invalid training configuration");

  NetworkModel model = make_model(cfg.filters, 13, 3);
  std::mt19937 init_rng(cfg.seed);
  xavier_init(model, init_rng);
  BatchScheduler sched(train, cfg.batch_size, cfg.seed + 1);
  std::mt19937 aug_rng(cfg.seed + 2);
  TrainState state = make_train_state(model);
  NadamConfig nadam;
  nadam.lr = cfg.learning_rate;

  const auto fail = [&](const std::string& what, std::int64_t it) {
    std::string msg = what + " at iteration " + std::to_string(it);
    if (!diag_path.empty()) {
      try {
        save_model(model, diag_path);
        msg += "; diagnostic model written to " + diag_path;
      } catch (...) {
      }
    }
    return numeric_error(msg);
  };

  TrainResult res;
  res.model = model;
  res.best_val = validation_loss(model, val, threads);
  res.best_iteration = 0;
  res.log.push_back({0, 0.0, res.best_val, false, true, true});
  if (on_row) on_row(res.log.back());

  std::vector<Sample> staged;
  std::vector<int> seq;
  for (std::int64_t it = 1; it <= cfg.iterations; ++it) {
    const std::vector<int>& idx = sched.next();
    staged.clear();
    seq.resize(idx.size());
    for (std::size_t k = 0; k < idx.size(); ++k) {
      staged.push_back(augment_flip(train[static_cast<std::size_t>(idx[k])],
                                    aug_rng));
      seq[k] = static_cast<int>(k);
    }
    const Batch b = make_batch(staged, seq);

    ForwardCache cache;
    forward(model, b.x, true, &cache, true, threads);
    const double loss = bce_loss(cache.probs, b.y);
    if (!std::isfinite(loss)) throw fail("non-finite training loss", it);
    const BackwardResult bw = backward(model, cache, b.y, threads);
    try {
      nadam_step(model, bw.grads, state, nadam);
    } catch (const numeric_error& ex) {
      throw fail(ex.what(), it);
    }

    TrainLogRow row{it, loss, 0.0, true, false, false};
    if (it % cfg.val_interval == 0 || it == cfg.iterations) {
      refresh_running_stats(model, train, cfg, threads);
      const double v = validation_loss(model, val, threads);
      if (!std::isfinite(v)) throw fail("non-finite validation loss", it);
      row.val_loss = v;
      row.has_val = true;
      if (v < res.best_val) {
        res.best_val = v;
        res.best_iteration = it;
        res.model = model;
        row.is_best = true;
      }
    }
    res.log.push_back(row);
    if (on_row) on_row(row);
  }
  return res;
}

void write_train_log(const std::string& path,
                     const std::vector<TrainLogRow>& rows) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw input_error("cannot open file for writing: " + path);
  f << "iteration,train_loss,val_loss,is_best\n";
  char buf[64];
  for (const TrainLogRow& r : rows) {
    f << r.iteration << ',';
    if (r.has_train) {
      std::snprintf(buf, sizeof buf, "%.9g", r.train_loss);
      f << buf;
    }
    f << ',';
    if (r.has_val) {
      std::snprintf(buf, sizeof buf, "%.9g", r.val_loss);
      f << buf;
    }
    f << ',' << (r.is_best ? 1 : 0) << '\n';
  }
  if (!f) throw input_error("failed to write " + path);
}

namespace {

using Pt = std::array<double, 2>;  // (x, y)

double cross(const Pt& o, const Pt& a, const Pt& b) {
  return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0]);
}

std::vector<Pt> convex_hull(std::vector<Pt> pts) {
  std::sort(pts.begin(), pts.end());
  pts.erase(std::unique(pts.begin(), pts.end()), pts.end());
  const std::size_t n = pts.size();
  if (n < 3) return pts;
  std::vector<Pt> hull(2 * n);
  std::size_t k = 0;
  for (std::size_t i = 0; i < n; ++i) {
    while (k >= 2 && cross(hull[k - 2], hull[k - 1], pts[i]) <= 0) --k;
    hull[k++] = pts[i];
  }
  const std::size_t lower = k + 1;
  for (std::size_t i = n - 1; i-- > 0;) {
    while (k >= lower && cross(hull[k - 2], hull[k - 1], pts[i]) <= 0) --k;
    hull[k++] = pts[i];
  }
  hull.resize(k - 1);
  return hull;  // counter-clockwise
}

bool in_convex(const std::vector<Pt>& hull, double x, double y) {
  if (hull.size() < 3) return false;
  const Pt p{x, y};
  for (std::size_t i = 0; i < hull.size(); ++i) {
    if (cross(hull[i], hull[(i + 1) % hull.size()], p) < 0.0) return false;
  }
  return true;
}

using ShapeFn = std::function<bool(double, double)>;

ShapeFn make_ellipse(double cx, double cy, double a, double b, double theta) {
  const double ct = std::cos(theta), st = std::sin(theta);
  return [=](double x, double y) {
    const double dx = x - cx, dy = y - cy;
    const double u = (dx * ct + dy * st) / a;
    const double v = (-dx * st + dy * ct) / b;
    return u * u + v * v <= 1.0;
  };
}

ShapeFn make_bar(double cx, double cy, double len, double thick, double theta) {
  const double ct = std::cos(theta), st = std::sin(theta);
  return [=](double x, double y) {
    const double dx = x - cx, dy = y - cy;
    return std::abs(dx * ct + dy * st) <= len * 0.5 &&
           std::abs(-dx * st + dy * ct) <= thick * 0.5;
  };
}

ShapeFn make_polygon(std::mt19937& rng, double cx, double cy, double extent) {
  const int npt = uniform_int(rng, 6, 12);
  std::vector<Pt> pts;
  pts.reserve(static_cast<std::size_t>(npt));
  for (int i = 0; i < npt; ++i) {
    pts.push_back({cx + uniform(rng, -0.5f, 0.5f) * extent,
                   cy + uniform(rng, -0.5f, 0.5f) * extent});
  }
  const std::vector<Pt> hull = convex_hull(std::move(pts));
  return [hull](double x, double y) { return in_convex(hull, x, y); };
}

constexpr double kPi = 3.14159265358979323846;

}  // namespace

SynthSample synth_image(std::mt19937& rng) {
  const int H = uniform_int(rng, 192, 320);
  const int W = uniform_int(rng, 192, 320);
  const int offset_ch = uniform_int(rng, 0, 2);
  const bool dark = uniform01(rng) < 0.5f;
  const double m = std::min(H, W);

  float corners[3][4];
  for (int c = 0; c < 3; ++c) {
    for (int j = 0; j < 4; ++j) {
      corners[c][j] = c == offset_ch
                          ? (dark ? uniform(rng, 0.20f, 0.37f)
                                  : uniform(rng, 0.63f, 0.80f))
                          : uniform(rng, 0.2f, 0.8f);
    }
  }
  float obj_color[3];
  for (int c = 0; c < 3; ++c) {
    obj_color[c] = c == offset_ch ? (dark ? uniform(rng, 0.80f, 0.95f)
                                          : uniform(rng, 0.05f, 0.20f))
                                  : uniform(rng, 0.1f, 0.9f);
  }

  // value noise on a ~16 px lattice, shared across channels
  constexpr int kCell = 16;
  const int gh = H / kCell + 2, gw = W / kCell + 2;
  std::vector<float> node(static_cast<std::size_t>(gh) * gw);
  for (float& v : node) v = uniform(rng, -0.08f, 0.08f);
  std::vector<float> noise(static_cast<std::size_t>(H) * W);
  for (int y = 0; y < H; ++y) {
    const double gy = static_cast<double>(y) / kCell;
    const int iy = static_cast<int>(gy);
    const double ty = gy - iy;
    for (int x = 0; x < W; ++x) {
      const double gx = static_cast<double>(x) / kCell;
      const int ix = static_cast<int>(gx);
      const double tx = gx - ix;
      const float* row0 = &node[static_cast<std::size_t>(iy) * gw + ix];
      const float* row1 = row0 + gw;
      noise[static_cast<std::size_t>(y) * W + x] = static_cast<float>(
          (1.0 - ty) * ((1.0 - tx) * row0[0] + tx * row0[1]) +
          ty * ((1.0 - tx) * row1[0] + tx * row1[1]));
    }
  }

  SynthSample out;
  out.offset_channel = offset_ch;
  out.background = RasterImage::make(H, W, 3);
  for (int y = 0; y < H; ++y) {
    const double v = H > 1 ? static_cast<double>(y) / (H - 1) : 0.0;
    for (int x = 0; x < W; ++x) {
      const double u = W > 1 ? static_cast<double>(x) / (W - 1) : 0.0;
      const float n = noise[static_cast<std::size_t>(y) * W + x];
      for (int c = 0; c < 3; ++c) {
        const double g =
            (1.0 - v) * ((1.0 - u) * corners[c][0] + u * corners[c][1]) +
            v * ((1.0 - u) * corners[c][2] + u * corners[c][3]);
        out.background.at(y, x, c) =
            std::clamp(static_cast<float>(g) + n, 0.0f, 1.0f);
      }
    }
  }

  const auto rasterize = [&](const std::vector<ShapeFn>& shapes,
                             BinaryMask& mask) {
    std::int64_t area = 0;
    for (int y = 0; y < H; ++y) {
      for (int x = 0; x < W; ++x) {
        bool inside = false;
        for (const ShapeFn& s : shapes) {
          if (s(x, y)) {
            inside = true;
            break;
          }
        }
        mask.at(y, x) = inside ? 1 : 0;
        area += inside;
      }
    }
    return area;
  };

  out.mask = BinaryMask::make(H, W);
  bool accepted = false;
  for (int attempt = 0; attempt < 1000 && !accepted; ++attempt) {
    std::vector<ShapeFn> shapes;
    const double cx = uniform(rng, 0.25f, 0.75f) * W;
    const double cy = uniform(rng, 0.25f, 0.75f) * H;
    if (uniform01(rng) < 0.55f) {
      const double a = uniform(rng, 0.12f, 0.30f) * m;
      const double b = uniform(rng, 0.35f, 1.0f) * a;
      shapes.push_back(make_ellipse(cx, cy, a, b, uniform(rng, 0.0f, 1.0f) * kPi));
    } else {
      shapes.push_back(make_polygon(rng, cx, cy, uniform(rng, 0.30f, 0.60f) * m));
    }
    if (uniform01(rng) < 0.4f) {
      const double cx2 = cx + uniform(rng, -0.25f, 0.25f) * m;
      const double cy2 = cy + uniform(rng, -0.25f, 0.25f) * m;
      const double a2 = uniform(rng, 0.06f, 0.15f) * m;
      const double b2 = uniform(rng, 0.5f, 1.0f) * a2;
      shapes.push_back(
          make_ellipse(cx2, cy2, a2, b2, uniform(rng, 0.0f, 1.0f) * kPi));
    }
    if (uniform01(rng) < 0.35f) {
      const double len = uniform(rng, 0.35f, 0.70f) * m;
      const double thick = uniform_int(rng, 4, 7);
      shapes.push_back(
          make_bar(cx, cy, len, thick, uniform(rng, 0.0f, 1.0f) * kPi));
    }
    const std::int64_t area = rasterize(shapes, out.mask);
    const double frac =
        static_cast<double>(area) / (static_cast<double>(H) * W);
    accepted = frac >= 0.05 && frac <= 0.5;
  }
  if (!accepted) {
    const std::vector<ShapeFn> shapes{
        make_ellipse(W * 0.5, H * 0.5, 0.25 * m, 0.20 * m, 0.0)};
    rasterize(shapes, out.mask);
  }

  out.image = out.background;
  for (int y = 0; y < H; ++y) {
    for (int x = 0; x < W; ++x) {
      if (!out.mask.at(y, x)) continue;
      const float n = noise[static_cast<std::size_t>(y) * W + x];
      for (int c = 0; c < 3; ++c)
        out.image.at(y, x, c) = std::clamp(obj_color[c] + n, 0.0f, 1.0f);
    }
  }
  return out;
}

std::vector<ManifestEntry> generate_synthetic(const std::string& out_dir,
                                              int count, std::uint32_t seed) {
  if (count < 1) throw input_error("synthetic image count must be >= 1");
  fs::create_directories(fs::path(out_dir) / "images");
  fs::create_directories(fs::path(out_dir) / "masks");
  const std::string manifest_path = (fs::path(out_dir) / "manifest.txt").string();
  std::ofstream mf(manifest_path, std::ios::binary);
  if (!mf) throw input_error("cannot open file for writing: " + manifest_path);

  std::vector<ManifestEntry> entries;
  entries.reserve(static_cast<std::size_t>(count));
  char name[32];
  for (int i = 0; i < count; ++i) {
    std::mt19937 rng(seed + 0x9e3779b9u * static_cast<std::uint32_t>(i + 1));
    const SynthSample s = synth_image(rng);
    std::snprintf(name, sizeof name, "%04d.png", i);
    const std::string img_rel = std::string("images/") + name;
    const std::string mask_rel = std::string("masks/") + name;
    ManifestEntry ent{(fs::path(out_dir) / img_rel).string(),
                      (fs::path(out_dir) / mask_rel).string()};
    save_image(s.image, ent.image_path);
    save_mask(s.mask, ent.mask_path);
    mf << img_rel << '\t' << mask_rel << '\n';
    entries.push_back(std::move(ent));
  }
  mf.close();
  if (!mf) throw input_error("failed to write " + manifest_path);
  return entries;
}

}  // namespace gridseg
