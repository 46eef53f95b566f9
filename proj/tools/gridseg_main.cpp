#include <cstdio>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "gridseg/codec.hpp"
#include "gridseg/eval.hpp"
#include "gridseg/gridize.hpp"
#include "gridseg/image.hpp"
#include "gridseg/nn.hpp"
#include "gridseg/training.hpp"

namespace {

using namespace gridseg;

struct GlobalOpts {
  int threads = 1;
  bool deterministic = false;
  int effective_threads() const { return deterministic ? 1 : threads; }
};

void write_text(const std::string& path, const std::string& body) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw input_error("cannot open file for writing: " + path);
  f << body;
  if (!f) throw input_error("failed to write " + path);
}

void run_gridify(const std::string& image_path, int n,
                 const std::string& out_prefix, bool overlay, int threads) {
  const RasterImage img = load_image(image_path);
  const SuperpixelGrid grid = gridize(img, n, threads);
  if (static_cast<std::int64_t>(grid.dims.rows) * grid.dims.cols > 65536)
    throw input_error("too many cells for the 16-bit label map");
  std::vector<std::uint16_t> labels16(grid.labels.size());
  for (std::size_t i = 0; i < grid.labels.size(); ++i)
    labels16[i] = static_cast<std::uint16_t>(grid.labels[i]);
  save_pgm16(labels16, img.height, img.width, out_prefix + ".labels.pgm");

  // same deterministic steps gridize runs internally
  const GridDims dims = choose_dims(img.height, img.width, n);
  const JunctionSet junctions = relocate_junctions(boundary_map(img), dims);
  nlohmann::json meta;
  meta["rows"] = grid.dims.rows;
  meta["cols"] = grid.dims.cols;
  meta["fallback"] = grid.fallback;
  nlohmann::json jarr = nlohmann::json::array();
  for (int r = 0; r <= dims.rows; ++r)
    for (int c = 0; c <= dims.cols; ++c)
      jarr.push_back({junctions.at(r, c).y, junctions.at(r, c).x});
  meta["junctions"] = std::move(jarr);
  write_text(out_prefix + ".meta.json", meta.dump(2) + "\n");

  if (overlay) {
    RasterImage vis = RasterImage::make(img.height, img.width, 3);
    for (int y = 0; y < img.height; ++y) {
      for (int x = 0; x < img.width; ++x) {
        for (int c = 0; c < 3; ++c)
          vis.at(y, x, c) = img.at(y, x, img.channels == 3 ? c : 0);
        const std::int32_t lab =
            grid.labels[static_cast<std::size_t>(y) * img.width + x];
        const bool edge =
            (x + 1 < img.width &&
             grid.labels[static_cast<std::size_t>(y) * img.width + x + 1] != lab) ||
            (y + 1 < img.height &&
             grid.labels[(static_cast<std::size_t>(y) + 1) * img.width + x] != lab);
        if (edge) {
          vis.at(y, x, 0) = 1.0f;
          vis.at(y, x, 1) = 0.0f;
          vis.at(y, x, 2) = 0.0f;
        }
      }
    }
    save_image(vis, out_prefix + ".overlay.png");
  }
  std::printf("grid %dx%d fallback %d -> %s.labels.pgm\n", grid.dims.rows,
              grid.dims.cols, grid.fallback ? 1 : 0, out_prefix.c_str());
}

void run_encode(const std::string& image_path, const std::string& mask_path,
                int n, const std::string& out_prefix, int threads) {
  const RasterImage img = load_image(image_path);
  const SuperpixelGrid grid = gridize(img, n, threads);
  const GridTensor x = encode_image(img, grid);
  save_grid_tensor(x, out_prefix + ".x.grdt");
  if (!mask_path.empty()) {
    const BinaryMask mask = load_mask(mask_path);
    if (mask.height != img.height || mask.width != img.width)
      throw input_error("image and mask dimensions differ");
    save_grid_tensor(encode_label(mask, grid), out_prefix + ".y.grdt");
  }
  save_image(reconstruct(x, grid), out_prefix + ".preview.png");
  std::printf("encoded %dx%d cells -> %s.x.grdt\n", grid.dims.rows,
              grid.dims.cols, out_prefix.c_str());
}

void run_train(const std::string& config_path, const std::string& train_path,
               const std::string& val_path, const std::string& out_model,
               const std::string& log_path, const std::string& encoder,
               const TrainConfig& overrides, const std::vector<bool>& has,
               int threads) {
  TrainConfig cfg;
  if (!config_path.empty()) cfg = load_train_config(config_path);
  if (has[0]) cfg.filters = overrides.filters;
  if (has[1]) cfg.granularities = overrides.granularities;
  if (has[2]) cfg.batch_size = overrides.batch_size;
  if (has[3]) cfg.learning_rate = overrides.learning_rate;
  if (has[4]) cfg.iterations = overrides.iterations;
  if (has[5]) cfg.val_interval = overrides.val_interval;
  if (has[6]) cfg.seed = overrides.seed;

  const bool baseline = encoder == "downsample";
  if (!baseline && encoder != "grid")
    throw input_error("unknown encoder '" + encoder + "'");

  const auto prep = [&](const std::string& manifest) {
    PrepStats stats;
    const std::vector<ManifestEntry> entries = load_manifest(manifest);
    std::vector<Sample> samples =
        baseline
            ? prepare_downsample_samples(entries, cfg.granularities, threads,
                                         &stats)
            : prepare_samples(entries, cfg.granularities, threads, &stats);
    for (const std::string& msg : stats.messages)
      std::fprintf(stderr, "skipped: %s\n", msg.c_str());
    std::printf("%s: %lld samples (%lld skipped)\n", manifest.c_str(),
                static_cast<long long>(stats.used),
                static_cast<long long>(stats.skipped));
    return samples;
  };
  const std::vector<Sample> train_samples = prep(train_path);
  const std::vector<Sample> val_samples = prep(val_path);

  const TrainResult res = train_model(
      cfg, train_samples, val_samples, threads, out_model + ".diag",
      [](const TrainLogRow& row) {
        if (row.has_val)
          std::fprintf(stderr, "iter %lld train %.6f val %.6f%s\n",
                       static_cast<long long>(row.iteration),
                       row.has_train ? row.train_loss : 0.0, row.val_loss,
                       row.is_best ? " *" : "");
      });
  save_model(res.model, out_model);
  write_train_log(log_path.empty() ? out_model + ".log.csv" : log_path,
                  res.log);
  std::printf("best val %.6f at iteration %lld -> %s\n", res.best_val,
              static_cast<long long>(res.best_iteration), out_model.c_str());
}

void run_predict(const std::string& model_spec, const std::string& image_path,
                 int n, const std::string& out_path, int threads) {
  Predictor pred = make_predictor(model_spec);
  if (pred.kind == Predictor::Kind::stub_gt)
    throw input_error("stub:gt needs ground truth; use the eval subcommand");
  const RasterImage img = load_image(image_path);
  const RasterImage s =
      pred.kind == Predictor::Kind::network
          ? predict_saliency(pred.model, img, n, threads)
          : RasterImage::make(img.height, img.width, 1, pred.const_value);
  save_image(s, out_path);
  std::printf("saliency %dx%d -> %s\n", s.height, s.width, out_path.c_str());
}

void run_eval(const std::string& model_spec, const std::string& manifest_path,
              const std::string& mode_name, int n,
              const std::vector<int>& granularities,
              const std::string& out_prefix, bool svg_pr, bool svg_bars,
              int threads) {
  EvalMode mode;
  if (mode_name == "single") {
    mode = EvalMode::single;
  } else if (mode_name == "vote") {
    mode = EvalMode::vote;
  } else if (mode_name == "baseline") {
    mode = EvalMode::baseline;
  } else {
    throw input_error("unknown eval mode '" + mode_name + "'");
  }
  Predictor pred = make_predictor(model_spec);
  const std::vector<ManifestEntry> entries = load_manifest(manifest_path);
  const std::vector<int> grans =
      mode == EvalMode::vote ? granularities : std::vector<int>{n};
  const EvalReport rep = evaluate_dataset(pred, entries, grans, mode, threads);
  for (const std::string& msg : rep.excluded)
    std::fprintf(stderr, "excluded: %s\n", msg.c_str());
  write_report_csv(out_prefix + ".report.csv", rep);
  write_pr_csv(out_prefix + ".pr.csv", rep);
  if (svg_pr) write_pr_svg(out_prefix + ".pr.svg", rep.pr);
  if (svg_bars) {
    std::string label = model_spec;
    if (pred.kind == Predictor::Kind::network) {
      const ParamCount pc = count_parameters(pred.model);
      label = "F=" + std::to_string(pred.model.filters) + " (" +
              std::to_string(pc.total()) + " params)";
    }
    write_bars_svg(out_prefix + ".fbeta.svg", {{label, rep.mean_fbeta}});
  }
  std::printf("images %zu excluded %zu mae %.6f fbeta %.6f -> %s.report.csv\n",
              rep.rows.size(), rep.excluded.size(), rep.mean_mae,
              rep.mean_fbeta, out_prefix.c_str());
}

void run_synth(const std::string& out_dir, int count, std::uint32_t seed) {
  const std::vector<ManifestEntry> entries =
      generate_synthetic(out_dir, count, seed);
  std::printf("wrote %zu image/mask pairs under %s\n", entries.size(),
              out_dir.c_str());
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"salient-object segmentation on gridized superpixels"};
  app.require_subcommand(1);
  GlobalOpts global;
  app.add_option("--threads", global.threads, "worker threads")
      ->capture_default_str();
  app.add_flag("--deterministic", global.deterministic,
               "single-threaded, bit-stable runs");

  std::string image_path, mask_path, out_path, model_spec, manifest_path;
  std::string config_path, train_manifest, val_manifest, log_path;
  std::string encoder = "grid", mode_name = "single";
  int n = 950, count = 0;
  std::uint32_t synth_seed = 1;
  bool overlay = false, svg_pr = false, svg_bars = false;
  TrainConfig overrides;
  std::string gran_text;

  CLI::App* gridify = app.add_subcommand("gridify", "image -> label map + metadata");
  gridify->add_option("image", image_path, "input image")->required();
  gridify->add_option("--n", n, "target cell count")->capture_default_str();
  gridify->add_option("--out", out_path, "output prefix")->required();
  gridify->add_flag("--overlay", overlay, "write a boundary overlay PNG");

  CLI::App* encode = app.add_subcommand("encode", "image [mask] -> grid tensors + preview");
  encode->add_option("image", image_path, "input image")->required();
  encode->add_option("mask", mask_path, "optional ground-truth mask");
  encode->add_option("--n", n, "target cell count")->capture_default_str();
  encode->add_option("--out", out_path, "output prefix")->required();

  CLI::App* train = app.add_subcommand("train", "train a model from manifests");
  train->add_option("--config", config_path, "key=value config file");
  train->add_option("--train-manifest", train_manifest)->required();
  train->add_option("--val-manifest", val_manifest)->required();
  train->add_option("--out-model", out_path, "model file to write")->required();
  train->add_option("--log", log_path, "log CSV (default <out-model>.log.csv)");
  train->add_option("--encoder", encoder, "grid|downsample")
      ->capture_default_str();
  train->add_option("--filters", overrides.filters);
  train->add_option("--granularities", gran_text, "comma-separated cell counts");
  train->add_option("--batch-size", overrides.batch_size);
  train->add_option("--learning-rate", overrides.learning_rate);
  train->add_option("--iterations", overrides.iterations);
  train->add_option("--val-interval", overrides.val_interval);
  train->add_option("--seed", overrides.seed);

  CLI::App* predict = app.add_subcommand("predict", "image -> saliency map PNG");
  predict->add_option("--model", model_spec, "model file or stub:const=<v>")
      ->required();
  predict->add_option("image", image_path, "input image")->required();
  predict->add_option("--n", n, "target cell count")->capture_default_str();
  predict->add_option("--out", out_path, "output PNG")->required();

  CLI::App* eval = app.add_subcommand("eval", "score a model over a manifest");
  eval->add_option("--model", model_spec, "model file, stub:gt or stub:const=<v>")
      ->required();
  eval->add_option("--manifest", manifest_path)->required();
  eval->add_option("--mode", mode_name, "single|vote|baseline")
      ->capture_default_str();
  eval->add_option("--n", n, "cell count for single/baseline")
      ->capture_default_str();
  eval->add_option("--granularities", gran_text,
                   "comma-separated cell counts for vote mode");
  eval->add_option("--out", out_path, "output prefix")->required();
  eval->add_flag("--svg-pr", svg_pr, "write a PR-curve SVG");
  eval->add_flag("--svg-bars", svg_bars, "write an F-beta bar chart SVG");

  CLI::App* synth = app.add_subcommand("synth", "generate a synthetic dataset");
  synth->add_option("--out", out_path, "output directory")->required();
  synth->add_option("--count", count, "number of images")->required();
  synth->add_option("--seed", synth_seed)->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  }

  const int threads = global.effective_threads();
  try {
    if (*gridify) {
      run_gridify(image_path, n, out_path, overlay, threads);
    } else if (*encode) {
      run_encode(image_path, mask_path, n, out_path, threads);
    } else if (*train) {
      const std::vector<bool> has{
          train->count("--filters") > 0,      train->count("--granularities") > 0,
          train->count("--batch-size") > 0,   train->count("--learning-rate") > 0,
          train->count("--iterations") > 0,   train->count("--val-interval") > 0,
          train->count("--seed") > 0};
      if (has[1]) overrides.granularities = parse_int_list(gran_text);
      run_train(config_path, train_manifest, val_manifest, out_path, log_path,
                encoder, overrides, has, threads);
    } else if (*predict) {
      run_predict(model_spec, image_path, n, out_path, threads);
    } else if (*eval) {
      std::vector<int> grans = {900, 925, 950, 975, 1000};
      if (eval->count("--granularities") > 0) grans = parse_int_list(gran_text);
      run_eval(model_spec, manifest_path, mode_name, n, grans, out_path,
               svg_pr, svg_bars, threads);
    } else if (*synth) {
      run_synth(out_path, count, synth_seed);
    }
  } catch (const numeric_error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 3;
  } catch (const format_error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 4;
  } catch (const input_error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  }
  return 0;
}
