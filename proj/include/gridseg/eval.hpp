#pragma once

#include <string>
#include <utility>
#include <vector>

#include "gridseg/image.hpp"
#include "gridseg/nn.hpp"
#include "gridseg/training.hpp"

namespace gridseg {

// Mean absolute difference between a saliency map and a binary mask.
double mae(const RasterImage& s, const BinaryMask& gt);

struct PrPoint {
  double tau = 0.0;
  double precision = 0.0;
  double recall = 0.0;
};

// 256 thresholds tau = t/255. Prediction set is {S > tau} (strict).
// Precision of an empty prediction set is 0. Requires a nonempty GT.
std::vector<PrPoint> pr_curve(const RasterImage& s, const BinaryMask& gt);

struct FbetaResult {
  double fbeta = 0.0;
  double precision = 0.0;
  double recall = 0.0;
  double tau = 0.0;
};

// tau = min(2*mean(S), 1 - 1/510), beta^2 = 0.3; F = 0 when PRE = REC = 0.
FbetaResult adaptive_fbeta(const RasterImage& s, const BinaryMask& gt);

// Thresholds a map at its own adaptive tau (strict >).
BinaryMask adaptive_binarize(const RasterImage& s);

// Binarizes every map with its own adaptive threshold; a pixel is salient
// when at least ceil((k+1)/2) of the k maps agree.
BinaryMask majority_vote(const std::vector<RasterImage>& maps);

// Low-res dims for a pixel budget: h = max(2, round(sqrt(n*H/W))),
// w = max(2, round(n/h)).
GridDims downsample_dims(int img_h, int img_w, int target_n);

// Bicubic downsample of the image; mask downsampled then thresholded at 0.5.
std::pair<RasterImage, BinaryMask> downsample_baseline(const RasterImage& img,
                                                       const BinaryMask& mask,
                                                       int target_n);

// Bicubic upsample back to full resolution, clamped to [0,1].
RasterImage upsample_prediction(const RasterImage& lowres, int img_h, int img_w);

// Downsampling counterpart of prepare_samples for the baseline pipeline.
std::vector<Sample> prepare_downsample_samples(
    const std::vector<ManifestEntry>& entries,
    const std::vector<int>& granularities, int threads, PrepStats* stats);

// A saliency predictor: a trained network, the ground-truth stub (returns
// the grid-quantized GT) or a constant map. Parsed from "stub:gt",
// "stub:const=<v>" or a model file path.
struct Predictor {
  enum class Kind { network, stub_gt, stub_const };
  Kind kind = Kind::network;
  NetworkModel model;
  float const_value = 0.5f;
};

Predictor make_predictor(const std::string& spec);

// Gridize, encode, normalize, run the network in eval mode, reconstruct.
RasterImage predict_saliency(NetworkModel& model, const RasterImage& img,
                             int granularity, int threads);

// Baseline path: bicubic downsample, normalize, run, bicubic upsample.
RasterImage predict_baseline(NetworkModel& model, const RasterImage& img,
                             int granularity, int threads);

enum class EvalMode { single, vote, baseline };

struct ImageEval {
  std::string id;
  double mae = 0.0;
  double fbeta = 0.0;
  double precision = 0.0;
  double recall = 0.0;
  double tau = 0.0;
};

struct EvalReport {
  std::vector<ImageEval> rows;        // manifest order, excluded images gone
  std::vector<std::string> excluded;  // one message per excluded image
  double mean_mae = 0.0;
  double mean_fbeta = 0.0;
  double mean_precision = 0.0;
  double mean_recall = 0.0;
  double mean_tau = 0.0;
  std::vector<PrPoint> pr;  // dataset mean per threshold
};

// single/baseline use granularities[0]; vote binarizes one map per
// granularity and takes the pixel majority. Per-image failures (including
// an empty GT) are excluded and reported, never abort the run.
EvalReport evaluate_dataset(Predictor& pred,
                            const std::vector<ManifestEntry>& entries,
                            const std::vector<int>& granularities,
                            EvalMode mode, int threads);

// CSV "# images <n> excluded <k>" header, then
// image_id,mae,fbeta,precision,recall,tau rows plus a final mean row.
void write_report_csv(const std::string& path, const EvalReport& report);

// CSV tau,precision,recall (256 rows).
void write_pr_csv(const std::string& path, const EvalReport& report);

void write_pr_svg(const std::string& path, const std::vector<PrPoint>& pr);

// One bar per (label, value in [0,1]) pair.
void write_bars_svg(const std::string& path,
                    const std::vector<std::pair<std::string, double>>& bars);

}  // namespace gridseg
