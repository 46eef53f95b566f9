#pragma once

#include <cstdint>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "gridseg/codec.hpp"
#include "gridseg/image.hpp"
#include "gridseg/nn.hpp"

namespace gridseg {

struct ManifestEntry {
  std::string image_path;
  std::string mask_path;
};

// Plain text, one `image_path<TAB>mask_path` per line. Relative paths are
// resolved against the manifest's directory.
std::vector<ManifestEntry> load_manifest(const std::string& path);

struct Sample {
  GridTensor input;   // 3 channels, min-max normalized
  GridTensor target;  // 1 channel, binary
  int granularity = 0;
  std::string source;
};

struct PrepStats {
  std::int64_t used = 0;
  std::int64_t skipped = 0;
  std::vector<std::string> messages;
};

// Gridizes and encodes every (image, granularity) pair. Per-sample failures
// are skipped and accounted in stats, never abort the run. Output order is
// image-major, then granularity; independent of thread count.
std::vector<Sample> prepare_samples(const std::vector<ManifestEntry>& entries,
                                    const std::vector<int>& granularities,
                                    int threads, PrepStats* stats);

// Mirrors input and target along the column axis with probability 0.5.
Sample augment_flip(const Sample& s, std::mt19937& rng);

struct Batch {
  Tensor4 x;
  Tensor4 y;
};

// Stacks samples (which must share grid dims) into (k,R,C,3)/(k,R,C,1).
Batch make_batch(const std::vector<Sample>& samples,
                 const std::vector<int>& idx);

// Buckets samples by grid shape. Each epoch shuffles the bucket order and
// every bucket's contents, then emits batches of up to batch_size from one
// bucket at a time, including the final short batch per bucket.
class BatchScheduler {
 public:
  BatchScheduler(const std::vector<Sample>& samples, int batch_size,
                 std::uint32_t seed);
  const std::vector<int>& next();

 private:
  void reshuffle();
  std::vector<std::vector<int>> buckets_;
  std::vector<std::vector<int>> queue_;
  std::size_t pos_ = 0;
  int batch_size_ = 1;
  std::mt19937 rng_;
};

struct TrainConfig {
  int filters = 32;
  std::vector<int> granularities = {900, 925, 950, 975, 1000};
  int batch_size = 20;
  float learning_rate = 0.002f;
  int iterations = 2000;
  int val_interval = 500;
  std::uint32_t seed = 1;
};

// Flat key=value file mirroring TrainConfig fields ('#' starts a comment
// line). Unknown keys and unparsable values are input errors.
TrainConfig load_train_config(const std::string& path);
void apply_config_value(TrainConfig& cfg, const std::string& key,
                        const std::string& value);
std::vector<int> parse_int_list(const std::string& text);

struct TrainLogRow {
  std::int64_t iteration = 0;
  double train_loss = 0.0;
  double val_loss = 0.0;
  bool has_train = false;
  bool has_val = false;
  bool is_best = false;
};

struct TrainResult {
  NetworkModel model;  // best-validation snapshot, running stats included
  std::vector<TrainLogRow> log;
  double best_val = 0.0;
  std::int64_t best_iteration = 0;
};

// Mean per-sample BCE over the validation set, eval mode, fixed order.
double validation_loss(NetworkModel& model, const std::vector<Sample>& val,
                       int threads);

// Nadam training loop with validation every val_interval iterations (plus
// iteration 0 and the final iteration) and best-snapshot selection. On a
// non-finite loss or gradient the current model is written to diag_path (if
// given) and a numeric_error is thrown. on_row, if set, sees every log row.
TrainResult train_model(const TrainConfig& cfg,
                        const std::vector<Sample>& train,
                        const std::vector<Sample>& val, int threads,
                        const std::string& diag_path = "",
                        const std::function<void(const TrainLogRow&)>& on_row = {});

// CSV: iteration,train_loss,val_loss,is_best. Missing values stay empty.
void write_train_log(const std::string& path,
                     const std::vector<TrainLogRow>& rows);

struct SynthSample {
  RasterImage image;
  BinaryMask mask;
  RasterImage background;
  int offset_channel = 0;
};

// One synthetic scene: smooth gradient-plus-noise background and one or two
// overlapping convex shapes (sometimes with a thin bar) whose color in
// offset_channel sits at least 0.3 away from the background.
SynthSample synth_image(std::mt19937& rng);

// Writes images/, masks/ and manifest.txt under out_dir; byte-deterministic
// for a given seed. Returns the manifest entries (absolute paths).
std::vector<ManifestEntry> generate_synthetic(const std::string& out_dir,
                                              int count, std::uint32_t seed);

}  // namespace gridseg
