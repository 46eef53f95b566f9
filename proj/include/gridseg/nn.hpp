#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "gridseg/common.hpp"

namespace gridseg {

// Activations, channels-last row-major: index (n, y, x, c).
struct Tensor4 {
  int n = 0, h = 0, w = 0, c = 0;
  std::vector<float> v;

  static Tensor4 make(int n, int h, int w, int c, float fill = 0.0f) {
    Tensor4 t;
    t.n = n;
    t.h = h;
    t.w = w;
    t.c = c;
    t.v.assign(static_cast<std::size_t>(n) * h * w * c, fill);
    return t;
  }
  std::int64_t size() const {
    return static_cast<std::int64_t>(n) * h * w * c;
  }
  float& at(int i, int y, int x, int ch) {
    return v[((static_cast<std::size_t>(i) * h + y) * w + x) * c + ch];
  }
  float at(int i, int y, int x, int ch) const {
    return v[((static_cast<std::size_t>(i) * h + y) * w + x) * c + ch];
  }
};

// 3x3 kernel, weights laid out [tap][in][out] with tap = ky*3+kx, so the
// innermost accumulation runs over contiguous output channels.
struct ConvParams {
  int in_ch = 0, out_ch = 0;
  std::vector<float> w;  // 9 * in_ch * out_ch
  std::vector<float> b;  // out_ch

  static ConvParams make(int in_ch, int out_ch) {
    ConvParams p;
    p.in_ch = in_ch;
    p.out_ch = out_ch;
    p.w.assign(static_cast<std::size_t>(9) * in_ch * out_ch, 0.0f);
    p.b.assign(out_ch, 0.0f);
    return p;
  }
};

struct BnParams {
  int ch = 0;
  std::vector<float> gamma, beta;   // trainable
  std::vector<float> rmean, rvar;   // running statistics

  static BnParams make(int ch) {
    BnParams p;
    p.ch = ch;
    p.gamma.assign(ch, 1.0f);
    p.beta.assign(ch, 0.0f);
    p.rmean.assign(ch, 0.0f);
    p.rvar.assign(ch, 1.0f);
    return p;
  }
};

struct ResidualBlock {
  BnParams bn1;
  ConvParams conv1;
  BnParams bn2;
  ConvParams conv2;
};

// conv(in->F) + relu, `blocks` residual blocks
// [bn - relu - conv(F->F) - bn - relu - conv(F->F), input added to output],
// then bn - relu - conv(F->1) - sigmoid.
struct NetworkModel {
  int filters = 0, blocks = 0, in_channels = 0;
  ConvParams head;
  std::vector<ResidualBlock> body;
  BnParams tail_bn;
  ConvParams tail_conv;
};

struct ConvGrads {
  std::vector<float> w, b;
};
struct BnGrads {
  std::vector<float> gamma, beta;
};
struct BlockGrads {
  BnGrads bn1;
  ConvGrads conv1;
  BnGrads bn2;
  ConvGrads conv2;
};
struct ModelGrads {
  ConvGrads head;
  std::vector<BlockGrads> body;
  BnGrads tail_bn;
  ConvGrads tail_conv;
};

// Everything backward needs, produced by a training-mode forward pass.
struct ForwardCache {
  Tensor4 input;
  Tensor4 head_pre;   // head conv output (relu input)
  Tensor4 head_act;   // block 0 input
  struct Block {
    std::vector<double> mean1, invstd1;
    Tensor4 bn1_out;
    Tensor4 act1;       // conv1 input
    Tensor4 conv1_out;  // bn2 input
    std::vector<double> mean2, invstd2;
    Tensor4 bn2_out;
    Tensor4 act2;       // conv2 input
    Tensor4 out;        // conv2 output + shortcut
  };
  std::vector<Block> blocks;
  std::vector<double> tail_mean, tail_invstd;
  Tensor4 tail_bn_out;
  Tensor4 tail_act;   // tail conv input
  Tensor4 logits;
  Tensor4 probs;
};

struct BackwardResult {
  ModelGrads grads;
  Tensor4 d_input;
};

struct ParamCount {
  std::int64_t trainable = 0;
  std::int64_t running = 0;
  std::int64_t total() const { return trainable + running; }
};

struct NadamConfig {
  float lr = 0.002f;
  float beta1 = 0.9f;
  float beta2 = 0.999f;
  float eps = 1e-8f;
};

struct TrainState {
  std::int64_t t = 0;          // completed steps
  std::vector<float> m, v;     // moments, canonical parameter order
};

// Canonical parameter order: head conv (w, b), then per block bn1 (gamma,
// beta), conv1 (w, b), bn2, conv2, then tail bn, tail conv. Serialization,
// optimizer state and gradients all use this order.
template <class Model, class Fn>
void for_each_param(Model& m, Fn&& fn) {
  fn(m.head.w);
  fn(m.head.b);
  for (auto& blk : m.body) {
    fn(blk.bn1.gamma);
    fn(blk.bn1.beta);
    fn(blk.conv1.w);
    fn(blk.conv1.b);
    fn(blk.bn2.gamma);
    fn(blk.bn2.beta);
    fn(blk.conv2.w);
    fn(blk.conv2.b);
  }
  fn(m.tail_bn.gamma);
  fn(m.tail_bn.beta);
  fn(m.tail_conv.w);
  fn(m.tail_conv.b);
}

NetworkModel make_model(int filters, int blocks = 13, int in_channels = 3);
ModelGrads make_grads(const NetworkModel& m);
ParamCount count_parameters(const NetworkModel& m);

// Op names in forward order ("conv3x3", "batchnorm", "relu", "add",
// "sigmoid"); the op vocabulary has no pooling or strides.
std::vector<std::string> layer_sequence(const NetworkModel& m);
// Theoretical receptive field: 1 + 2 per conv layer.
int receptive_field(const NetworkModel& m);

// Conv weights ~ Uniform(-a, a), a = sqrt(6 / (9*in + 9*out)); biases 0,
// bn gamma 1 / beta 0, running stats reset.
void xavier_init(NetworkModel& m, std::mt19937& rng);

// Layer primitives (exposed for the finite-difference suite).
Tensor4 conv3x3_forward(const ConvParams& p, const Tensor4& x,
                        int threads = 1);
void conv3x3_backward(const ConvParams& p, const Tensor4& xin,
                      const Tensor4& dy, ConvGrads& g, Tensor4* dx,
                      int threads = 1);
// Training mode normalizes by batch statistics (biased variance over N,H,W,
// eps 1e-5) and, when update_running is set, blends running stats with
// momentum 0.99. Eval mode normalizes by running stats. mean/invstd receive
// the statistics backward needs (training mode only).
Tensor4 batchnorm_forward(BnParams& p, const Tensor4& x, bool training,
                          bool update_running, std::vector<double>* mean,
                          std::vector<double>* invstd, int threads = 1);
void batchnorm_backward(const BnParams& p, const Tensor4& xin,
                        const std::vector<double>& mean,
                        const std::vector<double>& invstd, const Tensor4& dy,
                        BnGrads& g, Tensor4* dx, int threads = 1);
Tensor4 relu_forward(const Tensor4& x, int threads = 1);
Tensor4 relu_backward(const Tensor4& xin, const Tensor4& dy, int threads = 1);
Tensor4 sigmoid_forward(const Tensor4& x, int threads = 1);

// Mean over all elements of -[y log p + (1-y) log(1-p)], p clamped to
// [1e-7, 1 - 1e-7], accumulated in 64-bit.
double bce_loss(const Tensor4& probs, const Tensor4& target);

// Full network. Training mode records batch statistics (and, when
// update_running is set, updates running stats); eval mode uses running
// stats and needs no cache.
Tensor4 forward(NetworkModel& m, const Tensor4& x, bool training,
                ForwardCache* cache, bool update_running, int threads = 1);

// Gradient of bce_loss(forward(x), target) w.r.t. every parameter and the
// input, for the training-mode pass recorded in cache.
BackwardResult backward(const NetworkModel& m, const ForwardCache& cache,
                        const Tensor4& target, int threads = 1);

TrainState make_train_state(const NetworkModel& m);
// One Nadam update; throws numeric_error on non-finite gradients without
// touching parameters or state.
void nadam_step(NetworkModel& m, const ModelGrads& g, TrainState& s,
                const NadamConfig& cfg);

// Model file: magic "GSEG", u32 version 1, u32 filters, u32 blocks, then all
// trainable parameters in canonical order as little-endian f32, then running
// stats (per bn: means then variances, forward order), then a 64-bit FNV-1a
// checksum of everything after the magic. Input channels are fixed at 3.
void save_model(const NetworkModel& m, const std::string& path);
NetworkModel load_model(const std::string& path);

}  // namespace gridseg
