#include "gridseg/nn.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>

static_assert(std::endian::native == std::endian::little,
              "model files are little-endian");

namespace gridseg {

namespace {

constexpr double kBnEps = 1e-5;
constexpr float kClampLo = 1e-7f;
constexpr float kClampHi = 1.0f - 1e-7f;

template <class Model, class Fn>
void for_each_running(Model& m, Fn&& fn) {
  for (auto& blk : m.body) {
    fn(blk.bn1.rmean);
    fn(blk.bn1.rvar);
    fn(blk.bn2.rmean);
    fn(blk.bn2.rvar);
  }
  fn(m.tail_bn.rmean);
  fn(m.tail_bn.rvar);
}

void check_same_shape(const Tensor4& a, const Tensor4& b, const char* what) {
  if (a.n != b.n || a.h != b.h || a.w != b.w || a.c != b.c)
    throw input_error(std::string(what) + ": tensor shapes differ");
}

void add_into(Tensor4& dst, const Tensor4& src, int threads) {
  parallel_for(dst.size(), threads, [&](std::int64_t lo, std::int64_t hi) {
    for (std::int64_t i = lo; i < hi; ++i) dst.v[i] += src.v[i];
  });
}

}  // namespace

NetworkModel make_model(int filters, int blocks, int in_channels) {
  if (filters < 1 || blocks < 0 || in_channels < 1)
    throw input_error("invalid model shape");
  NetworkModel m;
  m.filters = filters;
  m.blocks = blocks;
  m.in_channels = in_channels;
  m.head = ConvParams::make(in_channels, filters);
  m.body.resize(blocks);
  for (auto& blk : m.body) {
    blk.bn1 = BnParams::make(filters);
    blk.conv1 = ConvParams::make(filters, filters);
    blk.bn2 = BnParams::make(filters);
    blk.conv2 = ConvParams::make(filters, filters);
  }
  m.tail_bn = BnParams::make(filters);
  m.tail_conv = ConvParams::make(filters, 1);
  return m;
}

ModelGrads make_grads(const NetworkModel& m) {
  ModelGrads g;
  const auto conv = [](const ConvParams& p) {
    return ConvGrads{std::vector<float>(p.w.size(), 0.0f),
                     std::vector<float>(p.b.size(), 0.0f)};
  };
  const auto bn = [](const BnParams& p) {
    return BnGrads{std::vector<float>(p.ch, 0.0f),
                   std::vector<float>(p.ch, 0.0f)};
  };
  g.head = conv(m.head);
  g.body.resize(m.body.size());
  for (std::size_t i = 0; i < m.body.size(); ++i) {
    g.body[i].bn1 = bn(m.body[i].bn1);
    g.body[i].conv1 = conv(m.body[i].conv1);
    g.body[i].bn2 = bn(m.body[i].bn2);
    g.body[i].conv2 = conv(m.body[i].conv2);
  }
  g.tail_bn = bn(m.tail_bn);
  g.tail_conv = conv(m.tail_conv);
  return g;
}

ParamCount count_parameters(const NetworkModel& m) {
  ParamCount c;
  for_each_param(m, [&](const std::vector<float>& p) {
    c.trainable += static_cast<std::int64_t>(p.size());
  });
  for_each_running(m, [&](const std::vector<float>& p) {
    c.running += static_cast<std::int64_t>(p.size());
  });
  return c;
}

std::vector<std::string> layer_sequence(const NetworkModel& m) {
  std::vector<std::string> seq = {"conv3x3", "relu"};
  for (int i = 0; i < m.blocks; ++i) {
    const char* block_ops[] = {"batchnorm", "relu", "conv3x3",
                               "batchnorm", "relu", "conv3x3", "add"};
    seq.insert(seq.end(), std::begin(block_ops), std::end(block_ops));
  }
  seq.insert(seq.end(), {"batchnorm", "relu", "conv3x3", "sigmoid"});
  return seq;
}

int receptive_field(const NetworkModel& m) {
  int convs = 0;
  for (const auto& op : layer_sequence(m))
    if (op == "conv3x3") ++convs;
  return 1 + 2 * convs;
}

void xavier_init(NetworkModel& m, std::mt19937& rng) {
  const auto init_conv = [&rng](ConvParams& p) {
    const float a =
        std::sqrt(6.0f / (9.0f * p.in_ch + 9.0f * p.out_ch));
    for (float& w : p.w) w = uniform(rng, -a, a);
    std::fill(p.b.begin(), p.b.end(), 0.0f);
  };
  const auto reset_bn = [](BnParams& p) {
    std::fill(p.gamma.begin(), p.gamma.end(), 1.0f);
    std::fill(p.beta.begin(), p.beta.end(), 0.0f);
    std::fill(p.rmean.begin(), p.rmean.end(), 0.0f);
    std::fill(p.rvar.begin(), p.rvar.end(), 1.0f);
  };
  init_conv(m.head);
  for (auto& blk : m.body) {
    reset_bn(blk.bn1);
    init_conv(blk.conv1);
    reset_bn(blk.bn2);
    init_conv(blk.conv2);
  }
  reset_bn(m.tail_bn);
  init_conv(m.tail_conv);
}

Tensor4 conv3x3_forward(const ConvParams& p, const Tensor4& x, int threads) {
  if (x.c != p.in_ch) throw input_error("conv: input channel mismatch");
  const int H = x.h, W = x.w, IC = p.in_ch, OC = p.out_ch;
  Tensor4 y = Tensor4::make(x.n, H, W, OC);
  parallel_for(static_cast<std::int64_t>(x.n) * H, threads,
               [&](std::int64_t lo, std::int64_t hi) {
    for (std::int64_t row = lo; row < hi; ++row) {
      const int n = static_cast<int>(row / H);
      const int yy = static_cast<int>(row % H);
      for (int xx = 0; xx < W; ++xx) {
        float* out = &y.v[((static_cast<std::size_t>(n) * H + yy) * W + xx) * OC];
        for (int o = 0; o < OC; ++o) out[o] = p.b[o];
        for (int ky = 0; ky < 3; ++ky) {
          const int iy = yy + ky - 1;
          if (iy < 0 || iy >= H) continue;
          for (int kx = 0; kx < 3; ++kx) {
            const int ix = xx + kx - 1;
            if (ix < 0 || ix >= W) continue;
            const float* in =
                &x.v[((static_cast<std::size_t>(n) * H + iy) * W + ix) * IC];
            const float* wk =
                &p.w[static_cast<std::size_t>(ky * 3 + kx) * IC * OC];
            for (int i = 0; i < IC; ++i) {
              const float a = in[i];
              const float* wr = wk + static_cast<std::size_t>(i) * OC;
              for (int o = 0; o < OC; ++o) out[o] += a * wr[o];
            }
          }
        }
      }
    }
  });
  return y;
}

void conv3x3_backward(const ConvParams& p, const Tensor4& xin,
                      const Tensor4& dy, ConvGrads& g, Tensor4* dx,
                      int threads) {
  if (xin.c != p.in_ch || dy.c != p.out_ch || xin.n != dy.n ||
      xin.h != dy.h || xin.w != dy.w)
    throw input_error("conv backward: shape mismatch");
  const int N = xin.n, H = xin.h, W = xin.w, IC = p.in_ch, OC = p.out_ch;
  g.w.assign(p.w.size(), 0.0f);
  g.b.assign(p.b.size(), 0.0f);

  // One 64-bit accumulator block per kernel tap (plus one for the bias);
  // each task scans the batch serially so the sum order never changes.
  std::vector<double> wacc(p.w.size(), 0.0);
  std::vector<double> bacc(OC, 0.0);
  parallel_for(10, threads, [&](std::int64_t lo, std::int64_t hi) {
    for (std::int64_t task = lo; task < hi; ++task) {
      if (task == 9) {
        for (std::int64_t pix = 0; pix < static_cast<std::int64_t>(N) * H * W;
             ++pix) {
          const float* d = &dy.v[pix * OC];
          for (int o = 0; o < OC; ++o) bacc[o] += d[o];
        }
        continue;
      }
      const int ky = static_cast<int>(task) / 3;
      const int kx = static_cast<int>(task) % 3;
      double* acc = &wacc[task * IC * OC];
      const int y0 = std::max(0, 1 - ky), y1 = std::min(H - 1, H - ky);
      const int x0 = std::max(0, 1 - kx), x1 = std::min(W - 1, W - kx);
      for (int n = 0; n < N; ++n) {
        for (int yy = y0; yy <= y1; ++yy) {
          const int iy = yy + ky - 1;
          for (int xx = x0; xx <= x1; ++xx) {
            const int ix = xx + kx - 1;
            const float* in =
                &xin.v[((static_cast<std::size_t>(n) * H + iy) * W + ix) * IC];
            const float* d =
                &dy.v[((static_cast<std::size_t>(n) * H + yy) * W + xx) * OC];
            for (int i = 0; i < IC; ++i) {
              const double a = in[i];
              double* ar = acc + static_cast<std::size_t>(i) * OC;
              for (int o = 0; o < OC; ++o) ar[o] += a * d[o];
            }
          }
        }
      }
    }
  });
  for (std::size_t i = 0; i < g.w.size(); ++i)
    g.w[i] = static_cast<float>(wacc[i]);
  for (int o = 0; o < OC; ++o) g.b[o] = static_cast<float>(bacc[o]);

  if (!dx) return;
  *dx = Tensor4::make(N, H, W, IC);
  std::vector<float> wt(p.w.size());  // [tap][out][in]
  for (int tap = 0; tap < 9; ++tap)
    for (int i = 0; i < IC; ++i)
      for (int o = 0; o < OC; ++o)
        wt[(static_cast<std::size_t>(tap) * OC + o) * IC + i] =
            p.w[(static_cast<std::size_t>(tap) * IC + i) * OC + o];
  // Scatter rows overlap within a sample, so parallelism is per sample.
  parallel_for(N, threads, [&](std::int64_t lo, std::int64_t hi) {
    for (std::int64_t n = lo; n < hi; ++n) {
      for (int yy = 0; yy < H; ++yy) {
        for (int xx = 0; xx < W; ++xx) {
          const float* d =
              &dy.v[((static_cast<std::size_t>(n) * H + yy) * W + xx) * OC];
          for (int ky = 0; ky < 3; ++ky) {
            const int iy = yy + ky - 1;
            if (iy < 0 || iy >= H) continue;
            for (int kx = 0; kx < 3; ++kx) {
              const int ix = xx + kx - 1;
              if (ix < 0 || ix >= W) continue;
              float* out =
                  &dx->v[((static_cast<std::size_t>(n) * H + iy) * W + ix) * IC];
              const float* wk =
                  &wt[static_cast<std::size_t>(ky * 3 + kx) * OC * IC];
              for (int o = 0; o < OC; ++o) {
                const float dv = d[o];
                const float* wr = wk + static_cast<std::size_t>(o) * IC;
                for (int i = 0; i < IC; ++i) out[i] += dv * wr[i];
              }
            }
          }
        }
      }
    }
  });
}

Tensor4 batchnorm_forward(BnParams& p, const Tensor4& x, bool training,
                          bool update_running, std::vector<double>* mean,
                          std::vector<double>* invstd, int threads) {
  if (x.c != p.ch) throw input_error("batchnorm: channel mismatch");
  const std::int64_t M = static_cast<std::int64_t>(x.n) * x.h * x.w;
  const int C = x.c;
  Tensor4 y = Tensor4::make(x.n, x.h, x.w, C);

  if (!training) {
    std::vector<double> scale(C), shift(C);
    for (int c = 0; c < C; ++c) {
      scale[c] = p.gamma[c] / std::sqrt(static_cast<double>(p.rvar[c]) + kBnEps);
      shift[c] = p.beta[c] - p.rmean[c] * scale[c];
    }
    parallel_for(M, threads, [&](std::int64_t lo, std::int64_t hi) {
      for (std::int64_t i = lo; i < hi; ++i)
        for (int c = 0; c < C; ++c)
          y.v[i * C + c] =
              static_cast<float>(x.v[i * C + c] * scale[c] + shift[c]);
    });
    return y;
  }

  std::vector<double> mu(C), var(C), iv(C);
  parallel_for(C, threads, [&](std::int64_t lo, std::int64_t hi) {
    for (std::int64_t c = lo; c < hi; ++c) {
      double s = 0.0;
      for (std::int64_t i = 0; i < M; ++i) s += x.v[i * C + c];
      const double m = s / M;
      double s2 = 0.0;
      for (std::int64_t i = 0; i < M; ++i) {
        const double d = x.v[i * C + c] - m;
        s2 += d * d;
      }
      mu[c] = m;
      var[c] = s2 / M;
      iv[c] = 1.0 / std::sqrt(var[c] + kBnEps);
    }
  });
  parallel_for(M, threads, [&](std::int64_t lo, std::int64_t hi) {
    for (std::int64_t i = lo; i < hi; ++i)
      for (int c = 0; c < C; ++c)
        y.v[i * C + c] = static_cast<float>(
            (x.v[i * C + c] - mu[c]) * iv[c] * p.gamma[c] + p.beta[c]);
  });
  if (update_running) {
    for (int c = 0; c < C; ++c) {
      p.rmean[c] = 0.99f * p.rmean[c] + 0.01f * static_cast<float>(mu[c]);
      p.rvar[c] = 0.99f * p.rvar[c] + 0.01f * static_cast<float>(var[c]);
    }
  }
  if (mean) *mean = std::move(mu);
  if (invstd) *invstd = std::move(iv);
  return y;
}

void batchnorm_backward(const BnParams& p, const Tensor4& xin,
                        const std::vector<double>& mean,
                        const std::vector<double>& invstd, const Tensor4& dy,
                        BnGrads& g, Tensor4* dx, int threads) {
  check_same_shape(xin, dy, "batchnorm backward");
  const std::int64_t M = static_cast<std::int64_t>(xin.n) * xin.h * xin.w;
  const int C = xin.c;
  g.gamma.assign(C, 0.0f);
  g.beta.assign(C, 0.0f);
  std::vector<double> sdy(C), sdyx(C);
  parallel_for(C, threads, [&](std::int64_t lo, std::int64_t hi) {
    for (std::int64_t c = lo; c < hi; ++c) {
      double a = 0.0, b = 0.0;
      for (std::int64_t i = 0; i < M; ++i) {
        const double d = dy.v[i * C + c];
        a += d;
        b += d * (xin.v[i * C + c] - mean[c]) * invstd[c];
      }
      sdy[c] = a;
      sdyx[c] = b;
      g.beta[c] = static_cast<float>(a);
      g.gamma[c] = static_cast<float>(b);
    }
  });
  if (!dx) return;
  *dx = Tensor4::make(xin.n, xin.h, xin.w, C);
  std::vector<double> k(C), mdy(C), mdyx(C);
  for (int c = 0; c < C; ++c) {
    k[c] = p.gamma[c] * invstd[c];
    mdy[c] = sdy[c] / M;
    mdyx[c] = sdyx[c] / M;
  }
  parallel_for(M, threads, [&](std::int64_t lo, std::int64_t hi) {
    for (std::int64_t i = lo; i < hi; ++i)
      for (int c = 0; c < C; ++c) {
        const double xhat = (xin.v[i * C + c] - mean[c]) * invstd[c];
        dx->v[i * C + c] = static_cast<float>(
            k[c] * (dy.v[i * C + c] - mdy[c] - xhat * mdyx[c]));
      }
  });
}

Tensor4 relu_forward(const Tensor4& x, int threads) {
  Tensor4 y = Tensor4::make(x.n, x.h, x.w, x.c);
  parallel_for(x.size(), threads, [&](std::int64_t lo, std::int64_t hi) {
    for (std::int64_t i = lo; i < hi; ++i)
      y.v[i] = x.v[i] > 0.0f ? x.v[i] : 0.0f;
  });
  return y;
}

Tensor4 relu_backward(const Tensor4& xin, const Tensor4& dy, int threads) {
  check_same_shape(xin, dy, "relu backward");
  Tensor4 dx = Tensor4::make(xin.n, xin.h, xin.w, xin.c);
  parallel_for(xin.size(), threads, [&](std::int64_t lo, std::int64_t hi) {
    for (std::int64_t i = lo; i < hi; ++i)
      dx.v[i] = xin.v[i] > 0.0f ? dy.v[i] : 0.0f;
  });
  return dx;
}

Tensor4 sigmoid_forward(const Tensor4& x, int threads) {
  Tensor4 y = Tensor4::make(x.n, x.h, x.w, x.c);
  parallel_for(x.size(), threads, [&](std::int64_t lo, std::int64_t hi) {
    for (std::int64_t i = lo; i < hi; ++i) {
      const float v = x.v[i];
      if (v >= 0.0f) {
        y.v[i] = 1.0f / (1.0f + std::exp(-v));
      } else {
        const float e = std::exp(v);
        y.v[i] = e / (1.0f + e);
      }
    }
  });
  return y;
}

double bce_loss(const Tensor4& probs, const Tensor4& target) {
  check_same_shape(probs, target, "bce");
  double sum = 0.0;
  for (std::int64_t i = 0; i < probs.size(); ++i) {
    const double p = std::min(std::max<double>(probs.v[i], 1e-7), 1.0 - 1e-7);
    const double y = target.v[i];
    sum += y * std::log(p) + (1.0 - y) * std::log(1.0 - p);
  }
  return -sum / static_cast<double>(probs.size());
}

Tensor4 forward(NetworkModel& m, const Tensor4& x, bool training,
                ForwardCache* cache, bool update_running, int threads) {
  if (x.c != m.in_channels) throw input_error("forward: channel mismatch");
  for (const float v : x.v)
    if (!std::isfinite(v)) throw numeric_error("forward: non-finite input");

  ForwardCache local;
  ForwardCache& c = cache ? *cache : local;
  const bool upd = training && update_running;
  c.input = x;
  c.head_pre = conv3x3_forward(m.head, x, threads);
  c.head_act = relu_forward(c.head_pre, threads);
  c.blocks.assign(m.blocks, {});
  const Tensor4* cur = &c.head_act;
  for (int bi = 0; bi < m.blocks; ++bi) {
    auto& B = c.blocks[bi];
    auto& P = m.body[bi];
    B.bn1_out = batchnorm_forward(P.bn1, *cur, training, upd, &B.mean1,
                                  &B.invstd1, threads);
    B.act1 = relu_forward(B.bn1_out, threads);
    B.conv1_out = conv3x3_forward(P.conv1, B.act1, threads);
    B.bn2_out = batchnorm_forward(P.bn2, B.conv1_out, training, upd, &B.mean2,
                                  &B.invstd2, threads);
    B.act2 = relu_forward(B.bn2_out, threads);
    B.out = conv3x3_forward(P.conv2, B.act2, threads);
    add_into(B.out, *cur, threads);
    cur = &B.out;
  }
  c.tail_bn_out = batchnorm_forward(m.tail_bn, *cur, training, upd,
                                    &c.tail_mean, &c.tail_invstd, threads);
  c.tail_act = relu_forward(c.tail_bn_out, threads);
  c.logits = conv3x3_forward(m.tail_conv, c.tail_act, threads);
  c.probs = sigmoid_forward(c.logits, threads);
  return c.probs;
}

BackwardResult backward(const NetworkModel& m, const ForwardCache& cache,
                        const Tensor4& target, int threads) {
  check_same_shape(cache.probs, target, "backward");
  BackwardResult r;
  r.grads = make_grads(m);

  const double M = static_cast<double>(cache.probs.size());
  Tensor4 d = Tensor4::make(target.n, target.h, target.w, target.c);
  for (std::int64_t i = 0; i < d.size(); ++i) {
    const float p = cache.probs.v[i];
    // outside the clamp range the loss is constant in p
    d.v[i] = (p < kClampLo || p > kClampHi)
                 ? 0.0f
                 : static_cast<float>((static_cast<double>(p) - target.v[i]) / M);
  }

  Tensor4 d_tail_act;
  conv3x3_backward(m.tail_conv, cache.tail_act, d, r.grads.tail_conv,
                   &d_tail_act, threads);
  const Tensor4 d_tail_bn = relu_backward(cache.tail_bn_out, d_tail_act, threads);
  const Tensor4& tail_in =
      m.blocks > 0 ? cache.blocks.back().out : cache.head_act;
  batchnorm_backward(m.tail_bn, tail_in, cache.tail_mean, cache.tail_invstd,
                     d_tail_bn, r.grads.tail_bn, &d, threads);

  for (int bi = m.blocks - 1; bi >= 0; --bi) {
    const auto& B = cache.blocks[bi];
    const auto& P = m.body[bi];
    const Tensor4& bin = bi > 0 ? cache.blocks[bi - 1].out : cache.head_act;
    Tensor4 d_act2;
    conv3x3_backward(P.conv2, B.act2, d, r.grads.body[bi].conv2, &d_act2,
                     threads);
    const Tensor4 d_bn2 = relu_backward(B.bn2_out, d_act2, threads);
    Tensor4 d_conv1;
    batchnorm_backward(P.bn2, B.conv1_out, B.mean2, B.invstd2, d_bn2,
                       r.grads.body[bi].bn2, &d_conv1, threads);
    Tensor4 d_act1;
    conv3x3_backward(P.conv1, B.act1, d_conv1, r.grads.body[bi].conv1,
                     &d_act1, threads);
    const Tensor4 d_bn1 = relu_backward(B.bn1_out, d_act1, threads);
    Tensor4 d_in;
    batchnorm_backward(P.bn1, bin, B.mean1, B.invstd1, d_bn1,
                       r.grads.body[bi].bn1, &d_in, threads);
    add_into(d_in, d, threads);  // shortcut
    d = std::move(d_in);
  }

  const Tensor4 d_head = relu_backward(cache.head_pre, d, threads);
  conv3x3_backward(m.head, cache.input, d_head, r.grads.head, &r.d_input,
                   threads);
  return r;
}

TrainState make_train_state(const NetworkModel& m) {
  TrainState s;
  const ParamCount c = count_parameters(m);
  s.m.assign(c.trainable, 0.0f);
  s.v.assign(c.trainable, 0.0f);
  return s;
}

void nadam_step(NetworkModel& m, const ModelGrads& g, TrainState& s,
                const NadamConfig& cfg) {
  std::vector<std::vector<float>*> params;
  std::vector<const std::vector<float>*> grads;
  for_each_param(m, [&](std::vector<float>& p) { params.push_back(&p); });
  for_each_param(g, [&](const std::vector<float>& p) { grads.push_back(&p); });

  std::size_t total = 0;
  for (std::size_t k = 0; k < params.size(); ++k) {
    if (params[k]->size() != grads[k]->size())
      throw input_error("nadam: gradient shape mismatch");
    total += params[k]->size();
    for (const float v : *grads[k])
      if (!std::isfinite(v)) throw numeric_error("nadam: non-finite gradient");
  }
  if (total != s.m.size()) throw input_error("nadam: state size mismatch");

  const double t = static_cast<double>(s.t + 1);
  const double b1 = cfg.beta1, b2 = cfg.beta2;
  const double c1t = 1.0 - std::pow(b1, t);
  const double c1t1 = 1.0 - std::pow(b1, t + 1.0);
  const double c2t = 1.0 - std::pow(b2, t);

  std::size_t off = 0;
  for (std::size_t k = 0; k < params.size(); ++k) {
    std::vector<float>& p = *params[k];
    const std::vector<float>& gr = *grads[k];
    for (std::size_t j = 0; j < p.size(); ++j, ++off) {
      const double gd = gr[j];
      const double mm = b1 * s.m[off] + (1.0 - b1) * gd;
      const double vv = b2 * s.v[off] + (1.0 - b2) * gd * gd;
      s.m[off] = static_cast<float>(mm);
      s.v[off] = static_cast<float>(vv);
      const double mhat = mm / c1t1;
      const double vhat = vv / c2t;
      p[j] -= static_cast<float>(
          cfg.lr * (b1 * mhat + (1.0 - b1) * gd / c1t) /
          (std::sqrt(vhat) + cfg.eps));
    }
  }
  ++s.t;
}

void save_model(const NetworkModel& m, const std::string& path) {
  if (m.in_channels != 3)
    throw input_error("model files carry 3-channel input models");
  std::vector<std::uint8_t> payload;
  const auto put_u32 = [&payload](std::uint32_t v) {
    const auto* b = reinterpret_cast<const std::uint8_t*>(&v);
    payload.insert(payload.end(), b, b + 4);
  };
  const auto put_floats = [&payload](const std::vector<float>& v) {
    const auto* b = reinterpret_cast<const std::uint8_t*>(v.data());
    payload.insert(payload.end(), b, b + v.size() * sizeof(float));
  };
  put_u32(1);
  put_u32(static_cast<std::uint32_t>(m.filters));
  put_u32(static_cast<std::uint32_t>(m.blocks));
  for_each_param(m, put_floats);
  for_each_running(m, put_floats);
  const std::uint64_t sum = fnv1a64(payload.data(), payload.size());

  std::ofstream f(path, std::ios::binary);
  if (!f) throw input_error("cannot open file for writing: " + path);
  f.write("GSEG", 4);
  f.write(reinterpret_cast<const char*>(payload.data()),
          static_cast<std::streamsize>(payload.size()));
  f.write(reinterpret_cast<const char*>(&sum), sizeof(sum));
  if (!f) throw input_error("failed to write model file: " + path);
}

NetworkModel load_model(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw input_error("cannot open file: " + path);
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(f)),
                                  std::istreambuf_iterator<char>());
  if (bytes.size() < 4 + 12 + 8 || std::memcmp(bytes.data(), "GSEG", 4) != 0)
    throw format_error("not a model file: " + path);
  const std::size_t payload_len = bytes.size() - 4 - 8;
  std::uint64_t stored = 0;
  std::memcpy(&stored, bytes.data() + 4 + payload_len, 8);
  if (fnv1a64(bytes.data() + 4, payload_len) != stored)
    throw format_error("model file checksum mismatch: " + path);

  const std::uint8_t* cur = bytes.data() + 4;
  const auto get_u32 = [&cur]() {
    std::uint32_t v;
    std::memcpy(&v, cur, 4);
    cur += 4;
    return v;
  };
  const std::uint32_t version = get_u32();
  if (version != 1)
    throw format_error("unsupported model file version " +
                       std::to_string(version) + ": " + path);
  const std::uint32_t filters = get_u32();
  const std::uint32_t blocks = get_u32();
  if (filters < 1 || filters > 65536 || blocks > 4096)
    throw format_error("implausible model dimensions: " + path);

  NetworkModel m = make_model(static_cast<int>(filters),
                              static_cast<int>(blocks), 3);
  const ParamCount c = count_parameters(m);
  if (payload_len != 12 + static_cast<std::size_t>(c.total()) * sizeof(float))
    throw format_error("model file size mismatch: " + path);
  const auto get_floats = [&cur](std::vector<float>& v) {
    std::memcpy(v.data(), cur, v.size() * sizeof(float));
    cur += v.size() * sizeof(float);
  };
  for_each_param(m, get_floats);
  for_each_running(m, get_floats);
  const auto finite = [&path](std::vector<float>& v) {
    for (const float x : v)
      if (!std::isfinite(x))
        throw numeric_error("model contains non-finite values: " + path);
  };
  for_each_param(m, finite);
  for_each_running(m, finite);
  return m;
}

}  // namespace gridseg
