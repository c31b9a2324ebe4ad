#pragma once

#include <cmath>
#include <vector>

#include "persearch/ema.hpp"
#include "persearch/rng.hpp"
#include "persearch/roi.hpp"

namespace persearch {

/// Small trainable encoder mapping an RoI patch to a unit-norm embedding:
///
///   conv 3x3 (in -> c1, pad 1) -> ReLU -> avgpool 2x2
///   conv 3x3 (c1 -> c2, pad 1) -> ReLU -> avgpool 2x2
///   linear (c2 * h/4 * w/4 -> d) -> L2 normalize
///
/// Parameters live in one flat vector, in this order:
///   conv1 weights [c1][in][3][3], conv1 bias [c1],
///   conv2 weights [c2][c1][3][3], conv2 bias [c2],
///   fc weights [d][flat], fc bias [d].
struct EncoderConfig {
  int d = 128;
  int roi_h = 16;
  int roi_w = 16;
  int in_channels = 1;
  int conv1_channels = 8;
  int conv2_channels = 16;
};

inline void validate(const EncoderConfig& cfg) {
  check(cfg.d >= 2, "encoder: d must be >= 2");
  check(cfg.roi_h >= 4 && cfg.roi_w >= 4, "encoder: roi size must be >= 4");
  check(cfg.roi_h % 4 == 0 && cfg.roi_w % 4 == 0, "encoder: roi size must be divisible by 4");
  check(cfg.in_channels >= 1 && cfg.conv1_channels >= 1 && cfg.conv2_channels >= 1,
        "encoder: channel counts must be >= 1");
}

inline std::size_t encoder_flat_size(const EncoderConfig& cfg) {
  return static_cast<std::size_t>(cfg.conv2_channels) * (cfg.roi_h / 4) * (cfg.roi_w / 4);
}

inline std::size_t encoder_param_count(const EncoderConfig& cfg) {
  const std::size_t w1 = static_cast<std::size_t>(cfg.conv1_channels) * cfg.in_channels * 9;
  const std::size_t w2 = static_cast<std::size_t>(cfg.conv2_channels) * cfg.conv1_channels * 9;
  const std::size_t wf = static_cast<std::size_t>(cfg.d) * encoder_flat_size(cfg);
  return w1 + cfg.conv1_channels + w2 + cfg.conv2_channels + wf + cfg.d;
}

// Offsets of the parameter blocks inside the flat vector.
struct EncoderLayout {
  std::size_t w1, b1, w2, b2, wf, bf, total;
};

inline EncoderLayout encoder_layout(const EncoderConfig& cfg) {
  EncoderLayout l{};
  l.w1 = 0;
  l.b1 = l.w1 + static_cast<std::size_t>(cfg.conv1_channels) * cfg.in_channels * 9;
  l.w2 = l.b1 + cfg.conv1_channels;
  l.b2 = l.w2 + static_cast<std::size_t>(cfg.conv2_channels) * cfg.conv1_channels * 9;
  l.wf = l.b2 + cfg.conv2_channels;
  l.bf = l.wf + static_cast<std::size_t>(cfg.d) * encoder_flat_size(cfg);
  l.total = l.bf + cfg.d;
  return l;
}

/// Gaussian init; conv blocks scaled by sqrt(2 / fan_in), the projection by
/// sqrt(1 / fan_in), biases zero.
inline ParameterVector init_params(const EncoderConfig& cfg, Rng& rng) {
  validate(cfg);
  const EncoderLayout l = encoder_layout(cfg);
  ParameterVector p(l.total, 0.0);
  const double s1 = std::sqrt(2.0 / (cfg.in_channels * 9.0));
  for (std::size_t i = l.w1; i < l.b1; ++i) p[i] = s1 * rng.gaussian();
  const double s2 = std::sqrt(2.0 / (cfg.conv1_channels * 9.0));
  for (std::size_t i = l.w2; i < l.b2; ++i) p[i] = s2 * rng.gaussian();
  const double sf = std::sqrt(1.0 / static_cast<double>(encoder_flat_size(cfg)));
  for (std::size_t i = l.wf; i < l.bf; ++i) p[i] = sf * rng.gaussian();
  return p;
}

// Intermediate activations kept for the backward pass. Reusable across calls.
struct EncoderTrace {
  std::vector<double> input;   // [in][h][w]
  std::vector<double> y1;      // conv1 pre-activation [c1][h][w]
  std::vector<double> p1;      // pooled [c1][h/2][w/2]
  std::vector<double> y2;      // conv2 pre-activation [c2][h/2][w/2]
  std::vector<double> p2;      // pooled = flattened input of the projection
  std::vector<double> raw;     // pre-normalization embedding [d]
  double raw_norm = 0.0;
  Embedding embedding;         // unit-norm output [d]
};

namespace detail {

inline void conv3x3_forward(const double* in, int ic, int h, int w, const double* weights,
                            const double* bias, int oc, double* out) {
  for (int o = 0; o < oc; ++o) {
    const double b = bias[o];
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        double acc = b;
        for (int i = 0; i < ic; ++i) {
          const double* plane = in + static_cast<std::size_t>(i) * h * w;
          const double* k = weights + ((static_cast<std::size_t>(o) * ic) + i) * 9;
          for (int dy = -1; dy <= 1; ++dy) {
            const int yy = y + dy;
            if (yy < 0 || yy >= h) continue;
            for (int dx = -1; dx <= 1; ++dx) {
              const int xx = x + dx;
              if (xx < 0 || xx >= w) continue;
              acc += k[(dy + 1) * 3 + (dx + 1)] * plane[yy * w + xx];
            }
          }
        }
        out[(static_cast<std::size_t>(o) * h + y) * w + x] = acc;
      }
    }
  }
}

// 2x2 average pooling of relu(in); halves both spatial dimensions.
inline void relu_avgpool_forward(const double* in, int ch, int h, int w, double* out) {
  const int oh = h / 2, ow = w / 2;
  for (int o = 0; o < ch; ++o) {
    const double* plane = in + static_cast<std::size_t>(o) * h * w;
    double* oplane = out + static_cast<std::size_t>(o) * oh * ow;
    for (int y = 0; y < oh; ++y) {
      for (int x = 0; x < ow; ++x) {
        double acc = 0.0;
        for (int dy = 0; dy < 2; ++dy)
          for (int dx = 0; dx < 2; ++dx) {
            const double v = plane[(2 * y + dy) * w + (2 * x + dx)];
            acc += v > 0.0 ? v : 0.0;
          }
        oplane[y * ow + x] = acc * 0.25;
      }
    }
  }
}

}  // namespace detail

/// Forward pass; fills the trace and returns a reference to the unit-norm
/// embedding stored inside it. Deterministic given (params, patch).
inline const Embedding& encode_forward(const EncoderConfig& cfg, const ParameterVector& params,
                                       const Image& patch, EncoderTrace& t) {
  check(patch.h == cfg.roi_h && patch.w == cfg.roi_w && patch.c == cfg.in_channels,
        "encode: patch shape mismatch");
  const EncoderLayout l = encoder_layout(cfg);
  check(params.size() == l.total, "encode: parameter vector size mismatch");

  const int h = cfg.roi_h, w = cfg.roi_w;
  const int c_in = cfg.in_channels, c1 = cfg.conv1_channels, c2 = cfg.conv2_channels;
  const int h2 = h / 2, w2 = w / 2, h4 = h / 4, w4 = w / 4;

  // HWC -> CHW
  t.input.assign(static_cast<std::size_t>(c_in) * h * w, 0.0);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      for (int ch = 0; ch < c_in; ++ch)
        t.input[(static_cast<std::size_t>(ch) * h + y) * w + x] = patch.at(y, x, ch);

  t.y1.resize(static_cast<std::size_t>(c1) * h * w);
  detail::conv3x3_forward(t.input.data(), c_in, h, w, &params[l.w1], &params[l.b1], c1, t.y1.data());
  t.p1.resize(static_cast<std::size_t>(c1) * h2 * w2);
  detail::relu_avgpool_forward(t.y1.data(), c1, h, w, t.p1.data());

  t.y2.resize(static_cast<std::size_t>(c2) * h2 * w2);
  detail::conv3x3_forward(t.p1.data(), c1, h2, w2, &params[l.w2], &params[l.b2], c2, t.y2.data());
  t.p2.resize(static_cast<std::size_t>(c2) * h4 * w4);
  detail::relu_avgpool_forward(t.y2.data(), c2, h2, w2, t.p2.data());

  const std::size_t flat = t.p2.size();
  t.raw.assign(cfg.d, 0.0);
  for (int i = 0; i < cfg.d; ++i) {
    const double* row = &params[l.wf + static_cast<std::size_t>(i) * flat];
    double acc = params[l.bf + i];
    for (std::size_t j = 0; j < flat; ++j) acc += row[j] * t.p2[j];
    t.raw[i] = acc;
  }

  double n = 0.0;
  for (double v : t.raw) n += v * v;
  t.raw_norm = std::max(std::sqrt(n), 1e-12);
  t.embedding.assign(cfg.d, 0.0);
  for (int i = 0; i < cfg.d; ++i) t.embedding[i] = t.raw[i] / t.raw_norm;
  return t.embedding;
}

/// Accumulates d(loss)/d(params) into grad given d(loss)/d(embedding).
/// Uses the activations cached by encode_forward for the same patch.
inline void encode_backward(const EncoderConfig& cfg, const ParameterVector& params,
                            const EncoderTrace& t, const Embedding& grad_embedding,
                            ParameterVector& grad) {
  const EncoderLayout l = encoder_layout(cfg);
  check(grad.size() == l.total, "encode_backward: gradient vector size mismatch");
  check(grad_embedding.size() == static_cast<std::size_t>(cfg.d),
        "encode_backward: embedding gradient size mismatch");

  const int h = cfg.roi_h, w = cfg.roi_w;
  const int c_in = cfg.in_channels, c1 = cfg.conv1_channels, c2 = cfg.conv2_channels;
  const int h2 = h / 2, w2 = w / 2, h4 = h / 4, w4 = w / 4;
  const std::size_t flat = t.p2.size();

  // Through L2 normalization: g_raw = (g_e - (g_e . e) e) / |raw|
  double ge_dot_e = 0.0;
  for (int i = 0; i < cfg.d; ++i) ge_dot_e += grad_embedding[i] * t.embedding[i];
  std::vector<double> g_raw(cfg.d);
  for (int i = 0; i < cfg.d; ++i)
    g_raw[i] = (grad_embedding[i] - ge_dot_e * t.embedding[i]) / t.raw_norm;

  // Projection layer.
  std::vector<double> g_p2(flat, 0.0);
  for (int i = 0; i < cfg.d; ++i) {
    const double gi = g_raw[i];
    const double* row = &params[l.wf + static_cast<std::size_t>(i) * flat];
    double* grow = &grad[l.wf + static_cast<std::size_t>(i) * flat];
    for (std::size_t j = 0; j < flat; ++j) {
      grow[j] += gi * t.p2[j];
      g_p2[j] += gi * row[j];
    }
    grad[l.bf + i] += gi;
  }

  // Unpool + ReLU mask back to conv2 pre-activations.
  std::vector<double> g_y2(static_cast<std::size_t>(c2) * h2 * w2, 0.0);
  for (int o = 0; o < c2; ++o)
    for (int y = 0; y < h2; ++y)
      for (int x = 0; x < w2; ++x) {
        const double up = g_p2[(static_cast<std::size_t>(o) * h4 + y / 2) * w4 + x / 2] * 0.25;
        const std::size_t idx = (static_cast<std::size_t>(o) * h2 + y) * w2 + x;
        g_y2[idx] = t.y2[idx] > 0.0 ? up : 0.0;
      }

  // conv2: weight/bias grads and gradient into p1.
  std::vector<double> g_p1(static_cast<std::size_t>(c1) * h2 * w2, 0.0);
  for (int o = 0; o < c2; ++o) {
    for (int y = 0; y < h2; ++y) {
      for (int x = 0; x < w2; ++x) {
        const double g = g_y2[(static_cast<std::size_t>(o) * h2 + y) * w2 + x];
        if (g == 0.0) continue;
        grad[l.b2 + o] += g;
        for (int i = 0; i < c1; ++i) {
          const double* plane = &t.p1[static_cast<std::size_t>(i) * h2 * w2];
          double* gplane = &g_p1[static_cast<std::size_t>(i) * h2 * w2];
          const std::size_t koff = l.w2 + ((static_cast<std::size_t>(o) * c1) + i) * 9;
          for (int dy = -1; dy <= 1; ++dy) {
            const int yy = y + dy;
            if (yy < 0 || yy >= h2) continue;
            for (int dx = -1; dx <= 1; ++dx) {
              const int xx = x + dx;
              if (xx < 0 || xx >= w2) continue;
              const std::size_t k = koff + (dy + 1) * 3 + (dx + 1);
              grad[k] += g * plane[yy * w2 + xx];
              gplane[yy * w2 + xx] += g * params[k];
            }
          }
        }
      }
    }
  }

  // Unpool + ReLU mask back to conv1 pre-activations.
  std::vector<double> g_y1(static_cast<std::size_t>(c1) * h * w, 0.0);
  for (int o = 0; o < c1; ++o)
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) {
        const double up = g_p1[(static_cast<std::size_t>(o) * h2 + y / 2) * w2 + x / 2] * 0.25;
        const std::size_t idx = (static_cast<std::size_t>(o) * h + y) * w + x;
        g_y1[idx] = t.y1[idx] > 0.0 ? up : 0.0;
      }

  // conv1: weight/bias grads only (no input gradient needed).
  for (int o = 0; o < c1; ++o) {
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        const double g = g_y1[(static_cast<std::size_t>(o) * h + y) * w + x];
        if (g == 0.0) continue;
        grad[l.b1 + o] += g;
        for (int i = 0; i < c_in; ++i) {
          const double* plane = &t.input[static_cast<std::size_t>(i) * h * w];
          const std::size_t koff = l.w1 + ((static_cast<std::size_t>(o) * c_in) + i) * 9;
          for (int dy = -1; dy <= 1; ++dy) {
            const int yy = y + dy;
            if (yy < 0 || yy >= h) continue;
            for (int dx = -1; dx <= 1; ++dx) {
              const int xx = x + dx;
              if (xx < 0 || xx >= w) continue;
              grad[koff + (dy + 1) * 3 + (dx + 1)] += g * plane[yy * w + xx];
            }
          }
        }
      }
    }
  }
}

inline Embedding encode(const EncoderConfig& cfg, const ParameterVector& params, const Image& patch) {
  EncoderTrace t;
  return encode_forward(cfg, params, patch, t);
}

/// Same as encode but with the slow-moving average parameters; never mutates
/// the state and keeps no gradient bookkeeping.
inline Embedding encode_with_average(const EncoderConfig& cfg, const DualEncoderState& state,
                                     const Image& patch) {
  return encode(cfg, state.average, patch);
}

}  // namespace persearch
