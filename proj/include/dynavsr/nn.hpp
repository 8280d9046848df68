// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "dynavsr/image.hpp"
#include "dynavsr/resample.hpp"
#include "dynavsr/rng.hpp"
#include "dynavsr/tape.hpp"
#include "dynavsr/tensor.hpp"

namespace dynavsr::nn {

// Named view into a flat parameter vector. All trainable parameters of a
// model live in one rank-1 tensor; the layout maps layer names to segments.
struct LayoutEntry {
  std::string name;
  ad::Shape dims;
  long offset = 0;
};

struct ParamLayout {
  std::vector<LayoutEntry> entries;
  long total = 0;

  long add(std::string name, ad::Shape dims) {
    const long off = total;
    total += dims.numel();
    entries.push_back({std::move(name), std::move(dims), off});
    return off;
  }

  const LayoutEntry& find(const std::string& name) const {
    for (const auto& e : entries)
      if (e.name == name) return e;
    throw std::out_of_range("param layout has no entry named " + name);
  }
};

struct ConvSpec {
  int in_ch = 1, out_ch = 1;
  int kt = 1, kh = 3, kw = 3;
  int stride = 1;

  long fan_in() const { return static_cast<long>(in_ch) * kt * kh * kw; }
  ad::Shape weight_shape() const { return ad::Shape{out_ch, in_ch, kt, kh, kw}; }
  ad::Shape bias_shape() const { return ad::Shape{out_ch}; }
};

// Convolution over a (C,T,H,W) activation, weights and bias sliced from the
// flat parameter vector. Same-padding in every axis; spatial stride may
// halve the resolution. One im2col plus one GEMM.
template <typename S>
int conv(ad::Tape<S>& tp, int x, int params, const ConvSpec& spec, long w_off, long b_off) {
  const ad::Shape& sx = tp.val(x).shape;
  if (sx.rank() != 4 || sx[0] != spec.in_ch)
    throw std::invalid_argument("conv: input shape " + sx.str() + " does not match in_ch=" +
                                std::to_string(spec.in_ch));
  typename ad::Tape<S>::ConvGeom g;
  g.c = sx[0];
  g.t = sx[1];
  g.h = sx[2];
  g.w = sx[3];
  g.kt = spec.kt;
  g.kh = spec.kh;
  g.kw = spec.kw;
  g.stride = spec.stride;
  g.pt = (spec.kt - 1) / 2;
  g.ph = (spec.kh - 1) / 2;
  g.pw = (spec.kw - 1) / 2;
  const int cols = tp.im2col(x, g);
  const int w2d = tp.reshape(tp.slice_flat(params, w_off, spec.out_ch * spec.fan_in()),
                             ad::Shape{spec.out_ch, static_cast<int>(spec.fan_in())});
  const int bias = tp.slice_flat(params, b_off, spec.out_ch);
  const int y = tp.bias_add_rows(tp.matmul(w2d, cols), bias);
  return tp.reshape(y, ad::Shape{spec.out_ch, g.to(), g.ho(), g.wo()});
}

// He-style uniform initialization: weights U(-b, b) with b = sqrt(6/fan_in),
// biases zero. Entries named "*.weight" are matched to specs by order.
template <typename S>
ad::Tensor<S> init_conv_params(const ParamLayout& layout, const std::vector<ConvSpec>& specs, Rng& rng) {
  ad::Tensor<S> p(ad::Shape{static_cast<int>(layout.total)});
  size_t si = 0;
  for (const auto& e : layout.entries) {
    if (e.name.size() > 7 && e.name.substr(e.name.size() - 7) == ".weight") {
      if (si >= specs.size()) throw std::logic_error("init_conv_params: more weights than specs");
      const double bound = std::sqrt(6.0 / static_cast<double>(specs[si].fan_in()));
      for (long i = 0; i < e.dims.numel(); ++i)
        p.data[e.offset + i] = static_cast<S>(rng.uniform(-bound, bound));
      ++si;
    }
    // biases stay zero
  }
  if (si != specs.size()) throw std::logic_error("init_conv_params: layout/spec count mismatch");
  return p;
}

// ---- losses ----

enum class LossKind { kCharbonnier, kHuber, kL1 };

inline const char* loss_name(LossKind k) {
  switch (k) {
    case LossKind::kCharbonnier: return "charbonnier";
    case LossKind::kHuber: return "huber";
    case LossKind::kL1: return "l1";
  }
  return "?";
}

inline LossKind parse_loss(const std::string& s) {
  if (s == "charbonnier") return LossKind::kCharbonnier;
  if (s == "huber") return LossKind::kHuber;
  if (s == "l1") return LossKind::kL1;
  throw std::invalid_argument("unknown loss kind: " + s);
}

template <typename S>
int mean(ad::Tape<S>& tp, int x) {
  return tp.scale(tp.sum(x), S(1) / static_cast<S>(tp.val(x).numel()));
}

template <typename S>
int l1_loss(ad::Tape<S>& tp, int pred, int target) {
  return mean(tp, tp.abs_(tp.sub(pred, target)));
}

// mean(sqrt((pred-target)^2 + eps^2)); smooth everywhere.
template <typename S>
int charbonnier_loss(ad::Tape<S>& tp, int pred, int target, S eps) {
  const int d = tp.sub(pred, target);
  return mean(tp, tp.sqrt_(tp.addc(tp.square(d), eps * eps)));
}

template <typename S>
int huber_loss(ad::Tape<S>& tp, int pred, int target, S delta) {
  return mean(tp, tp.huber_elem(tp.sub(pred, target), delta));
}

template <typename S>
int mse_loss(ad::Tape<S>& tp, int pred, int target) {
  return mean(tp, tp.square(tp.sub(pred, target)));
}

template <typename S>
int reconstruction_loss(ad::Tape<S>& tp, int pred, int target, LossKind kind, S eps, S delta) {
  switch (kind) {
    case LossKind::kCharbonnier: return charbonnier_loss(tp, pred, target, eps);
    case LossKind::kHuber: return huber_loss(tp, pred, target, delta);
    case LossKind::kL1: return l1_loss(tp, pred, target);
  }
  throw std::logic_error("reconstruction_loss: bad kind");
}

// ---- optimizer ----

// Adam with bias correction. A zero learning rate leaves the parameters
// untouched at the bit level while the moment estimates still advance.
template <typename S>
struct AdamState {
  Eigen::Array<S, Eigen::Dynamic, 1> m, v;
  long t = 0;
  S beta1 = S(0.9), beta2 = S(0.999), eps = S(1e-8);

  explicit AdamState(long n = 0) { resize(n); }

  void resize(long n) {
    m.setZero(n);
    v.setZero(n);
    t = 0;
  }

  void step(Eigen::Array<S, Eigen::Dynamic, 1>& params, const Eigen::Array<S, Eigen::Dynamic, 1>& g,
            S lr) {
    if (params.size() != m.size() || g.size() != m.size())
      throw std::invalid_argument("AdamState::step: size mismatch");
    ++t;
    m = beta1 * m + (S(1) - beta1) * g;
    v = beta2 * v + (S(1) - beta2) * g.square();
    if (lr != S(0)) {
      const S c1 = S(1) / (S(1) - static_cast<S>(std::pow(static_cast<double>(beta1), static_cast<double>(t))));
      const S c2 = S(1) / (S(1) - static_cast<S>(std::pow(static_cast<double>(beta2), static_cast<double>(t))));
      params -= lr * (m * c1) / ((v * c2).sqrt() + eps);
    }
  }
};

// ---- frame <-> tensor bridges ----

template <typename S>
ad::Tensor<S> image_to_tensor(const Image<S>& im) {
  const int C = im.channels(), H = im.height(), W = im.width();
  ad::Tensor<S> t(ad::Shape{C, 1, H, W});
  for (int c = 0; c < C; ++c)
    for (int i = 0; i < H; ++i)
      for (int j = 0; j < W; ++j) t.data[ad::index4(t.shape, c, 0, i, j)] = im.ch[c](i, j);
  return t;
}

template <typename S>
ad::Tensor<S> seq_to_tensor(const FrameSequence<S>& seq) {
  validate_uniform_shape(seq, "seq_to_tensor");
  const int C = seq.channels(), T = seq.length(), H = seq.height(), W = seq.width();
  ad::Tensor<S> t(ad::Shape{C, T, H, W});
  for (int f = 0; f < T; ++f)
    for (int c = 0; c < C; ++c)
      for (int i = 0; i < H; ++i)
        for (int j = 0; j < W; ++j) t.data[ad::index4(t.shape, c, f, i, j)] = seq.frames[f].ch[c](i, j);
  return t;
}

template <typename S>
Image<S> tensor_to_image(const ad::Tensor<S>& t, int frame = 0) {
  if (t.shape.rank() != 4) throw std::invalid_argument("tensor_to_image: rank-4 tensor required");
  const int C = t.shape[0], T = t.shape[1], H = t.shape[2], W = t.shape[3];
  if (frame < 0 || frame >= T) throw std::invalid_argument("tensor_to_image: frame out of range");
  Image<S> im(C, H, W);
  for (int c = 0; c < C; ++c)
    for (int i = 0; i < H; ++i)
      for (int j = 0; j < W; ++j) im.ch[c](i, j) = t.data[ad::index4(t.shape, c, frame, i, j)];
  return im;
}

template <typename S>
FrameSequence<S> tensor_to_sequence(const ad::Tensor<S>& t, Tier tier, int scale) {
  if (t.shape.rank() != 4) throw std::invalid_argument("tensor_to_sequence: rank-4 tensor required");
  FrameSequence<S> seq;
  seq.tier = tier;
  seq.scale_factor = scale;
  for (int f = 0; f < t.shape[1]; ++f) seq.frames.push_back(tensor_to_image(t, f));
  return seq;
}

// Precomputed separable bicubic operators for the differentiable resize op.
template <typename S>
std::pair<typename ad::Tape<S>::RowMatPtr, typename ad::Tape<S>::RowMatPtr> resize_plan(int h, int w,
                                                                                        double scale) {
  using RowMat = typename ad::Tape<S>::RowMat;
  const Eigen::MatrixXd a = resample::resize_matrix(h, resample::scaled_len(h, scale), scale);
  const Eigen::MatrixXd b = resample::resize_matrix(w, resample::scaled_len(w, scale), scale);
  auto ap = std::make_shared<const RowMat>(a.cast<S>());
  auto btp = std::make_shared<const RowMat>(b.transpose().cast<S>());
  return {ap, btp};
}

}  // namespace dynavsr::nn
