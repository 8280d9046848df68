// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <stdexcept>

#include "dynavsr/image.hpp"

namespace dynavsr::resample {

// Keys cubic interpolation kernel with a = -0.5, support [-2, 2].
inline double cubic_keys(double x) {
  const double ax = std::abs(x);
  if (ax <= 1.0) return (1.5 * ax - 2.5) * ax * ax + 1.0;
  if (ax < 2.0) return ((-0.5 * ax + 2.5) * ax - 4.0) * ax + 2.0;
  return 0.0;
}

inline int scaled_len(int in_len, double scale) {
  return std::max(1, static_cast<int>(std::ceil(in_len * scale)));
}

// Dense per-axis resize operator: out = M * in for one axis, following the
// classic imresize conventions. Sample centers are aligned through
// u = (i + 0.5)/scale - 0.5, the kernel support is widened by 1/scale when
// downscaling (anti-aliasing), out-of-range taps are clamped to the edge
// (replication), and each row is normalized to unit sum.
inline Eigen::MatrixXd resize_matrix(int in_len, int out_len, double scale, bool antialias = true) {
  if (in_len <= 0 || out_len <= 0) throw std::invalid_argument("resize_matrix: empty axis");
  if (!(scale > 0.0)) throw std::invalid_argument("resize_matrix: scale must be positive");
  const bool widen = antialias && scale < 1.0;
  const double kscale = widen ? scale : 1.0;
  const double kernel_width = 4.0 / kscale;
  const int taps = static_cast<int>(std::ceil(kernel_width)) + 2;
  Eigen::MatrixXd m = Eigen::MatrixXd::Zero(out_len, in_len);
  Eigen::VectorXd w(taps);
  for (int i = 0; i < out_len; ++i) {
    const double u = (i + 0.5) / scale - 0.5;
    const int left = static_cast<int>(std::floor(u - kernel_width / 2.0));
    double sum = 0.0;
    for (int p = 0; p < taps; ++p) {
      const double wv = kscale * cubic_keys(kscale * (u - (left + p)));
      w[p] = wv;
      sum += wv;
    }
    for (int p = 0; p < taps; ++p) {
      int j = left + p;
      j = j < 0 ? 0 : (j >= in_len ? in_len - 1 : j);
      m(i, j) += w[p] / sum;
    }
  }
  return m;
}

template <typename S>
Plane<S> resize_plane(const Plane<S>& x, double scale) {
  if (scale == 1.0) return x;
  const int h = static_cast<int>(x.rows()), w = static_cast<int>(x.cols());
  const Eigen::MatrixXd a = resize_matrix(h, scaled_len(h, scale), scale);
  const Eigen::MatrixXd b = resize_matrix(w, scaled_len(w, scale), scale);
  return (a.cast<S>() * x * b.cast<S>().transpose()).eval();
}

// Separable bicubic resize of a frame. scale == 1 returns the input
// untouched, bit for bit.
template <typename S>
Image<S> bicubic_resize(const Image<S>& im, double scale) {
  Image<S> out;
  out.ch.reserve(im.ch.size());
  for (const auto& p : im.ch) out.ch.push_back(resize_plane(p, scale));
  return out;
}

template <typename S>
FrameSequence<S> bicubic_resize(const FrameSequence<S>& seq, double scale) {
  FrameSequence<S> out;
  out.tier = seq.tier;
  out.scale_factor = seq.scale_factor;
  out.frames.reserve(seq.frames.size());
  for (const auto& f : seq.frames) out.frames.push_back(bicubic_resize(f, scale));
  return out;
}

}  // namespace dynavsr::resample
