// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "dynavsr/image.hpp"

namespace dynavsr::metrics {

// Peak signal-to-noise ratio on [0,1] data, squared error pooled over all
// channels and pixels. Identical inputs yield +infinity.
inline double psnr(const Image<double>& pred, const Image<double>& gt) {
  if (!same_shape(pred, gt)) throw std::invalid_argument("psnr: shape mismatch");
  if (pred.channels() == 0) throw std::invalid_argument("psnr: empty image");
  double se = 0.0;
  long n = 0;
  for (int c = 0; c < pred.channels(); ++c) {
    se += (pred.ch[c] - gt.ch[c]).array().square().sum();
    n += pred.ch[c].size();
  }
  const double mse = se / static_cast<double>(n);
  if (mse == 0.0) return std::numeric_limits<double>::infinity();
  return 10.0 * std::log10(1.0 / mse);
}

// Rec.601 luma. Single-channel images pass through unchanged.
inline Plane<double> luma(const Image<double>& im) {
  if (im.channels() == 1) return im.ch[0];
  if (im.channels() != 3) throw std::invalid_argument("luma: need 1 or 3 channels");
  return 0.299 * im.ch[0] + 0.587 * im.ch[1] + 0.114 * im.ch[2];
}

inline double psnr_luma(const Image<double>& pred, const Image<double>& gt) {
  Image<double> a, b;
  a.ch.push_back(luma(pred));
  b.ch.push_back(luma(gt));
  return psnr(a, b);
}

namespace detail {

inline Eigen::VectorXd gaussian_window(int size, double sigma) {
  Eigen::VectorXd w(size);
  const double c = (size - 1) / 2.0;
  for (int i = 0; i < size; ++i) w[i] = std::exp(-0.5 * (i - c) * (i - c) / (sigma * sigma));
  return w / w.sum();
}

// Separable valid-mode correlation with an outer-product window.
inline Plane<double> filter_valid(const Plane<double>& x, const Eigen::VectorXd& w) {
  const int k = static_cast<int>(w.size());
  const int h = static_cast<int>(x.rows()), wd = static_cast<int>(x.cols());
  Plane<double> rows(h, wd - k + 1);
  for (int j = 0; j < wd - k + 1; ++j) {
    rows.col(j) = x.middleCols(j, k) * w;
  }
  Plane<double> out(h - k + 1, wd - k + 1);
  for (int i = 0; i < h - k + 1; ++i) {
    out.row(i) = w.transpose() * rows.middleRows(i, k);
  }
  return out;
}

}  // namespace detail

// Single-scale structural similarity on luma: 11x11 Gaussian window with
// sigma 1.5, stabilizers K1=0.01 / K2=0.03 at data range 1, windows fully
// inside the image (valid mode).
inline double ssim(const Image<double>& pred, const Image<double>& gt) {
  if (!same_shape(pred, gt)) throw std::invalid_argument("ssim: shape mismatch");
  const Plane<double> x = luma(pred), y = luma(gt);
  constexpr int kWin = 11;
  constexpr double kC1 = 0.01 * 0.01, kC2 = 0.03 * 0.03;
  if (x.rows() < kWin || x.cols() < kWin)
    throw std::invalid_argument("ssim: image smaller than the 11x11 window");
  const Eigen::VectorXd w = detail::gaussian_window(kWin, 1.5);
  const Plane<double> mx = detail::filter_valid(x, w);
  const Plane<double> my = detail::filter_valid(y, w);
  const Plane<double> mxx = detail::filter_valid(x.cwiseProduct(x), w);
  const Plane<double> myy = detail::filter_valid(y.cwiseProduct(y), w);
  const Plane<double> mxy = detail::filter_valid(x.cwiseProduct(y), w);
  const auto mu_x = mx.array(), mu_y = my.array();
  const auto sxx = mxx.array() - mu_x.square();
  const auto syy = myy.array() - mu_y.square();
  const auto sxy = mxy.array() - mu_x * mu_y;
  const auto num = (2.0 * mu_x * mu_y + kC1) * (2.0 * sxy + kC2);
  const auto den = (mu_x.square() + mu_y.square() + kC1) * (sxx + syy + kC2);
  return (num / den).mean();
}

}  // namespace dynavsr::metrics
