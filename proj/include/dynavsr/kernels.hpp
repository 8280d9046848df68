// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <cstdio>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "dynavsr/rng.hpp"

namespace dynavsr::kernels {

using Kernel = Eigen::MatrixXd;

// Anisotropic Gaussian blur kernel: axis scales sigma1/sigma2 and a rotation
// of the principal axis by theta (radians). sigma1 == sigma2 makes the kernel
// isotropic, in which case theta has no effect.
struct KernelSpec {
  int size = 13;  // odd, >= 3
  double sigma1 = 1.0;
  double sigma2 = 1.0;
  double theta = 0.0;
};

inline void validate_spec(const KernelSpec& s) {
  if (s.size < 3 || s.size % 2 == 0)
    throw std::invalid_argument("kernel size must be odd and >= 3, got " + std::to_string(s.size));
  if (!(s.sigma1 > 0.0) || !std::isfinite(s.sigma1) || !(s.sigma2 > 0.0) || !std::isfinite(s.sigma2))
    throw std::invalid_argument("kernel sigmas must be positive and finite");
  if (!std::isfinite(s.theta)) throw std::invalid_argument("kernel theta must be finite");
}

// Evaluates the Gaussian on the integer grid centered at the middle tap and
// normalizes to unit sum. Point symmetry about the center is exact at the
// bit level: the rotated coordinates of (-x,-y) are exact negations of those
// of (x,y), and squaring erases the sign.
inline Kernel synth_kernel(const KernelSpec& spec) {
  validate_spec(spec);
  const int r = (spec.size - 1) / 2;
  const double c = std::cos(spec.theta), s = std::sin(spec.theta);
  const double inv1 = 1.0 / (spec.sigma1 * spec.sigma1);
  const double inv2 = 1.0 / (spec.sigma2 * spec.sigma2);
  Kernel k(spec.size, spec.size);
  double sum = 0.0;
  for (int row = 0; row < spec.size; ++row) {
    const double y = static_cast<double>(row - r);
    for (int col = 0; col < spec.size; ++col) {
      const double x = static_cast<double>(col - r);
      const double u = c * x + s * y;
      const double v = -s * x + c * y;
      const double w = std::exp(-0.5 * (u * u * inv1 + v * v * inv2));
      k(row, col) = w;
      sum += w;
    }
  }
  if (!(sum > 0.0) || !std::isfinite(sum))
    throw std::runtime_error("degenerate kernel: weights do not sum to a positive finite value");
  k /= sum;
  return k;
}

struct KernelSamplingConfig {
  int size = 13;
  double sigma_min = 0.2;
  double sigma_max = 2.0;
};

// Random kernel family used for training and for the mixed evaluation
// protocol: both sigmas uniform in [sigma_min, sigma_max], theta uniform in
// [-pi, pi].
inline KernelSpec sample_kernel_spec(Rng& rng, const KernelSamplingConfig& cfg = {}) {
  if (!(cfg.sigma_min > 0.0) || !(cfg.sigma_max >= cfg.sigma_min))
    throw std::invalid_argument("kernel sampling range must satisfy 0 < sigma_min <= sigma_max");
  KernelSpec s;
  s.size = cfg.size;
  s.sigma1 = rng.uniform(cfg.sigma_min, cfg.sigma_max);
  s.sigma2 = rng.uniform(cfg.sigma_min, cfg.sigma_max);
  s.theta = rng.uniform(-M_PI, M_PI);
  return s;
}

// Isotropic evaluation family: widths 0.8 to 1.6 in steps of 0.1 (nine
// kernels). The family name is historical.
inline std::vector<KernelSpec> gaussian8_specs(int size = 13) {
  std::vector<KernelSpec> out;
  for (int i = 0; i <= 8; ++i) {
    const double sigma = 0.8 + 0.1 * i;
    out.push_back({size, sigma, sigma, 0.0});
  }
  return out;
}

// Anisotropic evaluation family: fixed axis scales (0.8, 1.6), four
// orientations at 45 degree steps.
inline std::vector<KernelSpec> aniso4_specs(int size = 13) {
  std::vector<KernelSpec> out;
  for (int i = 0; i < 4; ++i) out.push_back({size, 0.8, 1.6, i * M_PI / 4.0});
  return out;
}

// Text form: header line "size sigma1 sigma2 theta", then one line per row.
// 17 significant digits makes the double round trip exact.
inline std::string serialize_kernel(const KernelSpec& spec, const Kernel& k) {
  if (k.rows() != spec.size || k.cols() != spec.size)
    throw std::invalid_argument("serialize_kernel: weight matrix does not match spec size");
  char buf[64];
  std::string out;
  std::snprintf(buf, sizeof(buf), "%d ", spec.size);
  out += buf;
  std::snprintf(buf, sizeof(buf), "%.17g ", spec.sigma1);
  out += buf;
  std::snprintf(buf, sizeof(buf), "%.17g ", spec.sigma2);
  out += buf;
  std::snprintf(buf, sizeof(buf), "%.17g\n", spec.theta);
  out += buf;
  for (int row = 0; row < spec.size; ++row) {
    for (int col = 0; col < spec.size; ++col) {
      std::snprintf(buf, sizeof(buf), "%.17g%c", k(row, col), col + 1 == spec.size ? '\n' : ' ');
      out += buf;
    }
  }
  return out;
}

inline std::pair<KernelSpec, Kernel> parse_kernel(const std::string& text) {
  std::istringstream is(text);
  KernelSpec spec;
  if (!(is >> spec.size >> spec.sigma1 >> spec.sigma2 >> spec.theta))
    throw std::runtime_error("parse_kernel: malformed header line");
  if (spec.size < 3 || spec.size % 2 == 0 || spec.size > 1 << 12)
    throw std::runtime_error("parse_kernel: implausible kernel size");
  Kernel k(spec.size, spec.size);
  for (int row = 0; row < spec.size; ++row)
    for (int col = 0; col < spec.size; ++col)
      if (!(is >> k(row, col))) throw std::runtime_error("parse_kernel: truncated weight table");
  return {spec, k};
}

}  // namespace dynavsr::kernels
