// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <Eigen/Dense>
#include <stdexcept>
#include <string>

#include "dynavsr/image.hpp"
#include "dynavsr/kernels.hpp"
#include "dynavsr/resample.hpp"

namespace dynavsr::degrade {

// How the blurred frame is brought down to the lower resolution.
//  kDirect: keep every s-th pixel, offset 0 (the "direct downsampling" used
//           with random kernels).
//  kBicubicAfterBlur: bicubic downscale of the blurred frame (the protocol
//           used with the fixed isotropic/anisotropic kernel families).
enum class DownsampleMode { kDirect, kBicubicAfterBlur };

inline const char* mode_name(DownsampleMode m) {
  return m == DownsampleMode::kDirect ? "direct" : "bicubic_after_blur";
}

inline DownsampleMode parse_mode(const std::string& s) {
  if (s == "direct") return DownsampleMode::kDirect;
  if (s == "bicubic_after_blur") return DownsampleMode::kBicubicAfterBlur;
  throw std::invalid_argument("unknown downsample mode: " + s);
}

// Symmetric reflection that repeats the edge sample: -1 -> 0, n -> n-1.
// Valid for offsets up to n, which the kernel-size guard ensures.
inline int reflect_index(int i, int n) {
  if (i < 0) i = -i - 1;
  if (i >= n) i = 2 * n - 1 - i;
  return i;
}

template <typename S>
Plane<S> pad_symmetric(const Plane<S>& x, int r) {
  const int h = static_cast<int>(x.rows()), w = static_cast<int>(x.cols());
  Plane<S> p(h + 2 * r, w + 2 * r);
  for (int i = 0; i < h + 2 * r; ++i) {
    const int si = reflect_index(i - r, h);
    for (int j = 0; j < w + 2 * r; ++j) p(i, j) = x(si, reflect_index(j - r, w));
  }
  return p;
}

// Correlation with the centered kernel. The synthesized kernels are point
// symmetric, so correlation and convolution agree for them.
template <typename S>
Plane<S> blur_plane(const Plane<S>& x, const kernels::Kernel& k) {
  const int size = static_cast<int>(k.rows());
  if (k.cols() != size || size % 2 == 0) throw std::invalid_argument("blur_plane: kernel must be odd and square");
  if (size > x.rows() || size > x.cols())
    throw std::invalid_argument("blur_plane: kernel larger than frame");
  const int h = static_cast<int>(x.rows()), w = static_cast<int>(x.cols());
  const int r = (size - 1) / 2;
  const Plane<S> padded = pad_symmetric(x, r);
  Plane<S> acc = Plane<S>::Zero(h, w);
  for (int ki = 0; ki < size; ++ki)
    for (int kj = 0; kj < size; ++kj)
      acc.noalias() += static_cast<S>(k(ki, kj)) * padded.block(ki, kj, h, w);
  return acc;
}

template <typename S>
Plane<S> decimate_plane(const Plane<S>& x, int s) {
  const int h = static_cast<int>(x.rows()), w = static_cast<int>(x.cols());
  if (s < 1) throw std::invalid_argument("decimate_plane: scale must be >= 1");
  if (h % s != 0 || w % s != 0)
    throw std::invalid_argument("decimate_plane: frame dims not divisible by scale");
  Plane<S> out(h / s, w / s);
  for (int i = 0; i < h / s; ++i)
    for (int j = 0; j < w / s; ++j) out(i, j) = x(i * s, j * s);
  return out;
}

template <typename S>
Image<S> blur_downsample(const Image<S>& im, const kernels::Kernel& k, int scale, DownsampleMode mode) {
  if (im.height() % scale != 0 || im.width() % scale != 0)
    throw std::invalid_argument("blur_downsample: frame dims not divisible by scale");
  Image<S> out;
  out.ch.reserve(im.ch.size());
  for (const auto& p : im.ch) {
    Plane<S> blurred = blur_plane(p, k);
    if (mode == DownsampleMode::kDirect) {
      out.ch.push_back(decimate_plane(blurred, scale));
    } else {
      out.ch.push_back(resample::resize_plane(blurred, 1.0 / scale));
    }
  }
  return out;
}

template <typename S>
FrameSequence<S> blur_downsample(const FrameSequence<S>& seq, const kernels::Kernel& k, int scale,
                                 DownsampleMode mode) {
  validate_uniform_shape(seq, "blur_downsample");
  FrameSequence<S> out;
  out.scale_factor = scale;
  out.tier = seq.tier == Tier::kHr ? Tier::kLr : Tier::kSlr;
  out.frames.reserve(seq.frames.size());
  for (const auto& f : seq.frames) out.frames.push_back(blur_downsample(f, k, scale, mode));
  return out;
}

// One training/evaluation task: an HR clip with its two degraded tiers, both
// produced by the same kernel and downsampling mode.
template <typename S>
struct TaskTriple {
  FrameSequence<S> hr, lr, slr;
  kernels::KernelSpec kernel_spec;
  kernels::Kernel kernel;
  DownsampleMode mode = DownsampleMode::kDirect;
  int scale = 2;
};

template <typename S>
TaskTriple<S> make_task_triple(const FrameSequence<S>& hr, const kernels::KernelSpec& spec, int scale,
                               DownsampleMode mode) {
  validate_uniform_shape(hr, "make_task_triple");
  if (hr.height() % (scale * scale) != 0 || hr.width() % (scale * scale) != 0)
    throw std::invalid_argument("make_task_triple: HR dims must be divisible by scale^2");
  TaskTriple<S> t;
  t.kernel_spec = spec;
  t.kernel = kernels::synth_kernel(spec);
  t.mode = mode;
  t.scale = scale;
  t.hr = hr;
  t.hr.tier = Tier::kHr;
  t.hr.scale_factor = scale;
  t.lr = blur_downsample(t.hr, t.kernel, scale, mode);
  t.slr = blur_downsample(t.lr, t.kernel, scale, mode);
  return t;
}

// Degrades in 64-bit and hands the result to the 32-bit training side. This
// is the precision boundary of the pipeline.
inline TaskTriple<float> make_training_triple(const FrameSequence<double>& hr,
                                              const kernels::KernelSpec& spec, int scale,
                                              DownsampleMode mode) {
  TaskTriple<double> t = make_task_triple(hr, spec, scale, mode);
  TaskTriple<float> out;
  out.hr = cast_sequence<float>(t.hr);
  out.lr = cast_sequence<float>(t.lr);
  out.slr = cast_sequence<float>(t.slr);
  out.kernel_spec = t.kernel_spec;
  out.kernel = std::move(t.kernel);
  out.mode = t.mode;
  out.scale = t.scale;
  return out;
}

}  // namespace dynavsr::degrade
