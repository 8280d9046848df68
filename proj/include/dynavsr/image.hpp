// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <Eigen/Dense>
#include <stdexcept>
#include <string>
#include <vector>

namespace dynavsr {

// Degradation tier of a sequence. HR is ground truth, LR = HR downscaled by
// the (unknown) degradation, SLR = LR downscaled once more by the same
// degradation.
enum class Tier { kHr, kLr, kSlr };

inline const char* tier_name(Tier t) {
  switch (t) {
    case Tier::kHr: return "HR";
    case Tier::kLr: return "LR";
    case Tier::kSlr: return "SLR";
  }
  return "?";
}

// One channel plane, H rows by W cols.
template <typename S>
using Plane = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic>;

// Multi-channel frame. Values are nominally in [0,1] but are only clipped at
// I/O boundaries, never inside the compute pipeline.
template <typename S>
struct Image {
  std::vector<Plane<S>> ch;

  Image() = default;
  Image(int channels, int height, int width, S fill = S(0)) {
    ch.assign(channels, Plane<S>::Constant(height, width, fill));
  }

  int channels() const { return static_cast<int>(ch.size()); }
  int height() const { return ch.empty() ? 0 : static_cast<int>(ch[0].rows()); }
  int width() const { return ch.empty() ? 0 : static_cast<int>(ch[0].cols()); }
};

template <typename S>
bool same_shape(const Image<S>& a, const Image<S>& b) {
  return a.channels() == b.channels() && a.height() == b.height() && a.width() == b.width();
}

// A video clip at one degradation tier. scale_factor is the per-step
// downscaling factor that separates adjacent tiers.
template <typename S>
struct FrameSequence {
  std::vector<Image<S>> frames;
  Tier tier = Tier::kHr;
  int scale_factor = 2;

  int length() const { return static_cast<int>(frames.size()); }
  int channels() const { return frames.empty() ? 0 : frames[0].channels(); }
  int height() const { return frames.empty() ? 0 : frames[0].height(); }
  int width() const { return frames.empty() ? 0 : frames[0].width(); }
};

template <typename To, typename From>
Image<To> cast_image(const Image<From>& im) {
  Image<To> out;
  out.ch.reserve(im.ch.size());
  for (const auto& p : im.ch) out.ch.push_back(p.template cast<To>());
  return out;
}

template <typename To, typename From>
FrameSequence<To> cast_sequence(const FrameSequence<From>& seq) {
  FrameSequence<To> out;
  out.tier = seq.tier;
  out.scale_factor = seq.scale_factor;
  out.frames.reserve(seq.frames.size());
  for (const auto& f : seq.frames) out.frames.push_back(cast_image<To>(f));
  return out;
}

template <typename S>
Image<S> clamp01(const Image<S>& im) {
  Image<S> out = im;
  for (auto& p : out.ch) p = p.array().min(S(1)).max(S(0)).matrix();
  return out;
}

template <typename S>
FrameSequence<S> clamp01(const FrameSequence<S>& seq) {
  FrameSequence<S> out;
  out.tier = seq.tier;
  out.scale_factor = seq.scale_factor;
  out.frames.reserve(seq.frames.size());
  for (const auto& f : seq.frames) out.frames.push_back(clamp01(f));
  return out;
}

// Crops `border` pixels from every side of every channel.
template <typename S>
Image<S> crop_border(const Image<S>& im, int border) {
  if (border <= 0) return im;
  const int h = im.height(), w = im.width();
  if (2 * border >= h || 2 * border >= w)
    throw std::invalid_argument("crop_border: border too large for image");
  Image<S> out;
  out.ch.reserve(im.ch.size());
  for (const auto& p : im.ch) out.ch.push_back(p.block(border, border, h - 2 * border, w - 2 * border));
  return out;
}

template <typename S>
void validate_uniform_shape(const FrameSequence<S>& seq, const std::string& what) {
  if (seq.frames.empty()) throw std::invalid_argument(what + ": empty sequence");
  for (const auto& f : seq.frames)
    if (!same_shape(f, seq.frames[0]))
      throw std::invalid_argument(what + ": frames of mixed shape");
}

}  // namespace dynavsr
