// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <vector>

#include "dynavsr/image.hpp"
#include "dynavsr/rng.hpp"

namespace dynavsr::synth {

// Procedural video source for tests and desk-scale training: drifting
// oriented sinusoids plus soft-edged moving discs, evaluated analytically at
// motion-shifted coordinates so inter-frame motion is exact and content is
// deterministic in the generator draws.
struct SceneConfig {
  int frames = 7;
  int height = 64;
  int width = 64;
  int channels = 3;
  int waves = 6;
  int blobs = 3;
};

namespace detail {

struct Wave {
  double fx, fy, phase, amp;
  double vx, vy;
  double gain[3];
};

struct Blob {
  double cx, cy, radius, softness, amp;
  double vx, vy;
  double gain[3];
};

}  // namespace detail

inline FrameSequence<double> make_sequence(Rng& rng, const SceneConfig& cfg = {}) {
  std::vector<detail::Wave> waves(cfg.waves);
  for (auto& w : waves) {
    const double ang = rng.uniform(0.0, 2.0 * M_PI);
    const double freq = rng.uniform(0.04, 0.42);  // cycles per pixel
    w.fx = 2.0 * M_PI * freq * std::cos(ang);
    w.fy = 2.0 * M_PI * freq * std::sin(ang);
    w.phase = rng.uniform(0.0, 2.0 * M_PI);
    w.amp = rng.uniform(0.25, 1.0);
    w.vx = rng.uniform(-1.5, 1.5);
    w.vy = rng.uniform(-1.5, 1.5);
    for (double& g : w.gain) g = rng.uniform(0.35, 1.0);
  }
  std::vector<detail::Blob> blobs(cfg.blobs);
  for (auto& b : blobs) {
    b.cx = rng.uniform(0.0, cfg.width);
    b.cy = rng.uniform(0.0, cfg.height);
    b.radius = rng.uniform(4.0, std::max(6.0, cfg.height / 3.0));
    b.softness = rng.uniform(0.7, 2.0);
    b.amp = rng.uniform(0.5, 1.3) * (rng.uniform() < 0.5 ? -1.0 : 1.0);
    b.vx = rng.uniform(-2.0, 2.0);
    b.vy = rng.uniform(-2.0, 2.0);
    for (double& g : b.gain) g = rng.uniform(0.35, 1.0);
  }

  FrameSequence<double> seq;
  seq.tier = Tier::kHr;
  for (int t = 0; t < cfg.frames; ++t) {
    Image<double> frame(cfg.channels, cfg.height, cfg.width);
    for (int i = 0; i < cfg.height; ++i) {
      for (int j = 0; j < cfg.width; ++j) {
        double raw[3] = {0.0, 0.0, 0.0};
        for (const auto& w : waves) {
          const double x = j - w.vx * t, y = i - w.vy * t;
          const double v = w.amp * std::sin(w.fx * x + w.fy * y + w.phase);
          for (int c = 0; c < cfg.channels; ++c) raw[c] += v * w.gain[c];
        }
        for (const auto& b : blobs) {
          const double x = j - b.vx * t, y = i - b.vy * t;
          const double dist = std::sqrt((x - b.cx) * (x - b.cx) + (y - b.cy) * (y - b.cy));
          const double disc = 0.5 * (1.0 + std::tanh((b.radius - dist) / b.softness));
          for (int c = 0; c < cfg.channels; ++c) raw[c] += b.amp * disc * b.gain[c];
        }
        for (int c = 0; c < cfg.channels; ++c)
          frame.ch[c](i, j) = 0.5 + 0.45 * std::tanh(0.8 * raw[c]);
      }
    }
    seq.frames.push_back(std::move(frame));
  }
  return seq;
}

}  // namespace dynavsr::synth
