// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <doctest.h>

#include <cmath>
#include <functional>
#include <vector>

#include "dynavsr/rng.hpp"
#include "dynavsr/synth.hpp"
#include "dynavsr/tape.hpp"

namespace testutil {

using dynavsr::Rng;

inline dynavsr::ad::Tensor<double> rand_tensor(Rng& rng, const dynavsr::ad::Shape& shape,
                                               double lo = -1.0, double hi = 1.0) {
  auto t = dynavsr::ad::Tensor<double>::zeros(shape);
  for (long i = 0; i < t.numel(); ++i) t.data[i] = rng.uniform(lo, hi);
  return t;
}

inline double rel_err(double a, double b, double floor) {
  return std::abs(a - b) / std::max({floor, std::abs(a), std::abs(b)});
}

struct OpCheck {
  std::vector<dynavsr::ad::Tensor<double>> inputs;
  // Builds a scalar loss from leaf node ids on a fresh tape.
  std::function<int(dynavsr::ad::Tape<double>&, const std::vector<int>&)> build;
  double h = 1e-5;
  double tol = 1e-6;
  double floor = 1e-4;
  long max_checked = 400;  // elements probed per input (strided when larger)
};

// Central-difference validation of reverse-mode gradients for one op graph.
inline void check_gradients(const OpCheck& oc) {
  using dynavsr::ad::Tape;
  const auto eval = [&](const std::vector<dynavsr::ad::Tensor<double>>& xs) {
    Tape<double> tp;
    std::vector<int> ids;
    for (const auto& x : xs) ids.push_back(tp.leaf(x, false));
    return tp.val(oc.build(tp, ids)).scalar_value();
  };
  Tape<double> tp;
  std::vector<int> ids;
  for (const auto& x : oc.inputs) ids.push_back(tp.leaf(x, true));
  const int loss = oc.build(tp, ids);
  const auto grads = tp.grad(loss, ids);
  for (size_t i = 0; i < oc.inputs.size(); ++i) {
    const auto g = tp.val(grads[i]);
    const long n = oc.inputs[i].numel();
    const long stride = std::max<long>(1, n / oc.max_checked);
    for (long j = 0; j < n; j += stride) {
      auto xs = oc.inputs;
      xs[i].data[j] += oc.h;
      const double fp = eval(xs);
      xs[i].data[j] -= 2 * oc.h;
      const double fm = eval(xs);
      const double fd = (fp - fm) / (2 * oc.h);
      const double rel = rel_err(g.data[j], fd, oc.floor);
      if (rel >= oc.tol) {
        CAPTURE(i);
        CAPTURE(j);
        CAPTURE(g.data[j]);
        CAPTURE(fd);
      }
      REQUIRE(rel < oc.tol);
    }
  }
}

// Smooth multi-frame test content in [0, 1].
inline dynavsr::FrameSequence<double> scene(uint64_t seed, int frames, int h, int w,
                                            int channels = 3) {
  dynavsr::synth::SceneConfig sc;
  sc.frames = frames;
  sc.height = h;
  sc.width = w;
  sc.channels = channels;
  Rng rng(seed);
  return dynavsr::synth::make_sequence(rng, sc);
}

}  // namespace testutil
