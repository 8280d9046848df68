// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

#include "dynavsr/degrade.hpp"
#include "dynavsr/image.hpp"
#include "dynavsr/nn.hpp"
#include "dynavsr/rng.hpp"
#include "dynavsr/tape.hpp"

namespace dynavsr::mfdn {

struct MfdnArch {
  int in_ch = 3;
  int width = 32;
  int spatial_kernel = 3;
};

// Downscaling-kernel estimator: a 7-layer CNN that maps a frame window to
// the same window one degradation tier down (half resolution). Layers 1 and
// 7 convolve over time with extent 3, layers 2-6 are purely spatial, layer 4
// carries the single stride-2 halving. ReLU after every layer but the last.
class Mfdn {
 public:
  explicit Mfdn(MfdnArch arch = {}) : arch_(arch) {
    if (arch_.width < 1 || arch_.in_ch < 1 || arch_.spatial_kernel % 2 == 0)
      throw std::invalid_argument("Mfdn: bad architecture");
    const int k = arch_.spatial_kernel, w = arch_.width, c = arch_.in_ch;
    specs_ = {
        {c, w, 3, k, k, 1},  // temporal entry
        {w, w, 1, k, k, 1},
        {w, w, 1, k, k, 1},
        {w, w, 1, k, k, 2},  // resolution halving
        {w, w, 1, k, k, 1},
        {w, w, 1, k, k, 1},
        {w, c, 3, k, k, 1},  // temporal exit
    };
    for (size_t i = 0; i < specs_.size(); ++i) {
      const std::string base = "layer" + std::to_string(i + 1);
      w_off_.push_back(layout_.add(base + ".weight", specs_[i].weight_shape()));
      b_off_.push_back(layout_.add(base + ".bias", specs_[i].bias_shape()));
    }
  }

  const MfdnArch& arch() const { return arch_; }
  const nn::ParamLayout& layout() const { return layout_; }
  long param_count() const { return layout_.total; }

  template <typename S>
  ad::Tensor<S> init_params(Rng& rng) const {
    return nn::init_conv_params<S>(layout_, specs_, rng);
  }

  // (C,T,H,W) -> (C,T,H/2,W/2). H and W must be even.
  template <typename S>
  int forward(ad::Tape<S>& tp, int phi, int x) const {
    validate_input(tp.val(x).shape);
    int h = x;
    for (size_t i = 0; i < specs_.size(); ++i) {
      h = nn::conv(tp, h, phi, specs_[i], w_off_[i], b_off_[i]);
      if (i + 1 < specs_.size()) h = tp.relu(h);
    }
    return h;
  }

  // Single-frame variant with the same parameter tensor shapes: each frame
  // runs through the network as a stack of length one, so the temporal taps
  // of layers 1 and 7 see zero padding on both sides and only the center
  // temporal slice of those weights contributes. Frames are therefore
  // processed independently of each other.
  template <typename S>
  int forward_single_frame(ad::Tape<S>& tp, int phi, int x) const {
    const ad::Shape& sx = tp.val(x).shape;
    validate_input(sx);
    const int T = sx[1];
    int out = -1;
    for (int t0 = 0; t0 < T; ++t0) {
      int h = tp.slice_t(x, t0, 1);
      for (size_t i = 0; i < specs_.size(); ++i) {
        h = nn::conv(tp, h, phi, specs_[i], w_off_[i], b_off_[i]);
        if (i + 1 < specs_.size()) h = tp.relu(h);
      }
      const int placed = tp.pad_t(h, t0, T);
      out = out < 0 ? placed : tp.add(out, placed);
    }
    return out;
  }

  // Value-level forward for inference paths. expected_frames > 0 enforces
  // the window length of the consuming backbone.
  template <typename S>
  FrameSequence<S> apply(const ad::Tensor<S>& phi, const FrameSequence<S>& seq,
                         bool single_frame = false, int expected_frames = 0) const {
    if (expected_frames > 0 && seq.length() != expected_frames)
      throw std::invalid_argument("Mfdn::apply: expected " + std::to_string(expected_frames) +
                                  " frames, got " + std::to_string(seq.length()));
    ad::Tape<S> tp;
    const int p = tp.leaf(phi, false);
    const int x = tp.leaf(nn::seq_to_tensor(seq), false);
    const int y = single_frame ? forward_single_frame(tp, p, x) : forward(tp, p, x);
    FrameSequence<S> out = nn::tensor_to_sequence(tp.val(y), seq.tier == Tier::kHr ? Tier::kLr : Tier::kSlr,
                                                  seq.scale_factor);
    return out;
  }

 private:
  MfdnArch arch_;
  std::vector<nn::ConvSpec> specs_;
  nn::ParamLayout layout_;
  std::vector<long> w_off_, b_off_;

  void validate_input(const ad::Shape& sx) const {
    if (sx.rank() != 4 || sx[0] != arch_.in_ch)
      throw std::invalid_argument("Mfdn: input shape " + sx.str() + " does not match channels");
    if (sx[2] % 2 != 0 || sx[3] % 2 != 0)
      throw std::invalid_argument("Mfdn: spatial dims must be even, got " + sx.str());
  }
};

struct PretrainConfig {
  long steps = 2000;
  int batch = 8;
  double lr = 1e-4;
  uint64_t seed = 0;
  bool single_frame = false;  // train the per-frame variant instead
};

struct PretrainResult {
  ad::Tensor<float> phi;
  std::vector<double> loss_curve;
};

// Supervised pretraining on synthesized (LR window, SLR window) pairs drawn
// from `sample`. Minimizes mean absolute error with Adam.
inline PretrainResult pretrain_mfdn(const Mfdn& model,
                                    const std::function<degrade::TaskTriple<float>(Rng&)>& sample,
                                    const PretrainConfig& cfg) {
  if (cfg.steps < 1 || cfg.batch < 1) throw std::invalid_argument("pretrain_mfdn: steps and batch must be positive");
  Rng data_rng = Rng::substream(cfg.seed, "mfdn_pretrain/data");
  Rng init_rng = Rng::substream(cfg.seed, "mfdn_pretrain/init");
  PretrainResult res;
  res.phi = model.init_params<float>(init_rng);
  nn::AdamState<float> opt(res.phi.numel());
  for (long step = 0; step < cfg.steps; ++step) {
    ad::Tape<float> tp;
    const int phi = tp.leaf(res.phi, true);
    int loss = -1;
    for (int b = 0; b < cfg.batch; ++b) {
      degrade::TaskTriple<float> t = sample(data_rng);
      const int x = tp.leaf(nn::seq_to_tensor(t.lr), false);
      const int target = tp.leaf(nn::seq_to_tensor(t.slr), false);
      const int pred = cfg.single_frame ? model.forward_single_frame(tp, phi, x)
                                        : model.forward(tp, phi, x);
      const int item = nn::l1_loss(tp, pred, target);
      loss = loss < 0 ? item : tp.add(loss, item);
    }
    loss = tp.scale(loss, 1.0f / cfg.batch);
    const double lv = tp.val(loss).scalar_value();
    if (!std::isfinite(lv))
      throw std::runtime_error("pretrain_mfdn: loss diverged at step " + std::to_string(step));
    res.loss_curve.push_back(lv);
    const auto g = tp.grad(loss, {phi});
    opt.step(res.phi.data, tp.val(g[0]).data, static_cast<float>(cfg.lr));
  }
  return res;
}

}  // namespace dynavsr::mfdn
