// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <functional>
#include <map>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

#include "dynavsr/image.hpp"
#include "dynavsr/nn.hpp"
#include "dynavsr/resample.hpp"
#include "dynavsr/rng.hpp"
#include "dynavsr/tape.hpp"

namespace dynavsr::vsr {

struct BackboneConfig {
  std::string name = "tiny";
  int window_radius = 2;  // frames used = 2*radius + 1
  int scale = 2;
  int width = 32;
  int channels = 3;
  nn::LossKind loss = nn::LossKind::kCharbonnier;
  double charbonnier_eps = 1e-3;
  double huber_delta = 1e-2;
};

// A video SR backbone maps a (C, 2N+1, H, W) frame window to the upscaled
// center frame (C, 1, sH, sW). Implementations are registered by name so
// alternative backbones can be swapped in through configuration.
template <typename S>
class Backbone {
 public:
  virtual ~Backbone() = default;
  virtual const BackboneConfig& config() const = 0;
  virtual const nn::ParamLayout& layout() const = 0;
  virtual ad::Tensor<S> init_params(Rng& rng) const = 0;
  virtual int forward(ad::Tape<S>& tp, int theta, int window) const = 0;

  int window_frames() const { return 2 * config().window_radius + 1; }
  long param_count() const { return layout().total; }
};

// Compact residual backbone: the frame window is stacked along channels,
// passed through six 3x3 conv layers (ReLU between), upscaled by sub-pixel
// rearrangement, and added to the bicubic upscale of the center frame. With
// the final layer at zero the output is exactly that bicubic upscale.
template <typename S>
class TinyBackbone final : public Backbone<S> {
 public:
  explicit TinyBackbone(BackboneConfig cfg) : cfg_(std::move(cfg)) {
    if (cfg_.window_radius < 0 || cfg_.scale < 1 || cfg_.width < 1 || cfg_.channels < 1)
      throw std::invalid_argument("TinyBackbone: bad configuration");
    const int c = cfg_.channels, w = cfg_.width, s = cfg_.scale;
    const int stacked = c * (2 * cfg_.window_radius + 1);
    specs_ = {
        {stacked, w, 1, 3, 3, 1},
        {w, w, 1, 3, 3, 1},
        {w, w, 1, 3, 3, 1},
        {w, w, 1, 3, 3, 1},
        {w, w, 1, 3, 3, 1},
        {w, c * s * s, 1, 3, 3, 1},
    };
    for (size_t i = 0; i < specs_.size(); ++i) {
      const std::string base = "layer" + std::to_string(i + 1);
      w_off_.push_back(layout_.add(base + ".weight", specs_[i].weight_shape()));
      b_off_.push_back(layout_.add(base + ".bias", specs_[i].bias_shape()));
    }
  }

  const BackboneConfig& config() const override { return cfg_; }
  const nn::ParamLayout& layout() const override { return layout_; }

  ad::Tensor<S> init_params(Rng& rng) const override {
    return nn::init_conv_params<S>(layout_, specs_, rng);
  }

  int forward(ad::Tape<S>& tp, int theta, int window) const override {
    const ad::Shape& sw = tp.val(window).shape;
    const int frames = 2 * cfg_.window_radius + 1;
    if (sw.rank() != 4 || sw[0] != cfg_.channels || sw[1] != frames)
      throw std::invalid_argument("TinyBackbone: window shape " + sw.str() + " does not match (" +
                                  std::to_string(cfg_.channels) + "," + std::to_string(frames) + ",H,W)");
    const int H = sw[2], W = sw[3];
    // (C,T,H,W) and (C*T,1,H,W) share the same flat layout.
    int h = tp.reshape(window, ad::Shape{cfg_.channels * frames, 1, H, W});
    for (size_t i = 0; i < specs_.size(); ++i) {
      h = nn::conv(tp, h, theta, specs_[i], w_off_[i], b_off_[i]);
      if (i + 1 < specs_.size()) h = tp.relu(h);
    }
    const int up = tp.pixel_shuffle(h, cfg_.scale);
    const int center = tp.slice_t(window, cfg_.window_radius, 1);
    auto [a, bt] = nn::resize_plan<S>(H, W, static_cast<double>(cfg_.scale));
    const int bicubic = tp.resize_hw(center, a, bt);
    return tp.add(up, bicubic);
  }

 private:
  BackboneConfig cfg_;
  std::vector<nn::ConvSpec> specs_;
  nn::ParamLayout layout_;
  std::vector<long> w_off_, b_off_;
};

template <typename S>
class BackboneRegistry {
 public:
  using Factory = std::function<std::unique_ptr<Backbone<S>>(const BackboneConfig&)>;

  static BackboneRegistry& instance() {
    static BackboneRegistry reg;
    return reg;
  }

  void add(const std::string& name, Factory f) { map_[name] = std::move(f); }

  std::unique_ptr<Backbone<S>> make(const BackboneConfig& cfg) const {
    auto it = map_.find(cfg.name);
    if (it == map_.end()) {
      std::string known;
      for (const auto& [k, v] : map_) known += (known.empty() ? "" : ", ") + k;
      throw std::invalid_argument("unknown backbone '" + cfg.name + "' (registered: " + known + ")");
    }
    return it->second(cfg);
  }

 private:
  std::map<std::string, Factory> map_;
};

template <typename S>
void register_builtin_backbones() {
  static const bool once = [] {
    BackboneRegistry<S>::instance().add(
        "tiny", [](const BackboneConfig& c) { return std::make_unique<TinyBackbone<S>>(c); });
    return true;
  }();
  (void)once;
}

template <typename S>
std::unique_ptr<Backbone<S>> make_backbone(const BackboneConfig& cfg) {
  register_builtin_backbones<S>();
  return BackboneRegistry<S>::instance().make(cfg);
}

// Value-level reconstruction loss between frames, matching the tape-side
// definition used in training.
template <typename S>
double vsr_loss(const Image<S>& pred, const Image<S>& target, nn::LossKind kind, double eps = 1e-3,
                double delta = 1e-2) {
  if (!same_shape(pred, target)) throw std::invalid_argument("vsr_loss: shape mismatch");
  double acc = 0.0;
  long n = 0;
  for (int c = 0; c < pred.channels(); ++c) {
    const auto d = (pred.ch[c] - target.ch[c]).template cast<double>().array();
    switch (kind) {
      case nn::LossKind::kCharbonnier: acc += (d.square() + eps * eps).sqrt().sum(); break;
      case nn::LossKind::kHuber:
        acc += (d.abs() <= delta).select(0.5 * d.square(), delta * (d.abs() - 0.5 * delta)).sum();
        break;
      case nn::LossKind::kL1: acc += d.abs().sum(); break;
    }
    n += d.size();
  }
  return acc / static_cast<double>(n);
}

// Builds the clamped-to-edge frame window centered at `t`.
template <typename S>
ad::Tensor<S> window_tensor(const FrameSequence<S>& seq, int t, int radius) {
  FrameSequence<S> win;
  win.tier = seq.tier;
  win.scale_factor = seq.scale_factor;
  for (int k = -radius; k <= radius; ++k) {
    int idx = t + k;
    idx = idx < 0 ? 0 : (idx >= seq.length() ? seq.length() - 1 : idx);
    win.frames.push_back(seq.frames[idx]);
  }
  return nn::seq_to_tensor(win);
}

struct BackbonePretrainConfig {
  long steps = 1200;
  int batch = 8;
  double lr = 1e-4;
  uint64_t seed = 0;
};

struct BackbonePretrainResult {
  ad::Tensor<float> theta;
  std::vector<double> loss_curve;
};

// Supervised warm start on plain bicubic degradation: each drawn HR window
// is downscaled without blur and the backbone learns to invert that. The
// result doubles as the non-adaptive reference model.
inline BackbonePretrainResult pretrain_backbone(const Backbone<float>& backbone,
                                                const std::function<FrameSequence<float>(Rng&)>& sample_hr,
                                                const BackbonePretrainConfig& cfg) {
  if (cfg.steps < 1 || cfg.batch < 1)
    throw std::invalid_argument("pretrain_backbone: steps and batch must be positive");
  const auto& bc = backbone.config();
  Rng data_rng = Rng::substream(cfg.seed, "vsr_pretrain/data");
  Rng init_rng = Rng::substream(cfg.seed, "vsr_pretrain/init");
  BackbonePretrainResult res;
  res.theta = backbone.init_params(init_rng);
  nn::AdamState<float> opt(res.theta.numel());
  for (long step = 0; step < cfg.steps; ++step) {
    ad::Tape<float> tp;
    const int theta = tp.leaf(res.theta, true);
    int loss = -1;
    for (int b = 0; b < cfg.batch; ++b) {
      FrameSequence<float> hr = sample_hr(data_rng);
      if (hr.length() != backbone.window_frames())
        throw std::invalid_argument("pretrain_backbone: sample length does not match the window");
      const FrameSequence<float> lr = resample::bicubic_resize(hr, 1.0 / bc.scale);
      const int x = tp.leaf(nn::seq_to_tensor(lr), false);
      const int target = tp.leaf(nn::image_to_tensor(hr.frames[bc.window_radius]), false);
      const int pred = backbone.forward(tp, theta, x);
      const int item = nn::reconstruction_loss(tp, pred, target, bc.loss,
                                               static_cast<float>(bc.charbonnier_eps),
                                               static_cast<float>(bc.huber_delta));
      loss = loss < 0 ? item : tp.add(loss, item);
    }
    loss = tp.scale(loss, 1.0f / cfg.batch);
    const double lv = tp.val(loss).scalar_value();
    if (!std::isfinite(lv))
      throw std::runtime_error("pretrain_backbone: loss diverged at step " + std::to_string(step));
    res.loss_curve.push_back(lv);
    const auto g = tp.grad(loss, {theta});
    opt.step(res.theta.data, tp.val(g[0]).data, static_cast<float>(cfg.lr));
  }
  return res;
}

// Upscales every frame of a clip by running the backbone over a sliding
// window with edge replication at the boundaries.
template <typename S>
FrameSequence<S> sliding_window_sr(const Backbone<S>& backbone, const ad::Tensor<S>& theta,
                                   const FrameSequence<S>& lr) {
  validate_uniform_shape(lr, "sliding_window_sr");
  FrameSequence<S> out;
  out.tier = lr.tier == Tier::kSlr ? Tier::kLr : Tier::kHr;
  out.scale_factor = lr.scale_factor;
  const int radius = backbone.config().window_radius;
  for (int t = 0; t < lr.length(); ++t) {
    ad::Tape<S> tp;
    const int th = tp.leaf(theta, false);
    const int win = tp.leaf(window_tensor(lr, t, radius), false);
    const int y = backbone.forward(tp, th, win);
    out.frames.push_back(nn::tensor_to_image(tp.val(y), 0));
  }
  return out;
}

}  // namespace dynavsr::vsr
