// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <functional>
#include <limits>
#include <stdexcept>
#include <vector>

#include "dynavsr/degrade.hpp"
#include "dynavsr/mfdn.hpp"
#include "dynavsr/nn.hpp"
#include "dynavsr/rng.hpp"
#include "dynavsr/stopwatch.hpp"
#include "dynavsr/tape.hpp"
#include "dynavsr/vsr.hpp"

namespace dynavsr::meta {

struct BetaDecay {
  double factor = 5.0;
  std::vector<long> milestones = {20000, 25000};
};

struct MetaConfig {
  double alpha = 1e-5;         // inner (adaptation) step size
  double beta = 1e-5;          // outer step size, decayed at the milestones
  int inner_steps = 1;
  int meta_batch = 4;
  long total_iters = 30000;
  BetaDecay beta_decay;
  bool second_order = true;    // differentiate through the inner update
};

inline double beta_at(const MetaConfig& cfg, long iter) {
  double b = cfg.beta;
  for (long m : cfg.beta_decay.milestones)
    if (iter >= m) b /= cfg.beta_decay.factor;
  return b;
}

// How the inner update moves the parameters. Meta-training with full
// second-order gradients needs plain gradient steps (they stay on the
// tape); adaptation at test time uses Adam with fresh optimizer state.
enum class InnerRule { kSgd, kAdam };

template <typename S>
struct AdaptationResult {
  ad::Tensor<S> phi, theta;        // adapted parameters
  double inner_loss_lr = 0.0;      // LR-reconstruction loss before the first update
  double inner_loss_slr = 0.0;     // SLR-guidance loss before the first update
  int steps_run = 0;
  int backward_passes = 0;
  double wall_time_preprocess_s = 0.0;
};

namespace detail {

template <typename S>
struct InnerLosses {
  int total = -1, lr_fidelity = -1, slr_guidance = -1;
};

// Shared loss construction of the adaptation objective: the backbone must
// reproduce the LR center frame from the estimated SLR window, while the
// estimated SLR window must stay close to its target.
template <typename S>
InnerLosses<S> build_inner_losses(ad::Tape<S>& tp, const mfdn::Mfdn& est, int phi,
                                  const vsr::Backbone<S>& backbone, int theta, int lr_window,
                                  int slr_target) {
  const auto& bc = backbone.config();
  const int slr_hat = est.forward(tp, phi, lr_window);
  const int lr_hat = backbone.forward(tp, theta, slr_hat);
  const int lr_center = tp.slice_t(lr_window, bc.window_radius, 1);
  InnerLosses<S> out;
  out.lr_fidelity = nn::reconstruction_loss(tp, lr_hat, lr_center, bc.loss,
                                            static_cast<S>(bc.charbonnier_eps),
                                            static_cast<S>(bc.huber_delta));
  out.slr_guidance = nn::l1_loss(tp, slr_hat, slr_target);
  out.total = tp.add(out.lr_fidelity, out.slr_guidance);
  return out;
}

template <typename S>
struct GraphInner {
  int phi = -1, theta = -1;  // tape ids of the adapted parameters
  double loss_lr0 = 0.0, loss_slr0 = 0.0;
  int backwards = 0;
};

// Gradient-descent inner loop on the tape. With create_graph=true the
// adapted parameters remain differentiable functions of the base
// parameters; with false the inner gradients are constants and the outer
// gradient reduces to the first-order approximation.
template <typename S>
GraphInner<S> run_inner_graph(ad::Tape<S>& tp, const mfdn::Mfdn& est, int phi0,
                              const vsr::Backbone<S>& backbone, int theta0, int lr_window,
                              int slr_target, const MetaConfig& cfg, bool create_graph) {
  GraphInner<S> st;
  st.phi = phi0;
  st.theta = theta0;
  for (int k = 0; k < cfg.inner_steps; ++k) {
    const auto losses = build_inner_losses(tp, est, st.phi, backbone, st.theta, lr_window, slr_target);
    if (k == 0) {
      st.loss_lr0 = tp.val(losses.lr_fidelity).scalar_value();
      st.loss_slr0 = tp.val(losses.slr_guidance).scalar_value();
    }
    const auto g = tp.grad(losses.total, {st.phi, st.theta}, create_graph);
    ++st.backwards;
    if (cfg.alpha != 0.0) {
      st.phi = tp.sub(st.phi, tp.scale(g[0], static_cast<S>(cfg.alpha)));
      st.theta = tp.sub(st.theta, tp.scale(g[1], static_cast<S>(cfg.alpha)));
    }
  }
  return st;
}

// Adam inner loop on values, one fresh tape per step. Optimizer state is
// created here and discarded with the call.
template <typename S>
AdaptationResult<S> run_inner_adam(const mfdn::Mfdn& est, const ad::Tensor<S>& phi0,
                                   const vsr::Backbone<S>& backbone, const ad::Tensor<S>& theta0,
                                   const ad::Tensor<S>& lr_window, const ad::Tensor<S>& slr_target,
                                   const MetaConfig& cfg) {
  AdaptationResult<S> res;
  res.phi = phi0;
  res.theta = theta0;
  nn::AdamState<S> opt_phi(phi0.numel()), opt_theta(theta0.numel());
  for (int k = 0; k < cfg.inner_steps; ++k) {
    ad::Tape<S> tp;
    const int phi = tp.leaf(res.phi, true);
    const int theta = tp.leaf(res.theta, true);
    const int lr = tp.leaf(lr_window, false);
    const int slr = tp.leaf(slr_target, false);
    const auto losses = build_inner_losses(tp, est, phi, backbone, theta, lr, slr);
    if (k == 0) {
      res.inner_loss_lr = tp.val(losses.lr_fidelity).scalar_value();
      res.inner_loss_slr = tp.val(losses.slr_guidance).scalar_value();
    }
    const auto g = tp.grad(losses.total, {phi, theta});
    ++res.backward_passes;
    opt_phi.step(res.phi.data, tp.val(g[0]).data, static_cast<S>(cfg.alpha));
    opt_theta.step(res.theta.data, tp.val(g[1]).data, static_cast<S>(cfg.alpha));
    ++res.steps_run;
  }
  return res;
}

template <typename S>
ad::Tensor<S> window_slice(const FrameSequence<S>& seq, int frames, const char* what) {
  if (seq.length() < frames)
    throw std::invalid_argument(std::string(what) + ": need at least " + std::to_string(frames) +
                                " frames, got " + std::to_string(seq.length()));
  FrameSequence<S> win;
  win.tier = seq.tier;
  win.scale_factor = seq.scale_factor;
  win.frames.assign(seq.frames.begin(), seq.frames.begin() + frames);
  return nn::seq_to_tensor(win);
}

}  // namespace detail

// One adaptation of (phi, theta) to a clip: `cfg.inner_steps` updates of the
// joint adaptation objective on the first frame window. kSgd takes plain
// gradient steps; kAdam (the test-time rule) uses Adam with fresh state.
// alpha = 0 performs the gradient computations but returns the parameters
// bit-identically unchanged.
template <typename S>
AdaptationResult<S> inner_update(const mfdn::Mfdn& est, const ad::Tensor<S>& phi,
                                 const vsr::Backbone<S>& backbone, const ad::Tensor<S>& theta,
                                 const FrameSequence<S>& lr_seq, const FrameSequence<S>& slr_target,
                                 const MetaConfig& cfg, InnerRule rule = InnerRule::kAdam) {
  const int frames = backbone.window_frames();
  const ad::Tensor<S> lr_win = detail::window_slice(lr_seq, frames, "inner_update lr");
  const ad::Tensor<S> slr_win = detail::window_slice(slr_target, frames, "inner_update slr");
  if (slr_win.shape[2] * 2 != lr_win.shape[2] || slr_win.shape[3] * 2 != lr_win.shape[3])
    throw std::invalid_argument("inner_update: slr frames must be half the lr resolution");
  if (rule == InnerRule::kAdam)
    return detail::run_inner_adam(est, phi, backbone, theta, lr_win, slr_win, cfg);
  ad::Tape<S> tp;
  const int phi0 = tp.leaf(phi, true);
  const int theta0 = tp.leaf(theta, true);
  const int lr = tp.leaf(lr_win, false);
  const int slr = tp.leaf(slr_win, false);
  const auto st = detail::run_inner_graph(tp, est, phi0, backbone, theta0, lr, slr, cfg, false);
  AdaptationResult<S> res;
  res.phi = tp.val(st.phi);
  res.theta = tp.val(st.theta);
  res.inner_loss_lr = st.loss_lr0;
  res.inner_loss_slr = st.loss_slr0;
  res.steps_run = cfg.inner_steps;
  res.backward_passes = st.backwards;
  return res;
}

template <typename S>
struct TaskGrads {
  ad::Tensor<S> g_phi, g_theta;  // routed meta-gradients w.r.t. the base parameters
  double loss_in_lr = 0.0, loss_in_slr = 0.0;
  double loss_out_hr = 0.0, loss_out_slr = 0.0;
  int backwards = 0;
};

// Meta-gradients of one task. The adapted backbone is scored against the HR
// center frame and drives theta only; the adapted estimator is scored
// against the true SLR window and drives phi only. A zero weight skips that
// branch entirely, leaving an exactly zero gradient.
template <typename S>
TaskGrads<S> compute_meta_grads(const mfdn::Mfdn& est, const ad::Tensor<S>& phi,
                                const vsr::Backbone<S>& backbone, const ad::Tensor<S>& theta,
                                const degrade::TaskTriple<S>& task, const MetaConfig& cfg,
                                InnerRule rule, double hr_weight = 1.0, double slr_weight = 1.0) {
  const auto& bc = backbone.config();
  const int frames = backbone.window_frames();
  const ad::Tensor<S> lr_win = detail::window_slice(task.lr, frames, "compute_meta_grads lr");
  const ad::Tensor<S> slr_win = detail::window_slice(task.slr, frames, "compute_meta_grads slr");
  if (task.hr.length() < frames)
    throw std::invalid_argument("compute_meta_grads: hr clip shorter than the frame window");
  const ad::Tensor<S> hr_center = nn::image_to_tensor(task.hr.frames[bc.window_radius]);

  TaskGrads<S> out;
  out.g_phi = ad::Tensor<S>::zeros(phi.shape);
  out.g_theta = ad::Tensor<S>::zeros(theta.shape);

  ad::Tape<S> tp;
  int phi_base = -1, theta_base = -1, phi_ad = -1, theta_ad = -1;
  if (rule == InnerRule::kSgd) {
    phi_base = tp.leaf(phi, true);
    theta_base = tp.leaf(theta, true);
    const int lr = tp.leaf(lr_win, false);
    const int slr = tp.leaf(slr_win, false);
    const auto st = detail::run_inner_graph(tp, est, phi_base, backbone, theta_base, lr, slr, cfg,
                                            cfg.second_order);
    out.loss_in_lr = st.loss_lr0;
    out.loss_in_slr = st.loss_slr0;
    out.backwards = st.backwards;
    phi_ad = st.phi;
    theta_ad = st.theta;
  } else {
    const auto ad_res = detail::run_inner_adam(est, phi, backbone, theta, lr_win, slr_win, cfg);
    out.loss_in_lr = ad_res.inner_loss_lr;
    out.loss_in_slr = ad_res.inner_loss_slr;
    out.backwards = ad_res.backward_passes;
    // First-order: gradients at the adapted parameters are applied to the
    // base parameters.
    phi_base = phi_ad = tp.leaf(ad_res.phi, true);
    theta_base = theta_ad = tp.leaf(ad_res.theta, true);
  }

  const int lr_full = tp.leaf(lr_win, false);
  if (hr_weight != 0.0) {
    const int hr_hat = backbone.forward(tp, theta_ad, lr_full);
    const int hr_ref = tp.leaf(hr_center, false);
    const int l_hr = nn::reconstruction_loss(tp, hr_hat, hr_ref, bc.loss,
                                             static_cast<S>(bc.charbonnier_eps),
                                             static_cast<S>(bc.huber_delta));
    out.loss_out_hr = tp.val(l_hr).scalar_value();
    const auto g = tp.grad(l_hr, {theta_base});
    ++out.backwards;
    out.g_theta.data = tp.val(g[0]).data * static_cast<S>(hr_weight);
  }
  if (slr_weight != 0.0) {
    const int slr_hat = est.forward(tp, phi_ad, lr_full);
    const int slr_ref = tp.leaf(slr_win, false);
    const int l_slr = nn::l1_loss(tp, slr_hat, slr_ref);
    out.loss_out_slr = tp.val(l_slr).scalar_value();
    const auto g = tp.grad(l_slr, {phi_base});
    ++out.backwards;
    out.g_phi.data = tp.val(g[0]).data * static_cast<S>(slr_weight);
  }
  return out;
}

template <typename S>
struct MetaTrainState {
  ad::Tensor<S> phi, theta;
  nn::AdamState<S> opt_phi, opt_theta;
  long iter = 0;

  void reset_optimizers() {
    opt_phi.resize(phi.numel());
    opt_theta.resize(theta.numel());
  }
};

struct OuterMetrics {
  double loss_in_lr = 0.0, loss_in_slr = 0.0;
  double loss_out_hr = 0.0, loss_out_slr = 0.0;
  double beta_used = 0.0;
};

// One outer iteration over a batch of tasks: meta-gradients are summed
// across the batch and applied with Adam at the scheduled outer rate. The
// HR branch only ever moves theta and the SLR branch only ever moves phi.
template <typename S>
OuterMetrics outer_step(const mfdn::Mfdn& est, const vsr::Backbone<S>& backbone,
                        MetaTrainState<S>& st, const std::vector<degrade::TaskTriple<S>>& tasks,
                        const MetaConfig& cfg, double hr_weight = 1.0, double slr_weight = 1.0) {
  if (tasks.empty()) throw std::invalid_argument("outer_step: empty task batch");
  const InnerRule rule = cfg.second_order ? InnerRule::kSgd : InnerRule::kAdam;
  ad::Tensor<S> g_phi = ad::Tensor<S>::zeros(st.phi.shape);
  ad::Tensor<S> g_theta = ad::Tensor<S>::zeros(st.theta.shape);
  OuterMetrics m;
  for (const auto& task : tasks) {
    const auto tg = compute_meta_grads(est, st.phi, backbone, st.theta, task, cfg, rule, hr_weight,
                                       slr_weight);
    g_phi.data += tg.g_phi.data;
    g_theta.data += tg.g_theta.data;
    m.loss_in_lr += tg.loss_in_lr;
    m.loss_in_slr += tg.loss_in_slr;
    m.loss_out_hr += tg.loss_out_hr;
    m.loss_out_slr += tg.loss_out_slr;
  }
  const double inv = 1.0 / static_cast<double>(tasks.size());
  m.loss_in_lr *= inv;
  m.loss_in_slr *= inv;
  m.loss_out_hr *= inv;
  m.loss_out_slr *= inv;
  if (!std::isfinite(m.loss_out_hr) || !std::isfinite(m.loss_out_slr))
    throw std::runtime_error("outer_step: meta loss diverged at iteration " + std::to_string(st.iter));
  m.beta_used = beta_at(cfg, st.iter);
  const S beta = static_cast<S>(m.beta_used);
  st.opt_theta.step(st.theta.data, g_theta.data, beta);
  st.opt_phi.step(st.phi.data, g_phi.data, beta);
  ++st.iter;
  return m;
}

struct MetaTrainHooks {
  std::function<void(long, const OuterMetrics&)> on_metrics;     // called once per iteration
  std::function<void(long)> on_checkpoint;                       // called on the cadence below
  long checkpoint_every = 0;                                     // 0 disables periodic checkpoints
  std::function<double()> validate;                              // optional adapted-quality probe
};

struct MetaTrainSummary {
  double val_initial = std::numeric_limits<double>::quiet_NaN();
  double val_final = std::numeric_limits<double>::quiet_NaN();
};

// Runs outer iterations from st.iter to cfg.total_iters, drawing each task
// batch from `sample`. Hooks observe metrics and checkpoint the caller's
// state; the optional validator is invoked before and after training.
template <typename S>
MetaTrainSummary meta_train(const mfdn::Mfdn& est, const vsr::Backbone<S>& backbone,
                            MetaTrainState<S>& st,
                            const std::function<degrade::TaskTriple<S>(Rng&)>& sample, Rng& task_rng,
                            const MetaConfig& cfg, const MetaTrainHooks& hooks = {}) {
  MetaTrainSummary summary;
  if (hooks.validate) summary.val_initial = hooks.validate();
  while (st.iter < cfg.total_iters) {
    std::vector<degrade::TaskTriple<S>> batch;
    batch.reserve(cfg.meta_batch);
    for (int b = 0; b < cfg.meta_batch; ++b) batch.push_back(sample(task_rng));
    const OuterMetrics m = outer_step(est, backbone, st, batch, cfg);
    if (hooks.on_metrics) hooks.on_metrics(st.iter - 1, m);
    if (hooks.on_checkpoint && hooks.checkpoint_every > 0 &&
        (st.iter % hooks.checkpoint_every == 0 || st.iter == cfg.total_iters))
      hooks.on_checkpoint(st.iter);
  }
  if (hooks.validate) summary.val_final = hooks.validate();
  return summary;
}

template <typename S>
struct MetaTestResult {
  FrameSequence<S> sr;
  AdaptationResult<S> adaptation;
  double wall_time_sr_s = 0.0;
};

// Test-time pipeline for one clip: synthesize the pseudo ground-truth SLR
// window with the frozen pretrained estimator, adapt (phi, theta) from their
// meta-learned initializations with the Adam rule, then upscale the whole
// clip with the adapted backbone.
template <typename S>
MetaTestResult<S> meta_test_adapt(const mfdn::Mfdn& est, const ad::Tensor<S>& phi_pretrained,
                                  const ad::Tensor<S>& phi_meta, const vsr::Backbone<S>& backbone,
                                  const ad::Tensor<S>& theta_meta, const FrameSequence<S>& lr_seq,
                                  const MetaConfig& cfg) {
  const int frames = backbone.window_frames();
  if (lr_seq.length() < frames)
    throw std::invalid_argument("meta_test_adapt: clip shorter than the frame window");
  MetaTestResult<S> out;
  Stopwatch pre;
  FrameSequence<S> window;
  window.tier = lr_seq.tier;
  window.scale_factor = lr_seq.scale_factor;
  window.frames.assign(lr_seq.frames.begin(), lr_seq.frames.begin() + frames);
  const FrameSequence<S> pseudo_slr = est.apply(phi_pretrained, window, false, frames);
  out.adaptation = inner_update(est, phi_meta, backbone, theta_meta, window, pseudo_slr, cfg,
                                InnerRule::kAdam);
  out.adaptation.wall_time_preprocess_s = pre.seconds();
  Stopwatch sr;
  out.sr = vsr::sliding_window_sr(backbone, out.adaptation.theta, lr_seq);
  out.wall_time_sr_s = sr.seconds();
  return out;
}

}  // namespace dynavsr::meta
