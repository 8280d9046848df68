// SPDX-License-Identifier: Apache-2.0
//
// Command-line front end: dataset degradation, estimator pretraining,
// meta-training, per-clip adaptation, benchmarking, and profiling.

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "dynavsr/checkpoint.hpp"
#include "dynavsr/config.hpp"
#include "dynavsr/dataset.hpp"
#include "dynavsr/degrade.hpp"
#include "dynavsr/evalbench.hpp"
#include "dynavsr/metaloop.hpp"
#include "dynavsr/mfdn.hpp"
#include "dynavsr/png_io.hpp"
#include "dynavsr/rng.hpp"
#include "dynavsr/synth.hpp"
#include "dynavsr/vsr.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace dynavsr;

namespace {

struct GlobalOpts {
  std::string config_path;
  std::vector<std::string> overrides;
  long seed = -1;
  int workers = 0;
  bool luma_only = false;
  bool force = false;
};

cfg::Config load_config(const GlobalOpts& g) {
  cfg::Config c = g.config_path.empty() ? cfg::Config() : cfg::Config::load(g.config_path);
  for (const auto& ov : g.overrides) c.apply_override(ov);
  if (g.seed >= 0) c.apply_override("seed=" + std::to_string(g.seed));
  if (g.workers > 0) c.apply_override("workers=" + std::to_string(g.workers));
  if (g.luma_only) c.apply_override("eval.luma_only=true");
  if (const char* env = std::getenv("DYNAVSR_DATA_ROOT"); env && *env)
    c.apply_override(std::string("data.root=") + env);
  return c;
}

std::string resolve(const cfg::Config& c, const std::string& key, const std::string& fallback) {
  const std::string v = c.str("run", key);
  if (!v.empty()) return v;
  return (fs::path(c.str("run", "out_dir")) / fallback).string();
}

std::string mfdn_ckpt_path(const cfg::Config& c) { return resolve(c, "mfdn_checkpoint", "mfdn.ckpt"); }
std::string vsr_ckpt_path(const cfg::Config& c) { return resolve(c, "vsr_checkpoint", "vsr_baseline.ckpt"); }
std::string meta_ckpt_path(const cfg::Config& c) { return resolve(c, "meta_checkpoint", "meta_latest.ckpt"); }

std::string train_root(const cfg::Config& c) {
  return (fs::path(c.str("data", "root")) / c.str("data", "train_dir")).string();
}
std::string val_root(const cfg::Config& c) {
  return (fs::path(c.str("data", "root")) / c.str("data", "val_dir")).string();
}

kernels::KernelSpec parse_kernel_setting(const std::string& s, const kernels::KernelSamplingConfig& kc,
                                         Rng& rng) {
  if (s == "mixed" || s == "random") return kernels::sample_kernel_spec(rng, kc);
  kernels::KernelSpec spec;
  spec.size = kc.size;
  double sigma = 0, s2 = 0, deg = 0;
  if (std::sscanf(s.c_str(), "iso:%lf", &sigma) == 1) {
    spec.sigma1 = spec.sigma2 = sigma;
    spec.theta = 0.0;
    return spec;
  }
  if (std::sscanf(s.c_str(), "aniso:%lf,%lf,%lf", &sigma, &s2, &deg) == 3) {
    spec.sigma1 = sigma;
    spec.sigma2 = s2;
    spec.theta = deg * M_PI / 180.0;
    return spec;
  }
  throw std::invalid_argument("degrade.kernel must be 'mixed', 'iso:S', or 'aniso:S1,S2,DEG': " + s);
}

// Training task distribution shared by estimator pretraining and the meta
// loop: kernels and downsample mode follow the degrade section, where mode
// "both" alternates randomly between direct decimation and bicubic-after-blur
// so one model covers every evaluation protocol.
std::function<degrade::TaskTriple<float>(Rng&)> training_task_sampler(const cfg::Config& c,
                                                                      data::WindowSampler& sampler) {
  const auto kc = c.kernel_config();
  const int scale = c.scale();
  const std::string kernel_setting = c.str("degrade", "kernel");
  const std::string mode_setting = c.str("degrade", "mode");
  if (mode_setting != "both") degrade::parse_mode(mode_setting);  // fail fast on typos
  return [&sampler, kc, scale, kernel_setting, mode_setting](Rng& rng) {
    const FrameSequence<double> hr = sampler.sample(rng);
    const auto spec = parse_kernel_setting(kernel_setting, kc, rng);
    const auto mode = mode_setting == "both"
                          ? (rng.uniform() < 0.5 ? degrade::DownsampleMode::kDirect
                                                 : degrade::DownsampleMode::kBicubicAfterBlur)
                          : degrade::parse_mode(mode_setting);
    return degrade::make_training_triple(hr, spec, scale, mode);
  };
}

// Loads the HR sequences used for benchmarking, truncated to a frame budget.
std::vector<FrameSequence<double>> load_eval_sequences(const std::string& root, int count, int frames,
                                                       int scale) {
  const auto manifest = data::scan_dataset(root, frames, scale * scale);
  std::vector<FrameSequence<double>> out;
  const int n = std::min<int>(count, static_cast<int>(manifest.entries.size()));
  for (int i = 0; i < n; ++i) {
    FrameSequence<double> seq = io::read_sequence(manifest.entries[i].dir, Tier::kHr, scale);
    if (seq.length() > frames) seq.frames.resize(frames);
    out.push_back(std::move(seq));
  }
  return out;
}

int cmd_degrade(const cfg::Config& c) {
  const std::string input = c.str("degrade", "input_root");
  const std::string output = c.str("degrade", "output_root");
  if (input.empty() || output.empty())
    throw std::invalid_argument("degrade needs degrade.input_root and degrade.output_root");
  const auto mode = degrade::parse_mode(c.str("degrade", "mode"));
  const auto kc = c.kernel_config();
  const auto manifest = data::scan_dataset(input, 1, 1);
  for (const auto& e : manifest.entries) {
    Rng rng = Rng::substream(c.seed(), "degrade/" + e.id);
    const kernels::KernelSpec spec = parse_kernel_setting(c.str("degrade", "kernel"), kc, rng);
    const FrameSequence<double> hr = io::read_sequence(e.dir, Tier::kHr, c.scale());
    const auto triple = degrade::make_task_triple(hr, spec, c.scale(), mode);
    data::write_triple((fs::path(output) / e.id).string(), triple);
    std::printf("%s: %d frames, kernel sigma=(%.3f, %.3f) theta=%.3f, mode=%s\n", e.id.c_str(),
                hr.length(), spec.sigma1, spec.sigma2, spec.theta, degrade::mode_name(triple.mode));
  }
  return 0;
}

int cmd_pretrain_mfdn(const cfg::Config& c, bool single_frame) {
  const mfdn::Mfdn est(c.mfdn_arch());
  const int frames = c.num("data", "frames_per_sample");
  const int patch = c.num("pretrain", "patch_size");
  data::WindowSampler sampler(data::scan_dataset(train_root(c), frames, patch));

  mfdn::PretrainConfig pc;
  pc.steps = c.num("pretrain", "steps");
  pc.batch = c.num("pretrain", "batch");
  pc.lr = c.fnum("pretrain", "lr");
  pc.seed = c.seed();
  pc.single_frame = single_frame;
  const auto res = mfdn::pretrain_mfdn(est, training_task_sampler(c, sampler), pc);

  fs::create_directories(c.str("run", "out_dir"));
  ckpt::Checkpoint out;
  out.fingerprint = c.fingerprint();
  ckpt::add_params(out, "mfdn", est.layout(), res.phi);
  ckpt::save_checkpoint(out, mfdn_ckpt_path(c));
  std::printf("pretrained estimator: %ld steps, loss %.6f -> %.6f, saved %s\n", pc.steps,
              res.loss_curve.front(), res.loss_curve.back(), mfdn_ckpt_path(c).c_str());
  return 0;
}

int cmd_meta_train(const cfg::Config& c, bool force) {
  const mfdn::Mfdn est(c.mfdn_arch());
  const auto backbone = vsr::make_backbone<float>(c.backbone_config());
  const auto mc = c.meta_config();
  const int frames = c.num("data", "frames_per_sample");
  if (frames != backbone->window_frames())
    throw std::invalid_argument("data.frames_per_sample must equal the backbone frame window (" +
                                std::to_string(backbone->window_frames()) + ")");
  const int patch = c.num("data", "patch_size");
  data::WindowSampler sampler(data::scan_dataset(train_root(c), frames, patch));
  const std::string out_dir = c.str("run", "out_dir");
  fs::create_directories(out_dir);

  const std::string mfdn_ck = mfdn_ckpt_path(c);
  if (!fs::exists(mfdn_ck))
    throw std::runtime_error("missing estimator checkpoint " + mfdn_ck + "; run pretrain-mfdn first");
  const std::string meta_ck = meta_ckpt_path(c);
  const std::string vsr_ck = vsr_ckpt_path(c);
  const std::string log_path = (fs::path(out_dir) / "meta_train_log.jsonl").string();

  meta::MetaTrainState<float> st;
  Rng task_rng = Rng::substream(c.seed(), "meta/tasks");
  bool resumed = false;
  if (fs::exists(meta_ck)) {
    const auto loaded = ckpt::load_checkpoint(meta_ck, c.fingerprint(), force);
    st = ckpt::get_meta_state(loaded, est.layout(), backbone->layout());
    task_rng.load_state(loaded.get_raw("rng/task"));
    resumed = true;
    std::printf("resuming from %s at iteration %ld\n", meta_ck.c_str(), st.iter);
  } else {
    st.phi = ckpt::get_params(ckpt::load_checkpoint(mfdn_ck, c.fingerprint(), force), "mfdn", est.layout());
    if (fs::exists(vsr_ck)) {
      st.theta = ckpt::get_params(ckpt::load_checkpoint(vsr_ck, c.fingerprint(), force), "vsr",
                                backbone->layout());
    } else {
      // Warm-start the backbone on blur-free bicubic pairs; this model is
      // also the fixed reference system for benchmarking.
      vsr::BackbonePretrainConfig bp;
      bp.steps = c.num("vsr_pretrain", "steps");
      bp.batch = c.num("vsr_pretrain", "batch");
      bp.lr = c.fnum("vsr_pretrain", "lr");
      bp.seed = c.seed();
      auto sample_hr = [&](Rng& rng) { return cast_sequence<float>(sampler.sample(rng)); };
      const auto warm = vsr::pretrain_backbone(*backbone, sample_hr, bp);
      st.theta = warm.theta;
      ckpt::Checkpoint base;
      base.fingerprint = c.fingerprint();
      ckpt::add_params(base, "vsr", backbone->layout(), warm.theta);
      ckpt::save_checkpoint(base, vsr_ck);
      std::printf("warm-started backbone: %ld steps, loss %.6f -> %.6f, saved %s\n", bp.steps,
                  warm.loss_curve.front(), warm.loss_curve.back(), vsr_ck.c_str());
    }
    st.reset_optimizers();
  }

  std::ofstream log(log_path, resumed ? std::ios::app : std::ios::trunc);
  if (!log) throw std::runtime_error("cannot open " + log_path);
  const std::function<degrade::TaskTriple<float>(Rng&)> sample = training_task_sampler(c, sampler);
  auto save_state = [&](long) {
    ckpt::Checkpoint out;
    out.fingerprint = c.fingerprint();
    ckpt::add_meta_state(out, st, est.layout(), backbone->layout());
    out.add_raw("rng/task", task_rng.save_state());
    ckpt::save_checkpoint(out, meta_ck);
  };
  meta::MetaTrainHooks hooks;
  hooks.checkpoint_every = c.num("run", "checkpoint_every");
  hooks.on_checkpoint = save_state;
  hooks.on_metrics = [&](long iter, const meta::OuterMetrics& m) {
    json line;
    line["iter"] = iter;
    line["loss_in_lr"] = m.loss_in_lr;
    line["loss_in_slr"] = m.loss_in_slr;
    line["loss_out_hr"] = m.loss_out_hr;
    line["loss_out_slr"] = m.loss_out_slr;
    line["beta"] = m.beta_used;
    log << line.dump() << "\n";
  };
  meta::meta_train(est, *backbone, st, sample, task_rng, mc, hooks);
  log.flush();
  save_state(st.iter);
  std::printf("meta-training done at iteration %ld, saved %s\n", st.iter, meta_ck.c_str());
  return 0;
}

struct LoadedModels {
  mfdn::Mfdn est;
  std::unique_ptr<vsr::Backbone<float>> backbone;
  bench::EvalModels models;
};

LoadedModels load_models(const cfg::Config& c, bool force, bool need_baseline) {
  LoadedModels lm{mfdn::Mfdn(c.mfdn_arch()), vsr::make_backbone<float>(c.backbone_config()), {}};
  const std::string mfdn_ck = mfdn_ckpt_path(c), meta_ck = meta_ckpt_path(c);
  if (!fs::exists(mfdn_ck))
    throw std::runtime_error("missing estimator checkpoint " + mfdn_ck + "; run pretrain-mfdn first");
  if (!fs::exists(meta_ck))
    throw std::runtime_error("missing meta checkpoint " + meta_ck + "; run meta-train first");
  lm.models.phi_pretrained =
      ckpt::get_params(ckpt::load_checkpoint(mfdn_ck, c.fingerprint(), force), "mfdn", lm.est.layout());
  const auto st = ckpt::get_meta_state(ckpt::load_checkpoint(meta_ck, c.fingerprint(), force),
                                     lm.est.layout(), lm.backbone->layout());
  lm.models.phi = st.phi;
  lm.models.theta = st.theta;
  if (need_baseline) {
    const std::string vsr_ck = vsr_ckpt_path(c);
    if (!fs::exists(vsr_ck))
      throw std::runtime_error("missing reference checkpoint " + vsr_ck + "; run meta-train first");
    lm.models.theta = ckpt::get_params(ckpt::load_checkpoint(vsr_ck, c.fingerprint(), force), "vsr",
                                     lm.backbone->layout());
  }
  lm.models.est = &lm.est;
  lm.models.backbone = lm.backbone.get();
  return lm;
}

int cmd_adapt(const cfg::Config& c, bool force) {
  const std::string input = c.str("adapt", "input_dir");
  const std::string output = c.str("adapt", "output_dir");
  if (input.empty() || output.empty())
    throw std::invalid_argument("adapt needs adapt.input_dir and adapt.output_dir");
  LoadedModels lm = load_models(c, force, false);
  bench::EvalModels& m = lm.models;
  const FrameSequence<float> lr =
      cast_sequence<float>(io::read_sequence(input, Tier::kLr, c.scale()));
  const auto res = meta::meta_test_adapt(lm.est, m.phi_pretrained, m.phi, *lm.backbone, m.theta, lr,
                                         c.meta_config());
  io::write_sequence(output, cast_sequence<double>(clamp01(res.sr)));
  json summary;
  summary["frames"] = res.sr.length();
  summary["inner_loss_lr"] = res.adaptation.inner_loss_lr;
  summary["inner_loss_slr"] = res.adaptation.inner_loss_slr;
  summary["updates"] = res.adaptation.steps_run;
  summary["time_preprocess_s"] = res.adaptation.wall_time_preprocess_s;
  summary["time_sr_s"] = res.wall_time_sr_s;
  std::printf("%s\n", summary.dump().c_str());
  return 0;
}

int cmd_eval(const cfg::Config& c, bool force, bool sweep) {
  LoadedModels adapted = load_models(c, force, false);
  LoadedModels baseline = load_models(c, force, true);
  const int frames = c.num("eval", "frames");
  const std::string root = val_root(c);
  const auto iso_hr = load_eval_sequences(root, c.num("eval", "iso_sequences"), frames, c.scale());
  const auto aniso_hr = load_eval_sequences(root, c.num("eval", "aniso_sequences"), frames, c.scale());
  const auto mixed_hr = load_eval_sequences(root, c.num("eval", "mixed_sequences"), frames, c.scale());

  bench::EvalOptions opt;
  opt.meta = c.meta_config();
  opt.kernel_cfg = c.kernel_config();
  opt.scale = c.scale();
  opt.crop_border = c.eval_crop_border();
  opt.luma_only = c.flag("eval", "luma_only");
  opt.workers = c.workers();
  opt.seed = c.seed();
  opt.fingerprint = c.fingerprint();

  const std::string out_dir = c.str("run", "out_dir");
  fs::create_directories(out_dir);
  std::vector<bench::EvalReport> base_reports, adapt_reports;
  const std::vector<std::pair<bench::Protocol, const std::vector<FrameSequence<double>>*>> protocols = {
      {bench::Protocol::kIsoGaussian8, &iso_hr},
      {bench::Protocol::kAniso4, &aniso_hr},
      {bench::Protocol::kMixed, &mixed_hr},
  };
  for (const auto& [proto, hr] : protocols) {
    opt.adapted = false;
    base_reports.push_back(bench::run_protocol(baseline.models, *hr, proto, opt));
    opt.adapted = true;
    adapt_reports.push_back(bench::run_protocol(adapted.models, *hr, proto, opt));
    for (const auto* rep : {&base_reports.back(), &adapt_reports.back()}) {
      const std::string path =
          (fs::path(out_dir) / (std::string(bench::protocol_name(proto)) + "_" + rep->system + ".jsonl"))
              .string();
      bench::write_report_jsonl(*rep, path);
    }
  }
  std::printf("%s", bench::render_comparison_table(base_reports, adapt_reports).c_str());

  if (sweep) {
    for (const auto& v : c.raw().at("eval").at("inner_steps_sweep")) {
      opt.meta.inner_steps = v.get<int>();
      opt.adapted = true;
      const auto rep = bench::run_protocol(adapted.models, mixed_hr, bench::Protocol::kMixed, opt);
      std::printf("inner_steps=%d: mixed %.2f dB, %.2f s preprocessing per frame\n",
                  opt.meta.inner_steps, rep.mean_psnr, rep.mean_preprocess_s);
    }
  }
  return 0;
}

int cmd_profile(const cfg::Config& c, bool force) {
  const int h = c.num("profile", "height"), w = c.num("profile", "width");
  const int frames = std::max(c.num("profile", "frames"),
                              2 * c.backbone_config().window_radius + 1);
  const mfdn::Mfdn est(c.mfdn_arch());
  const auto backbone = vsr::make_backbone<float>(c.backbone_config());
  ad::Tensor<float> phi_pre, phi, theta;
  if (fs::exists(mfdn_ckpt_path(c)) && fs::exists(meta_ckpt_path(c))) {
    LoadedModels lm = load_models(c, force, false);
    phi_pre = lm.models.phi_pretrained;
    phi = lm.models.phi;
    theta = lm.models.theta;
  } else {
    Rng r1 = Rng::substream(c.seed(), "profile/phi"), r2 = Rng::substream(c.seed(), "profile/theta");
    phi_pre = est.init_params<float>(r1);
    phi = phi_pre;
    theta = backbone->init_params(r2);
  }
  synth::SceneConfig sc;
  sc.frames = frames;
  sc.height = h;
  sc.width = w;
  Rng rng = Rng::substream(c.seed(), "profile/scene");
  FrameSequence<float> lr = cast_sequence<float>(synth::make_sequence(rng, sc));
  lr.tier = Tier::kLr;
  lr.scale_factor = c.scale();
  const auto res = meta::meta_test_adapt(est, phi_pre, phi, *backbone, theta, lr, c.meta_config());
  json out;
  out["input"] = {{"height", h}, {"width", w}, {"frames", frames}};
  out["time_preprocess_s"] = res.adaptation.wall_time_preprocess_s;
  out["time_sr_s"] = res.wall_time_sr_s;
  out["time_sr_s_per_frame"] = res.wall_time_sr_s / frames;
  out["time_total_s"] = res.adaptation.wall_time_preprocess_s + res.wall_time_sr_s;
  std::printf("%s\n", out.dump(2).c_str());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"blind video super-resolution with test-time adaptation"};
  app.require_subcommand(1);
  GlobalOpts g;
  app.add_option("--config", g.config_path, "JSON configuration file");
  app.add_option("--override", g.overrides, "config override key.path=value (repeatable)");
  app.add_option("--seed", g.seed, "override the base RNG seed");
  app.add_option("--workers", g.workers, "override the worker thread count");
  app.add_flag("--luma-only", g.luma_only, "score PSNR on the luma channel");
  app.add_flag("--force", g.force, "ignore checkpoint fingerprint mismatches");

  auto* degrade_cmd = app.add_subcommand("degrade", "write (HR, LR, SLR) triples for a dataset");
  auto* pretrain_cmd = app.add_subcommand("pretrain-mfdn", "pretrain the downscaling estimator");
  bool single_frame = false;
  pretrain_cmd->add_flag("--single-frame", single_frame, "train the per-frame estimator variant");
  auto* meta_cmd = app.add_subcommand("meta-train", "meta-train estimator and backbone");
  auto* adapt_cmd = app.add_subcommand("adapt", "adapt to one clip and upscale it");
  auto* eval_cmd = app.add_subcommand("eval", "benchmark reference vs adapted models");
  bool sweep = false;
  eval_cmd->add_flag("--sweep", sweep, "additionally sweep the adaptation step count");
  auto* profile_cmd = app.add_subcommand("profile", "time adaptation and upscaling on synthetic input");
  for (auto* sub : {degrade_cmd, pretrain_cmd, meta_cmd, adapt_cmd, eval_cmd, profile_cmd})
    sub->fallthrough();

  CLI11_PARSE(app, argc, argv);
  try {
    const cfg::Config c = load_config(g);
    if (degrade_cmd->parsed()) return cmd_degrade(c);
    if (pretrain_cmd->parsed()) return cmd_pretrain_mfdn(c, single_frame);
    if (meta_cmd->parsed()) return cmd_meta_train(c, g.force);
    if (adapt_cmd->parsed()) return cmd_adapt(c, g.force);
    if (eval_cmd->parsed()) return cmd_eval(c, g.force, sweep);
    if (profile_cmd->parsed()) return cmd_profile(c, g.force);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
