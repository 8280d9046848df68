// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <limits>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "dynavsr/degrade.hpp"
#include "dynavsr/image.hpp"
#include "dynavsr/kernels.hpp"
#include "dynavsr/metaloop.hpp"
#include "dynavsr/metrics.hpp"
#include "dynavsr/mfdn.hpp"
#include "dynavsr/rng.hpp"
#include "dynavsr/stopwatch.hpp"
#include "dynavsr/vsr.hpp"

namespace dynavsr::bench {

enum class Protocol { kIsoGaussian8, kAniso4, kMixed };

inline const char* protocol_name(Protocol p) {
  switch (p) {
    case Protocol::kIsoGaussian8: return "iso_gaussian8";
    case Protocol::kAniso4: return "aniso4";
    case Protocol::kMixed: return "mixed";
  }
  return "?";
}

struct EvalRow {
  std::string sequence_id;
  std::string kernel_id;
  double psnr_db = 0.0;
  double ssim = 0.0;
  double time_preprocess_s = 0.0;
  double time_sr_s = 0.0;
  double time_total_s = 0.0;
  int adapt_events = 0;  // gradient updates spent on this sequence
};

struct EvalReport {
  std::string protocol;
  std::string system;  // "baseline" or "adapted"
  std::string fingerprint;
  std::vector<EvalRow> rows;
  double mean_psnr = 0.0, mean_ssim = 0.0;
  double mean_preprocess_s = 0.0, mean_sr_s = 0.0, mean_total_s = 0.0;
  int frames_evaluated = 0;
};

struct EvalModels {
  const mfdn::Mfdn* est = nullptr;
  const vsr::Backbone<float>* backbone = nullptr;
  ad::Tensor<float> phi_pretrained;  // pseudo-ground-truth source, frozen
  ad::Tensor<float> phi;             // adaptation start
  ad::Tensor<float> theta;           // backbone parameters
};

struct EvalOptions {
  bool adapted = true;
  meta::MetaConfig meta;
  kernels::KernelSamplingConfig kernel_cfg;
  int scale = 2;
  int crop_border = 2;
  bool luma_only = false;
  int workers = 1;
  uint64_t seed = 0;
  std::string fingerprint;
};

inline void parallel_for(int n, int workers, const std::function<void(int)>& fn) {
  workers = std::max(1, std::min(workers, n));
  if (workers == 1) {
    for (int i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<int> next{0};
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (int w = 0; w < workers; ++w)
    pool.emplace_back([&] {
      for (int i = next.fetch_add(1); i < n; i = next.fetch_add(1)) fn(i);
    });
  for (auto& t : pool) t.join();
}

// Mean per-frame PSNR after symmetric border cropping.
inline double sequence_psnr(const FrameSequence<double>& pred, const FrameSequence<double>& gt,
                            int crop, bool luma_only) {
  if (pred.length() != gt.length()) throw std::invalid_argument("sequence_psnr: length mismatch");
  double acc = 0.0;
  for (int t = 0; t < pred.length(); ++t) {
    const Image<double> a = crop_border(pred.frames[t], crop);
    const Image<double> b = crop_border(gt.frames[t], crop);
    const double v = luma_only ? metrics::psnr_luma(a, b) : metrics::psnr(a, b);
    if (std::isinf(v)) return v;
    acc += v;
  }
  return acc / pred.length();
}

inline double sequence_ssim(const FrameSequence<double>& pred, const FrameSequence<double>& gt,
                            int crop) {
  double acc = 0.0;
  for (int t = 0; t < pred.length(); ++t)
    acc += metrics::ssim(crop_border(pred.frames[t], crop), crop_border(gt.frames[t], crop));
  return acc / pred.length();
}

namespace detail {

struct Job {
  int seq_index = 0;
  kernels::KernelSpec spec;
  degrade::DownsampleMode mode = degrade::DownsampleMode::kDirect;
  std::string kernel_id;
};

inline std::vector<Job> protocol_jobs(Protocol p, int n_sequences, const EvalOptions& opt) {
  std::vector<Job> jobs;
  char label[64];
  for (int s = 0; s < n_sequences; ++s) {
    switch (p) {
      case Protocol::kIsoGaussian8:
        for (const auto& spec : kernels::gaussian8_specs(opt.kernel_cfg.size)) {
          std::snprintf(label, sizeof(label), "iso_sigma%.1f", spec.sigma1);
          jobs.push_back({s, spec, degrade::DownsampleMode::kBicubicAfterBlur, label});
        }
        break;
      case Protocol::kAniso4:
        for (size_t i = 0; i < 4; ++i) {
          const auto specs = kernels::aniso4_specs(opt.kernel_cfg.size);
          std::snprintf(label, sizeof(label), "aniso_theta%d", static_cast<int>(i) * 45);
          jobs.push_back({s, specs[i], degrade::DownsampleMode::kBicubicAfterBlur, label});
        }
        break;
      case Protocol::kMixed: {
        Rng rng = Rng::substream(opt.seed, "eval/mixed/" + std::to_string(s));
        jobs.push_back({s, kernels::sample_kernel_spec(rng, opt.kernel_cfg),
                        degrade::DownsampleMode::kDirect, "mixed"});
        break;
      }
    }
  }
  return jobs;
}

}  // namespace detail

// Scores one system (baseline or adapted) over every (sequence, kernel)
// pair of a protocol. Rows are deterministic in content and order; only the
// wall-clock columns vary between runs.
inline EvalReport run_protocol(const EvalModels& models, const std::vector<FrameSequence<double>>& hr,
                               Protocol protocol, const EvalOptions& opt) {
  if (hr.empty()) throw std::invalid_argument("run_protocol: no sequences");
  if (!models.est || !models.backbone) throw std::invalid_argument("run_protocol: models not set");
  const auto jobs = detail::protocol_jobs(protocol, static_cast<int>(hr.size()), opt);
  EvalReport report;
  report.protocol = protocol_name(protocol);
  report.system = opt.adapted ? "adapted" : "baseline";
  report.fingerprint = opt.fingerprint;
  report.rows.resize(jobs.size());

  std::atomic<int> frames{0};
  parallel_for(static_cast<int>(jobs.size()), opt.workers, [&](int ji) {
    const auto& job = jobs[ji];
    const FrameSequence<double>& hr_seq = hr[job.seq_index];
    const kernels::Kernel k = kernels::synth_kernel(job.spec);
    const FrameSequence<double> lr64 = degrade::blur_downsample(hr_seq, k, opt.scale, job.mode);
    const FrameSequence<float> lr = cast_sequence<float>(lr64);

    EvalRow row;
    row.sequence_id = "seq" + std::to_string(job.seq_index);
    row.kernel_id = job.kernel_id;
    FrameSequence<float> sr;
    if (opt.adapted) {
      const auto res = meta::meta_test_adapt(*models.est, models.phi_pretrained, models.phi,
                                             *models.backbone, models.theta, lr, opt.meta);
      sr = res.sr;
      row.time_preprocess_s = res.adaptation.wall_time_preprocess_s;
      row.time_sr_s = res.wall_time_sr_s;
      row.adapt_events = res.adaptation.backward_passes;
    } else {
      Stopwatch sw;
      sr = vsr::sliding_window_sr(*models.backbone, models.theta, lr);
      row.time_sr_s = sw.seconds();
    }
    row.time_total_s = row.time_preprocess_s + row.time_sr_s;
    const FrameSequence<double> sr64 = cast_sequence<double>(sr);
    row.psnr_db = sequence_psnr(sr64, hr_seq, opt.crop_border, opt.luma_only);
    row.ssim = sequence_ssim(sr64, hr_seq, opt.crop_border);
    frames += sr64.length();
    report.rows[ji] = std::move(row);
  });

  double psnr = 0.0, ssim = 0.0, pre = 0.0, srs = 0.0, tot = 0.0;
  for (const auto& r : report.rows) {
    psnr += r.psnr_db;
    ssim += r.ssim;
    pre += r.time_preprocess_s;
    srs += r.time_sr_s;
    tot += r.time_total_s;
  }
  const double n = static_cast<double>(report.rows.size());
  report.mean_psnr = psnr / n;
  report.mean_ssim = ssim / n;
  report.frames_evaluated = frames.load();
  report.mean_preprocess_s = pre / std::max(1, report.frames_evaluated);
  report.mean_sr_s = srs / std::max(1, report.frames_evaluated);
  report.mean_total_s = tot / std::max(1, report.frames_evaluated);
  return report;
}

inline nlohmann::json metric_json(double v) {
  if (std::isinf(v)) return nlohmann::json("inf");
  return nlohmann::json(v);
}

// Line-delimited records: one per row, then one summary line.
inline void write_report_jsonl(const EvalReport& report, std::ostream& os) {
  for (const auto& r : report.rows) {
    nlohmann::json j;
    j["protocol"] = report.protocol;
    j["system"] = report.system;
    j["sequence_id"] = r.sequence_id;
    j["kernel_id"] = r.kernel_id;
    j["psnr_db"] = metric_json(r.psnr_db);
    j["ssim"] = r.ssim;
    j["time_preprocess_s"] = r.time_preprocess_s;
    j["time_sr_s"] = r.time_sr_s;
    j["time_total_s"] = r.time_total_s;
    j["adapt_events"] = r.adapt_events;
    os << j.dump() << "\n";
  }
  nlohmann::json sum;
  sum["protocol"] = report.protocol;
  sum["system"] = report.system;
  sum["fingerprint"] = report.fingerprint;
  sum["summary"] = true;
  sum["mean_psnr_db"] = metric_json(report.mean_psnr);
  sum["mean_ssim"] = report.mean_ssim;
  sum["mean_preprocess_s_per_frame"] = report.mean_preprocess_s;
  sum["mean_sr_s_per_frame"] = report.mean_sr_s;
  sum["mean_total_s_per_frame"] = report.mean_total_s;
  os << sum.dump() << "\n";
}

inline void write_report_jsonl(const EvalReport& report, const std::string& path) {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw std::runtime_error("cannot write report " + path);
  write_report_jsonl(report, os);
}

namespace detail {

inline std::string fmt2(double v) {
  if (std::isinf(v)) return "inf";
  char b[32];
  std::snprintf(b, sizeof(b), "%.2f", v);
  return b;
}

}  // namespace detail

// Plain-text comparison: PSNR per protocol plus per-frame timing, one row
// per system and a gain row (timing cells blank there).
inline std::string render_comparison_table(const std::vector<EvalReport>& baseline,
                                           const std::vector<EvalReport>& adapted) {
  if (baseline.size() != 3 || adapted.size() != 3)
    throw std::invalid_argument("render_comparison_table: expected 3 protocols per system");
  auto timing = [](const std::vector<EvalReport>& rs) {
    double pre = 0, sr = 0, tot = 0;
    for (const auto& r : rs) {
      pre += r.mean_preprocess_s;
      sr += r.mean_sr_s;
      tot += r.mean_total_s;
    }
    return std::array<double, 3>{pre / 3, sr / 3, tot / 3};
  };
  const auto tb = timing(baseline), ta = timing(adapted);
  char line[256];
  std::string out;
  out += "method        iso(dB)  aniso(dB)  mixed(dB)  prep(s)  sr(s)  total(s)\n";
  std::snprintf(line, sizeof(line), "%-13s %7s  %9s  %9s  %7s  %5s  %8s\n", "baseline",
                detail::fmt2(baseline[0].mean_psnr).c_str(), detail::fmt2(baseline[1].mean_psnr).c_str(),
                detail::fmt2(baseline[2].mean_psnr).c_str(), detail::fmt2(tb[0]).c_str(),
                detail::fmt2(tb[1]).c_str(), detail::fmt2(tb[2]).c_str());
  out += line;
  std::snprintf(line, sizeof(line), "%-13s %7s  %9s  %9s  %7s  %5s  %8s\n", "adapted",
                detail::fmt2(adapted[0].mean_psnr).c_str(), detail::fmt2(adapted[1].mean_psnr).c_str(),
                detail::fmt2(adapted[2].mean_psnr).c_str(), detail::fmt2(ta[0]).c_str(),
                detail::fmt2(ta[1]).c_str(), detail::fmt2(ta[2]).c_str());
  out += line;
  std::snprintf(line, sizeof(line), "%-13s %7s  %9s  %9s  %7s  %5s  %8s\n", "psnr gain",
                detail::fmt2(adapted[0].mean_psnr - baseline[0].mean_psnr).c_str(),
                detail::fmt2(adapted[1].mean_psnr - baseline[1].mean_psnr).c_str(),
                detail::fmt2(adapted[2].mean_psnr - baseline[2].mean_psnr).c_str(), "-", "-", "-");
  out += line;
  return out;
}

}  // namespace dynavsr::bench
