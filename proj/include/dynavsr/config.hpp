// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "dynavsr/hashing.hpp"
#include "dynavsr/kernels.hpp"
#include "dynavsr/metaloop.hpp"
#include "dynavsr/mfdn.hpp"
#include "dynavsr/nn.hpp"
#include "dynavsr/vsr.hpp"

namespace dynavsr::cfg {

using nlohmann::json;

// Schema-by-example: every known key appears here with its default; loading
// rejects unknown keys and type mismatches against this tree.
inline const json& default_config() {
  static const json j = {
      {"seed", 0},
      {"scale", 2},
      {"workers", 1},
      {"data",
       {{"root", "data"},
        {"train_dir", "train"},
        {"val_dir", "val"},
        {"patch_size", 64},
        {"frames_per_sample", 5}}},
      {"kernel", {{"size", 13}, {"sigma_min", 0.2}, {"sigma_max", 2.0}}},
      {"mfdn", {{"width", 32}, {"spatial_kernel", 3}}},
      {"backbone",
       {{"name", "tiny"},
        {"window_radius", 2},
        {"width", 32},
        {"loss", "charbonnier"},
        {"charbonnier_eps", 1e-3},
        {"huber_delta", 1e-2}}},
      {"pretrain", {{"steps", 1500}, {"batch", 8}, {"lr", 1e-4}, {"patch_size", 48}}},
      {"vsr_pretrain", {{"steps", 1200}, {"batch", 8}, {"lr", 1e-4}}},
      {"meta",
       {{"alpha", 1e-5},
        {"beta", 1e-5},
        {"inner_steps", 1},
        {"meta_batch", 4},
        {"total_iters", 30000},
        {"second_order", true},
        {"beta_decay_factor", 5.0},
        {"beta_decay_milestones", json::array({20000, 25000})}}},
      {"eval",
       {{"crop_border", -1},  // -1 means: use the scale factor
        {"luma_only", false},
        {"iso_sequences", 4},
        {"aniso_sequences", 4},
        {"mixed_sequences", 20},
        {"frames", 7},
        {"inner_steps_sweep", json::array({1, 3, 5})}}},
      {"degrade",
       {{"input_root", ""}, {"output_root", ""}, {"mode", "direct"}, {"kernel", "mixed"}}},
      {"adapt", {{"input_dir", ""}, {"output_dir", ""}}},
      {"profile", {{"height", 180}, {"width", 320}, {"frames", 5}}},
      {"run",
       {{"out_dir", "runs/default"},
        {"checkpoint_every", 100},
        {"mfdn_checkpoint", ""},
        {"vsr_checkpoint", ""},
        {"meta_checkpoint", ""}}},
  };
  return j;
}

namespace detail {

inline void validate_against(const json& value, const json& schema, const std::string& path) {
  if (schema.is_object()) {
    if (!value.is_object())
      throw std::invalid_argument("config: " + (path.empty() ? "root" : path) + " must be an object");
    for (auto it = value.begin(); it != value.end(); ++it) {
      const std::string child = path.empty() ? it.key() : path + "." + it.key();
      if (!schema.contains(it.key())) throw std::invalid_argument("config: unknown key " + child);
      validate_against(it.value(), schema.at(it.key()), child);
    }
    return;
  }
  if (schema.is_array()) {
    if (!value.is_array()) throw std::invalid_argument("config: " + path + " must be an array");
    for (size_t i = 0; i < value.size(); ++i)
      if (!value[i].is_number())
        throw std::invalid_argument("config: " + path + " must contain numbers only");
    return;
  }
  if (schema.is_boolean() != value.is_boolean() || schema.is_string() != value.is_string() ||
      (schema.is_number() && !value.is_number()))
    throw std::invalid_argument("config: " + path + " has the wrong type");
}

inline void merge_defaults(json& value, const json& defaults) {
  for (auto it = defaults.begin(); it != defaults.end(); ++it) {
    if (!value.contains(it.key())) {
      value[it.key()] = it.value();
    } else if (it.value().is_object()) {
      merge_defaults(value[it.key()], it.value());
    }
  }
}

}  // namespace detail

class Config {
 public:
  Config() : j_(default_config()) {}

  static Config from_json(json j) {
    detail::validate_against(j, default_config(), "");
    detail::merge_defaults(j, default_config());
    Config c;
    c.j_ = std::move(j);
    c.check_ranges();
    return c;
  }

  static Config load(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw std::runtime_error("cannot open config " + path);
    json j;
    try {
      is >> j;
    } catch (const json::parse_error& e) {
      throw std::runtime_error(path + ": " + e.what());
    }
    return from_json(std::move(j));
  }

  // "a.b.c=value"; the value is parsed as JSON when possible, else taken as
  // a literal string.
  void apply_override(const std::string& kv) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos || eq == 0)
      throw std::invalid_argument("override must look like key.path=value: " + kv);
    const std::string path = kv.substr(0, eq);
    const std::string raw = kv.substr(eq + 1);
    json value;
    try {
      value = json::parse(raw);
    } catch (const json::parse_error&) {
      value = raw;
    }
    json* node = &j_;
    size_t start = 0;
    std::vector<std::string> parts;
    while (true) {
      const auto dot = path.find('.', start);
      parts.push_back(path.substr(start, dot == std::string::npos ? dot : dot - start));
      if (dot == std::string::npos) break;
      start = dot + 1;
    }
    for (size_t i = 0; i + 1 < parts.size(); ++i) {
      if (!node->contains(parts[i])) throw std::invalid_argument("override: unknown key " + path);
      node = &(*node)[parts[i]];
    }
    (*node)[parts.back()] = value;
    detail::validate_against(j_, default_config(), "");
    check_ranges();
  }

  const json& raw() const { return j_; }

  // Hash of the canonicalized model-relevant subtree (architecture, scale,
  // kernel family). Run-local keys like paths and schedules do not affect
  // it, so evaluation configs can load training checkpoints.
  std::string fingerprint() const {
    json sub;
    sub["scale"] = j_.at("scale");
    sub["mfdn"] = j_.at("mfdn");
    sub["backbone"] = j_.at("backbone");
    sub["kernel"] = j_.at("kernel");
    return to_hex64(fnv1a64(sub.dump()));
  }

  uint64_t seed() const { return j_.at("seed").get<uint64_t>(); }
  int scale() const { return j_.at("scale").get<int>(); }
  int workers() const { return j_.at("workers").get<int>(); }

  mfdn::MfdnArch mfdn_arch() const {
    mfdn::MfdnArch a;
    a.width = j_.at("mfdn").at("width").get<int>();
    a.spatial_kernel = j_.at("mfdn").at("spatial_kernel").get<int>();
    return a;
  }

  vsr::BackboneConfig backbone_config() const {
    const json& b = j_.at("backbone");
    vsr::BackboneConfig c;
    c.name = b.at("name").get<std::string>();
    c.window_radius = b.at("window_radius").get<int>();
    c.scale = scale();
    c.width = b.at("width").get<int>();
    c.loss = nn::parse_loss(b.at("loss").get<std::string>());
    c.charbonnier_eps = b.at("charbonnier_eps").get<double>();
    c.huber_delta = b.at("huber_delta").get<double>();
    return c;
  }

  meta::MetaConfig meta_config() const {
    const json& m = j_.at("meta");
    meta::MetaConfig c;
    c.alpha = m.at("alpha").get<double>();
    c.beta = m.at("beta").get<double>();
    c.inner_steps = m.at("inner_steps").get<int>();
    c.meta_batch = m.at("meta_batch").get<int>();
    c.total_iters = m.at("total_iters").get<long>();
    c.second_order = m.at("second_order").get<bool>();
    c.beta_decay.factor = m.at("beta_decay_factor").get<double>();
    c.beta_decay.milestones.clear();
    for (const auto& v : m.at("beta_decay_milestones")) c.beta_decay.milestones.push_back(v.get<long>());
    return c;
  }

  kernels::KernelSamplingConfig kernel_config() const {
    const json& k = j_.at("kernel");
    kernels::KernelSamplingConfig c;
    c.size = k.at("size").get<int>();
    c.sigma_min = k.at("sigma_min").get<double>();
    c.sigma_max = k.at("sigma_max").get<double>();
    return c;
  }

  int eval_crop_border() const {
    const int b = j_.at("eval").at("crop_border").get<int>();
    return b < 0 ? scale() : b;
  }

  std::string str(const std::string& section, const std::string& key) const {
    return j_.at(section).at(key).get<std::string>();
  }
  int num(const std::string& section, const std::string& key) const {
    return j_.at(section).at(key).get<int>();
  }
  double fnum(const std::string& section, const std::string& key) const {
    return j_.at(section).at(key).get<double>();
  }
  bool flag(const std::string& section, const std::string& key) const {
    return j_.at(section).at(key).get<bool>();
  }

  void set(const std::string& section, const std::string& key, const json& v) { j_[section][key] = v; }

 private:
  json j_;

  void check_ranges() const {
    if (scale() < 1) throw std::invalid_argument("config: scale must be >= 1");
    if (j_.at("kernel").at("size").get<int>() % 2 == 0)
      throw std::invalid_argument("config: kernel.size must be odd");
    if (j_.at("backbone").at("window_radius").get<int>() < 0)
      throw std::invalid_argument("config: backbone.window_radius must be >= 0");
    if (j_.at("meta").at("inner_steps").get<int>() < 1)
      throw std::invalid_argument("config: meta.inner_steps must be >= 1");
    if (j_.at("meta").at("meta_batch").get<int>() < 1)
      throw std::invalid_argument("config: meta.meta_batch must be >= 1");
    if (workers() < 1) throw std::invalid_argument("config: workers must be >= 1");
  }
};

}  // namespace dynavsr::cfg
