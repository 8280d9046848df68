// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "dynavsr/degrade.hpp"
#include "dynavsr/image.hpp"
#include "dynavsr/kernels.hpp"
#include "dynavsr/png_io.hpp"
#include "dynavsr/rng.hpp"

namespace dynavsr::data {

struct SequenceEntry {
  std::string id;
  std::string dir;
  int frames = 0;
  int height = 0;
  int width = 0;
  int channels = 0;
};

struct DatasetManifest {
  std::string root;
  int frames_per_sample = 5;
  int patch_size = 64;
  std::vector<SequenceEntry> entries;
};

// Walks a root of per-sequence PNG directories. Entries come back sorted by
// id, and every sequence is validated: uniform frame shape, at least
// frames_per_sample frames, and frames no smaller than the sampling patch.
inline DatasetManifest scan_dataset(const std::string& root, int frames_per_sample, int patch_size) {
  namespace fs = std::filesystem;
  if (!fs::is_directory(root)) throw std::runtime_error("dataset root " + root + " is not a directory");
  DatasetManifest m;
  m.root = root;
  m.frames_per_sample = frames_per_sample;
  m.patch_size = patch_size;
  std::vector<std::string> dirs;
  for (const auto& e : fs::directory_iterator(root))
    if (e.is_directory()) dirs.push_back(e.path().string());
  std::sort(dirs.begin(), dirs.end());
  for (const auto& dir : dirs) {
    const auto files = io::list_pngs(dir);
    if (files.empty()) continue;
    SequenceEntry entry;
    entry.id = fs::path(dir).filename().string();
    entry.dir = dir;
    entry.frames = static_cast<int>(files.size());
    const io::PngInfo first = io::probe_png(files[0]);
    entry.height = first.height;
    entry.width = first.width;
    entry.channels = first.channels;
    for (const auto& f : files) {
      const io::PngInfo info = io::probe_png(f);
      if (info.height != first.height || info.width != first.width || info.channels != first.channels)
        throw std::runtime_error("sequence " + entry.id + " has mixed frame shapes (" + f + ")");
    }
    if (entry.frames < frames_per_sample)
      throw std::runtime_error("sequence " + entry.id + " has " + std::to_string(entry.frames) +
                               " frames, need at least " + std::to_string(frames_per_sample));
    if (entry.height < patch_size || entry.width < patch_size)
      throw std::runtime_error("sequence " + entry.id + " is smaller than the sampling patch");
    m.entries.push_back(std::move(entry));
  }
  if (m.entries.empty()) throw std::runtime_error("dataset root " + root + " contains no sequences");
  return m;
}

// Draws uniformly random training windows: sequence, then temporal start,
// then patch position. Decoded frames are cached; desk-scale datasets fit in
// memory comfortably.
class WindowSampler {
 public:
  explicit WindowSampler(DatasetManifest manifest) : m_(std::move(manifest)) {}

  const DatasetManifest& manifest() const { return m_; }

  FrameSequence<double> sample(Rng& rng) {
    const SequenceEntry& e = m_.entries[rng.uniform_int(static_cast<int>(m_.entries.size()))];
    const int t0 = rng.uniform_int(e.frames - m_.frames_per_sample + 1);
    const int max_y = e.height - m_.patch_size, max_x = e.width - m_.patch_size;
    const int y = max_y > 0 ? rng.uniform_int(max_y + 1) : 0;
    const int x = max_x > 0 ? rng.uniform_int(max_x + 1) : 0;
    FrameSequence<double> out;
    out.tier = Tier::kHr;
    for (int k = 0; k < m_.frames_per_sample; ++k) {
      const Image<double>& full = frame(e, t0 + k);
      Image<double> patch;
      for (const auto& p : full.ch) patch.ch.push_back(p.block(y, x, m_.patch_size, m_.patch_size));
      out.frames.push_back(std::move(patch));
    }
    return out;
  }

 private:
  DatasetManifest m_;
  std::map<std::string, Image<double>> cache_;

  const Image<double>& frame(const SequenceEntry& e, int idx) {
    const std::string key = e.dir + "#" + std::to_string(idx);
    auto it = cache_.find(key);
    if (it != cache_.end()) return it->second;
    const auto files = io::list_pngs(e.dir);
    return cache_.emplace(key, io::read_png(files.at(idx))).first->second;
  }
};

// On-disk layout of one degraded task:
//   <dir>/HR/ LR/ SLR/   frame PNGs
//   <dir>/kernel.txt     kernel spec and weights
//   <dir>/meta.json      downsample mode and scale
inline void write_triple(const std::string& dir, const degrade::TaskTriple<double>& t) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);
  io::write_sequence((fs::path(dir) / "HR").string(), t.hr);
  io::write_sequence((fs::path(dir) / "LR").string(), t.lr);
  io::write_sequence((fs::path(dir) / "SLR").string(), t.slr);
  {
    std::ofstream os(fs::path(dir) / "kernel.txt");
    if (!os) throw std::runtime_error("cannot write kernel file in " + dir);
    os << kernels::serialize_kernel(t.kernel_spec, t.kernel);
  }
  {
    nlohmann::json meta;
    meta["mode"] = degrade::mode_name(t.mode);
    meta["scale"] = t.scale;
    std::ofstream os(fs::path(dir) / "meta.json");
    os << meta.dump(2) << "\n";
  }
}

inline degrade::TaskTriple<double> read_triple(const std::string& dir) {
  namespace fs = std::filesystem;
  degrade::TaskTriple<double> t;
  {
    std::ifstream is(fs::path(dir) / "kernel.txt");
    if (!is) throw std::runtime_error(dir + ": missing kernel.txt");
    std::string text((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());
    auto [spec, k] = kernels::parse_kernel(text);
    t.kernel_spec = spec;
    t.kernel = std::move(k);
  }
  {
    std::ifstream is(fs::path(dir) / "meta.json");
    if (!is) throw std::runtime_error(dir + ": missing meta.json");
    nlohmann::json meta;
    is >> meta;
    t.mode = degrade::parse_mode(meta.at("mode").get<std::string>());
    t.scale = meta.at("scale").get<int>();
  }
  t.hr = io::read_sequence((fs::path(dir) / "HR").string(), Tier::kHr, t.scale);
  t.lr = io::read_sequence((fs::path(dir) / "LR").string(), Tier::kLr, t.scale);
  t.slr = io::read_sequence((fs::path(dir) / "SLR").string(), Tier::kSlr, t.scale);
  return t;
}

}  // namespace dynavsr::data
