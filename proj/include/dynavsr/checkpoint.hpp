// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "dynavsr/hashing.hpp"
#include "dynavsr/metaloop.hpp"
#include "dynavsr/nn.hpp"
#include "dynavsr/tensor.hpp"

namespace dynavsr::ckpt {

// Single-file binary archive: magic, version, config fingerprint, named
// entries (shape-tagged f32 arrays or raw byte strings), and a trailing
// content hash. Writes go to a temp file that is renamed into place, so a
// crash never leaves a half-written checkpoint under the final name.
struct Entry {
  std::string name;
  uint8_t kind = 0;  // 0 = f32 array, 1 = raw bytes
  std::vector<int> dims;
  std::vector<float> f32;
  std::string raw;
};

struct Checkpoint {
  uint32_t version = 1;
  std::string fingerprint;
  std::vector<Entry> entries;

  const Entry& find(const std::string& name) const {
    for (const auto& e : entries)
      if (e.name == name) return e;
    throw std::out_of_range("checkpoint has no entry named " + name);
  }

  bool has(const std::string& name) const {
    for (const auto& e : entries)
      if (e.name == name) return true;
    return false;
  }

  void add_tensor(const std::string& name, const ad::Tensor<float>& t) {
    Entry e;
    e.name = name;
    e.kind = 0;
    e.dims = t.shape.d;
    e.f32.assign(t.ptr(), t.ptr() + t.numel());
    entries.push_back(std::move(e));
  }

  ad::Tensor<float> get_tensor(const std::string& name) const {
    const Entry& e = find(name);
    if (e.kind != 0) throw std::runtime_error("checkpoint entry " + name + " is not an array");
    ad::Tensor<float> t(ad::Shape{e.dims});
    if (t.numel() != static_cast<long>(e.f32.size()))
      throw std::runtime_error("checkpoint entry " + name + " has inconsistent shape");
    std::memcpy(t.ptr(), e.f32.data(), e.f32.size() * sizeof(float));
    return t;
  }

  void add_raw(const std::string& name, std::string bytes) {
    Entry e;
    e.name = name;
    e.kind = 1;
    e.raw = std::move(bytes);
    entries.push_back(std::move(e));
  }

  std::string get_raw(const std::string& name) const {
    const Entry& e = find(name);
    if (e.kind != 1) throw std::runtime_error("checkpoint entry " + name + " is not raw bytes");
    return e.raw;
  }

  void add_i64(const std::string& name, long v) { add_raw(name, std::to_string(v)); }
  long get_i64(const std::string& name) const { return std::stol(get_raw(name)); }
};

namespace detail {

inline void put_u32(std::string& buf, uint32_t v) { buf.append(reinterpret_cast<const char*>(&v), 4); }
inline void put_u64(std::string& buf, uint64_t v) { buf.append(reinterpret_cast<const char*>(&v), 8); }

struct Cursor {
  const char* p;
  const char* end;

  void need(size_t n) const {
    if (static_cast<size_t>(end - p) < n) throw std::runtime_error("checkpoint truncated");
  }
  uint32_t u32() {
    need(4);
    uint32_t v;
    std::memcpy(&v, p, 4);
    p += 4;
    return v;
  }
  uint64_t u64() {
    need(8);
    uint64_t v;
    std::memcpy(&v, p, 8);
    p += 8;
    return v;
  }
  std::string bytes(size_t n) {
    need(n);
    std::string s(p, n);
    p += n;
    return s;
  }
};

}  // namespace detail

inline void save_checkpoint(const Checkpoint& ck, const std::string& path) {
  std::string buf;
  buf += "DVSC";
  detail::put_u32(buf, ck.version);
  detail::put_u32(buf, static_cast<uint32_t>(ck.fingerprint.size()));
  buf += ck.fingerprint;
  detail::put_u32(buf, static_cast<uint32_t>(ck.entries.size()));
  for (const auto& e : ck.entries) {
    detail::put_u32(buf, static_cast<uint32_t>(e.name.size()));
    buf += e.name;
    buf.push_back(static_cast<char>(e.kind));
    if (e.kind == 0) {
      detail::put_u32(buf, static_cast<uint32_t>(e.dims.size()));
      for (int d : e.dims) detail::put_u32(buf, static_cast<uint32_t>(d));
      detail::put_u64(buf, e.f32.size() * sizeof(float));
      buf.append(reinterpret_cast<const char*>(e.f32.data()), e.f32.size() * sizeof(float));
    } else {
      detail::put_u64(buf, e.raw.size());
      buf += e.raw;
    }
  }
  detail::put_u64(buf, fnv1a64(buf.data(), buf.size()));

  const std::string tmp = path + ".tmp";
  {
    std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
    if (!os) throw std::runtime_error("cannot write " + tmp);
    os.write(buf.data(), static_cast<std::streamsize>(buf.size()));
    if (!os) throw std::runtime_error("short write to " + tmp);
  }
  std::filesystem::rename(tmp, path);
}

inline Checkpoint load_checkpoint(const std::string& path, const std::string& expected_fingerprint = "",
                                  bool force = false) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open checkpoint " + path);
  std::string buf((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());
  if (buf.size() < 4 + 4 + 4 + 4 + 8) throw std::runtime_error(path + ": checkpoint truncated");

  const size_t payload = buf.size() - 8;
  uint64_t stored;
  std::memcpy(&stored, buf.data() + payload, 8);
  if (stored != fnv1a64(buf.data(), payload))
    throw std::runtime_error(path + ": checkpoint corrupt (content hash mismatch)");

  detail::Cursor c{buf.data(), buf.data() + payload};
  if (c.bytes(4) != "DVSC") throw std::runtime_error(path + ": not a checkpoint file");
  Checkpoint ck;
  ck.version = c.u32();
  if (ck.version != 1)
    throw std::runtime_error(path + ": unsupported checkpoint version " + std::to_string(ck.version));
  ck.fingerprint = c.bytes(c.u32());
  const uint32_t count = c.u32();
  for (uint32_t i = 0; i < count; ++i) {
    Entry e;
    e.name = c.bytes(c.u32());
    e.kind = static_cast<uint8_t>(c.bytes(1)[0]);
    if (e.kind == 0) {
      const uint32_t rank = c.u32();
      if (rank > 8) throw std::runtime_error(path + ": implausible tensor rank");
      for (uint32_t r = 0; r < rank; ++r) e.dims.push_back(static_cast<int>(c.u32()));
      const uint64_t nbytes = c.u64();
      if (nbytes % sizeof(float) != 0) throw std::runtime_error(path + ": bad array byte count");
      const std::string raw = c.bytes(nbytes);
      e.f32.resize(nbytes / sizeof(float));
      std::memcpy(e.f32.data(), raw.data(), nbytes);
    } else if (e.kind == 1) {
      e.raw = c.bytes(c.u64());
    } else {
      throw std::runtime_error(path + ": unknown entry kind");
    }
    ck.entries.push_back(std::move(e));
  }

  if (!expected_fingerprint.empty() && ck.fingerprint != expected_fingerprint && !force)
    throw std::runtime_error(path + ": config fingerprint mismatch (checkpoint " + ck.fingerprint +
                             ", config " + expected_fingerprint + ")");
  return ck;
}

// ---- composite helpers ----

// Stores a flat parameter vector as one entry per layout entry, preserving
// layer names and shapes.
inline void add_params(Checkpoint& ck, const std::string& prefix, const nn::ParamLayout& layout,
                       const ad::Tensor<float>& flat) {
  if (flat.numel() != layout.total)
    throw std::invalid_argument("add_params: flat tensor does not match layout");
  for (const auto& e : layout.entries) {
    Entry entry;
    entry.name = prefix + "/" + e.name;
    entry.kind = 0;
    entry.dims = e.dims.d;
    entry.f32.assign(flat.ptr() + e.offset, flat.ptr() + e.offset + e.dims.numel());
    ck.entries.push_back(std::move(entry));
  }
}

inline ad::Tensor<float> get_params(const Checkpoint& ck, const std::string& prefix,
                                    const nn::ParamLayout& layout) {
  ad::Tensor<float> flat(ad::Shape{static_cast<int>(layout.total)});
  for (const auto& e : layout.entries) {
    const Entry& stored = ck.find(prefix + "/" + e.name);
    if (stored.kind != 0 || stored.dims != e.dims.d)
      throw std::runtime_error("checkpoint entry " + stored.name + " does not match the model layout");
    std::memcpy(flat.ptr() + e.offset, stored.f32.data(), stored.f32.size() * sizeof(float));
  }
  return flat;
}

inline void add_adam(Checkpoint& ck, const std::string& prefix, const nn::AdamState<float>& st) {
  ad::Tensor<float> m(ad::Shape{static_cast<int>(st.m.size())}), v(ad::Shape{static_cast<int>(st.v.size())});
  m.data = st.m;
  v.data = st.v;
  ck.add_tensor(prefix + ".m", m);
  ck.add_tensor(prefix + ".v", v);
  ck.add_i64(prefix + ".t", st.t);
}

inline nn::AdamState<float> get_adam(const Checkpoint& ck, const std::string& prefix) {
  const ad::Tensor<float> m = ck.get_tensor(prefix + ".m");
  const ad::Tensor<float> v = ck.get_tensor(prefix + ".v");
  nn::AdamState<float> st(m.numel());
  st.m = m.data;
  st.v = v.data;
  st.t = ck.get_i64(prefix + ".t");
  return st;
}

// Full training state: model parameters by layer, optimizer moments, the
// iteration counter, and (via add_raw by the caller) any RNG stream states
// needed to reproduce the remaining schedule.
inline void add_meta_state(Checkpoint& ck, const meta::MetaTrainState<float>& st,
                           const nn::ParamLayout& phi_layout, const nn::ParamLayout& theta_layout) {
  add_params(ck, "mfdn", phi_layout, st.phi);
  add_params(ck, "vsr", theta_layout, st.theta);
  add_adam(ck, "opt/phi", st.opt_phi);
  add_adam(ck, "opt/theta", st.opt_theta);
  ck.add_i64("train/iter", st.iter);
}

inline meta::MetaTrainState<float> get_meta_state(const Checkpoint& ck,
                                                  const nn::ParamLayout& phi_layout,
                                                  const nn::ParamLayout& theta_layout) {
  meta::MetaTrainState<float> st;
  st.phi = get_params(ck, "mfdn", phi_layout);
  st.theta = get_params(ck, "vsr", theta_layout);
  st.opt_phi = get_adam(ck, "opt/phi");
  st.opt_theta = get_adam(ck, "opt/theta");
  st.iter = ck.get_i64("train/iter");
  return st;
}

}  // namespace dynavsr::ckpt
