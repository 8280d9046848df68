// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>

#include "dynavsr/hashing.hpp"

namespace dynavsr {

// Deterministic random source. All randomness in the project flows through
// named substreams derived from one run seed, so that adding a consumer of
// one stream never perturbs the draws seen by another.
//
// Mapping from engine output to doubles is done by hand (53-bit mantissa
// fill) instead of std::uniform_real_distribution, whose output is not
// pinned down by the standard and may differ across library versions.
class Rng {
 public:
  explicit Rng(uint64_t seed) : eng_(seed) {}

  static Rng substream(uint64_t seed, std::string_view name) {
    return Rng(splitmix64(seed ^ fnv1a64(name)));
  }

  uint64_t next_u64() { return eng_(); }

  // Uniform in [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Uniform integer in [0, n).
  int uniform_int(int n) {
    if (n <= 0) throw std::invalid_argument("Rng::uniform_int: n must be positive");
    // Rejection sampling keeps the distribution exact for any n.
    const uint64_t span = static_cast<uint64_t>(n);
    const uint64_t limit = UINT64_MAX - UINT64_MAX % span;
    uint64_t v;
    do {
      v = next_u64();
    } while (v >= limit);
    return static_cast<int>(v % span);
  }

  // Standard normal via Box-Muller. The second value of each pair is
  // discarded so that engine state is a pure function of the call count.
  double normal() {
    double u1 = uniform();
    double u2 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
  }

  std::string save_state() const {
    std::ostringstream os;
    os << eng_;
    return os.str();
  }

  void load_state(const std::string& s) {
    std::istringstream is(s);
    is >> eng_;
    if (is.fail()) throw std::runtime_error("Rng::load_state: malformed state string");
  }

 private:
  std::mt19937_64 eng_;
};

}  // namespace dynavsr
