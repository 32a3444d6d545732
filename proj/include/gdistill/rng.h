// gdistill/rng.h

// Copyright 2026  gdistill authors

// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// THIS CODE IS PROVIDED *AS IS* BASIS, WITHOUT WARRANTIES OR CONDITIONS OF ANY
// KIND, EITHER EXPRESS OR IMPLIED, INCLUDING WITHOUT LIMITATION ANY IMPLIED
// WARRANTIES OR CONDITIONS OF TITLE, FITNESS FOR A PARTICULAR PURPOSE,
// MERCHANTABLITY OR NON-INFRINGEMENT.
// See the Apache 2 License for the specific language governing permissions and
// limitations under the License.

#ifndef GDISTILL_RNG_H_
#define GDISTILL_RNG_H_

#include <cmath>
#include <cstdint>
#include <string_view>

#include "gdistill/common.h"

namespace gdistill {

// All randomness in the project flows from one root seed through named
// sub-streams (DeriveSeed) so that modules cannot perturb each other's
// draws and per-task seeds are independent of scheduling.
//
// The generator is self-contained (splitmix64 state update, hand-rolled
// uniform/normal) so sequences are identical across standard libraries.

inline uint64_t SplitMix64Next(uint64_t &state) {
  state += 0x9e3779b97f4a7c15ull;
  uint64_t z = state;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

// Seed for sub-stream `stream`/`index` of a root seed.
inline uint64_t DeriveSeed(uint64_t root, std::string_view stream,
                           uint64_t index = 0) {
  uint64_t h = Fnv1a64(stream);
  h = Fnv1a64(&root, sizeof(root), h);
  h = Fnv1a64(&index, sizeof(index), h);
  // One finalization round so nearby (root, index) pairs decorrelate.
  return SplitMix64Next(h);
}

class Rng {
 public:
  explicit Rng(uint64_t seed) : state_(seed) {
    // Burn a couple of draws so small seeds do not yield small first outputs.
    NextU64();
    NextU64();
  }

  uint64_t NextU64() { return SplitMix64Next(state_); }

  // Uniform in [0, 1) with 53 random bits.
  double Uniform() {
    return static_cast<double>(NextU64() >> 11) * 0x1.0p-53;
  }

  double Uniform(double lo, double hi) { return lo + (hi - lo) * Uniform(); }

  // Uniform integer in [0, n), n >= 1. Rejection sampling keeps it unbiased.
  int64_t UniformInt(int64_t n) {
    if (n <= 0) throw NumericError("Rng::UniformInt: n must be positive");
    uint64_t un = static_cast<uint64_t>(n);
    uint64_t limit = ~0ull - (~0ull % un);
    uint64_t v;
    do {
      v = NextU64();
    } while (v >= limit);
    return static_cast<int64_t>(v % un);
  }

  // Standard normal via Box-Muller; caches the second variate.
  double Normal() {
    if (have_cached_) {
      have_cached_ = false;
      return cached_;
    }
    double u1, u2;
    do {
      u1 = Uniform();
    } while (u1 <= 0.0);
    u2 = Uniform();
    double r = std::sqrt(-2.0 * std::log(u1));
    double a = 6.283185307179586476925286766559 * u2;
    cached_ = r * std::sin(a);
    have_cached_ = true;
    return r * std::cos(a);
  }

  double Normal(double mean, double stddev) { return mean + stddev * Normal(); }

 private:
  uint64_t state_;
  bool have_cached_ = false;
  double cached_ = 0.0;
};

}  // namespace gdistill

#endif  // GDISTILL_RNG_H_
