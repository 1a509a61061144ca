/*
 * Copyright 2026 The cset Authors.
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

// Counter-based seeding.
//
// Every random quantity in the toolkit is a pure function of a master seed and
// a tuple of counters (trial index, split id, row index, ...). A value never
// depends on how many draws happened before it, so partial reruns, reordered
// trials and parallel schedules all reproduce the same numbers.
//
// The mixer is the SplitMix64 finalizer. The derivation scheme is:
//
//   DeriveSeed(seed, a)       = Mix(seed ^ Mix(a + kGolden))
//   DeriveSeed(seed, a, b)    = DeriveSeed(DeriveSeed(seed, a), b)
//   CounterUniform(seed, ...) = top 53 bits of DeriveSeed(seed, ...) / 2^53

#ifndef CSET_RANDOM_H_
#define CSET_RANDOM_H_

#include <cstdint>

namespace cset {

inline constexpr uint64_t kGolden = 0x9E3779B97F4A7C15ULL;

constexpr uint64_t Mix64(uint64_t z) {
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

constexpr uint64_t DeriveSeed(uint64_t seed, uint64_t a) {
  return Mix64(seed ^ Mix64(a + kGolden));
}

constexpr uint64_t DeriveSeed(uint64_t seed, uint64_t a, uint64_t b) {
  return DeriveSeed(DeriveSeed(seed, a), b);
}

constexpr uint64_t DeriveSeed(uint64_t seed, uint64_t a, uint64_t b,
                              uint64_t c) {
  return DeriveSeed(DeriveSeed(seed, a, b), c);
}

// Uniform double in [0, 1) built from the top 53 bits.
constexpr double ToUnitInterval(uint64_t bits) {
  return static_cast<double>(bits >> 11) * 0x1.0p-53;
}

constexpr double CounterUniform(uint64_t seed, uint64_t stream,
                                uint64_t index) {
  return ToUnitInterval(DeriveSeed(seed, stream, index));
}

// Small sequential generator for code that needs a stream of draws from one
// derived seed (shuffles, rejection samplers). Satisfies
// UniformRandomBitGenerator so it plugs into <random> distributions.
class SplitMix64 {
 public:
  using result_type = uint64_t;

  explicit SplitMix64(uint64_t seed) : state_(seed) {}

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return ~result_type{0}; }

  result_type operator()() {
    state_ += kGolden;
    return Mix64(state_);
  }

  // Uniform in [0, 1).
  double NextDouble() { return ToUnitInterval((*this)()); }

  // Uniform in [0, bound) via the 128-bit multiply-shift reduction. The bias
  // is at most bound / 2^64.
  uint64_t NextBounded(uint64_t bound) {
    const unsigned __int128 product =
        static_cast<unsigned __int128>((*this)()) * bound;
    return static_cast<uint64_t>(product >> 64);
  }

 private:
  uint64_t state_;
};

// Stream ids used with DeriveSeed / CounterUniform.
namespace streams {
inline constexpr uint64_t kTieBreak = 1;
inline constexpr uint64_t kSplit = 2;
inline constexpr uint64_t kCalibrationU = 3;
inline constexpr uint64_t kPredictionU = 4;
inline constexpr uint64_t kTrial = 5;
inline constexpr uint64_t kTuning = 6;
inline constexpr uint64_t kSynth = 7;
}  // namespace streams

}  // namespace cset

#endif  // CSET_RANDOM_H_
