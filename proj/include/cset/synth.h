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

// Synthetic classification problems with known conditional class
// probabilities.
//
// Each row draws p ~ Dirichlet(concentration / K, ..., concentration / K) and a
// label y ~ Categorical(p). The "observed" scores handed to a conformal method
// are p itself or a corrupted copy:
//
//   temperature(t)     p^(1/t), renormalized
//   tail_permute(m)    the values outside the m largest are shuffled among
//                      their classes; the top m keep their classes and order
//
// tail_permute models a classifier whose ordering of unlikely classes is
// noise.

#ifndef CSET_SYNTH_H_
#define CSET_SYNTH_H_

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "cset/conformal.h"
#include "cset/score_store.h"

namespace cset {

struct Corruption {
  enum class Kind { kNone, kTemperature, kTailPermute };

  Kind kind = Kind::kNone;
  double temperature = 1.0;  // kTemperature
  size_t top_m = 0;          // kTailPermute

  static Corruption None() { return {}; }
  static Corruption Temperature(double t) {
    return {Kind::kTemperature, t, 0};
  }
  static Corruption TailPermute(size_t m) { return {Kind::kTailPermute, 1.0, m}; }

  // "none", "temperature:<t>", "tail_permute:<m>".
  static Corruption Parse(const std::string& text);
  std::string ToString() const;
};

struct SynthSpec {
  size_t n = 1000;
  size_t k = 100;
  double concentration = 5.0;  // Dirichlet parameter is concentration / k.
  Corruption corruption;
  uint64_t seed = 0;

  // concentration = 0.05 * k.
  static double DefaultConcentration(size_t k) {
    return 0.05 * static_cast<double>(k);
  }
  void Validate() const;
};

struct SynthData {
  ScoreMatrix true_probs;
  ScoreMatrix observed;
};

SynthData Generate(const SynthSpec& spec);

// JSON manifest describing the spec, written next to generated matrices.
std::string SynthManifest(const SynthSpec& spec);

// P(Y in C(X) | X) for one row, integrating the label over `true_probs` and
// the randomization u over [0, 1].
double ConditionalCoverage(const ConformalModel& model, const SortedRow& row,
                           std::span<const double> true_probs);

struct OracleCoverageResult {
  double mean = 0;
  double standard_error = 0;
  std::vector<double> per_trial;
};

// Monte-Carlo estimate of the marginal coverage of `method` on fresh draws of
// the generator: each trial generates n_cal calibration rows and n_eval test
// rows, calibrates (aps / raps / lac / fixed_k; naive needs none) on the
// observed scores and averages ConditionalCoverage over the test rows.
OracleCoverageResult OracleCoverage(const SynthSpec& spec,
                                    const MethodSpec& method, size_t n_cal,
                                    size_t n_eval, size_t n_trials);

}  // namespace cset

#endif  // CSET_SYNTH_H_
