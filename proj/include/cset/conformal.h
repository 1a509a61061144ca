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

// Conformity scores, split-conformal calibration and prediction sets.
//
// All set-valued predictors here return a prefix of the row's classes sorted
// by decreasing score. For a 1-based rank o, sorted scores s and running mass
// rho(o) = s_1 + ... + s_{o-1}, the scores are
//
//   aps / raps:  rho(o) + u * s_o + lambda * max(o - k_reg, 0)
//   lac:         1 - s_o                                  (u ignored)
//
// Both are nondecreasing in o for fixed u, so {o : score(o) <= tau} is a
// prefix and the set for a larger tau contains the set for a smaller one.
//
// Randomization convention: u = 0 gives the largest set, u = 1 the smallest.
// Deterministic models always use u = 1.

#ifndef CSET_CONFORMAL_H_
#define CSET_CONFORMAL_H_

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "cset/score_store.h"

namespace cset {

enum class Method { kNaive, kAps, kRaps, kLac, kFixedK };

const char* MethodName(Method method);
Method ParseMethod(const std::string& name);

struct MethodSpec {
  Method method = Method::kRaps;
  double lambda = 0.0;  // raps only
  int k_reg = 1;        // raps only
  bool randomized = true;
  double alpha = 0.1;
  // Deterministic mode only: also include the first class whose score
  // exceeds the threshold.
  bool boundary_inclusive = false;

  // Throws UsageError when a field is out of range.
  void Validate() const;
  bool operator==(const MethodSpec&) const = default;

  // lambda as used in the score: 0 for everything except raps.
  double EffectiveLambda() const {
    return method == Method::kRaps ? lambda : 0.0;
  }
};

struct ConformalModel {
  MethodSpec spec;
  double tau_hat = 0.0;  // May be +infinity: predict every class.
  size_t n_cal = 0;
  uint64_t seed = 0;
  size_t num_classes = 0;  // K of the calibration data, 0 when unknown.
  std::optional<int> k_star;       // fixed_k only
  std::optional<double> mix_prob;  // fixed_k only
  // Softmax temperature the model was calibrated at, for logit inputs.
  std::optional<double> temperature;

  bool operator==(const ConformalModel&) const = default;
};

struct PredictionSet {
  std::vector<uint32_t> classes;  // Most to least likely.
  std::optional<double> u;        // Absent for deterministic models.

  size_t size() const { return classes.size(); }
};

// The sizes reachable by Predict as u ranges over [0,1]: size_at_u1 for
// u = 1, size_at_u0 for u = 0 (never smaller, at most one more) and the
// probability v that a uniform u yields the larger size.
struct BoundarySizes {
  size_t size_at_u0 = 0;
  size_t size_at_u1 = 0;
  double v = 0.0;

  double ExpectedSize() const {
    return static_cast<double>(size_at_u1) +
           v * static_cast<double>(size_at_u0 - size_at_u1);
  }
};

// 1-based index ceil((n + 1)(1 - alpha)) of the order statistic used as the
// conformal threshold. Products within 1e-9 of an integer are treated as that
// integer so that e.g. n = 9, alpha = 0.1 gives 9 rather than 10.
size_t ConformalRank(size_t n, double alpha);

// The ConformalRank-th smallest value, or +infinity when the rank exceeds n.
// Uses nth_element on a copy; deterministic for a given input order.
double ConformalQuantile(std::vector<double> scores, double alpha);

// Score of the class at 1-based `rank`. Throws UsageError for
// rank outside [1, K] and for naive / fixed_k, which have no score.
double ConformityScore(const SortedRow& row, size_t rank, double u,
                       const MethodSpec& spec);

// Calibration scores of every row at its label's rank. u_i comes from
// CounterUniform(seed, kCalibrationU, i) when randomized, else 1.
std::vector<double> CalibrationScores(const SortedScores& calibration,
                                      const MethodSpec& spec, uint64_t seed);

// Split-conformal calibration for aps / raps / lac.
ConformalModel Calibrate(const SortedScores& calibration,
                         const MethodSpec& spec, uint64_t seed);

// The naive method needs no calibration data.
ConformalModel MakeNaiveModel(const MethodSpec& spec, size_t num_classes = 0);

// Number of leading classes Predict would return for this u.
size_t PredictSize(const ConformalModel& model, const SortedRow& row,
                   double u);

PredictionSet Predict(const ConformalModel& model, const SortedRow& row,
                      double u);

BoundarySizes SetSizeGivenU(const ConformalModel& model, const SortedRow& row);

// The u used for prediction row i under `seed`.
double PredictionU(uint64_t seed, size_t row_index);

// Predicts every row of `scores`, drawing u_i = PredictionU(seed, i).
std::vector<PredictionSet> PredictAll(const ConformalModel& model,
                                      const SortedScores& scores,
                                      uint64_t seed);

// Same, returning only the sizes.
std::vector<size_t> PredictSizes(const ConformalModel& model,
                                 const SortedScores& scores, uint64_t seed);

// Model files: one "key = value" line per field. Doubles are written in
// shortest round-trip form; tau_hat may be "inf".
std::string SerializeModel(const ConformalModel& model);
ConformalModel ParseModel(const std::string& text);
void SaveModel(const ConformalModel& model, const std::string& path);
ConformalModel LoadModel(const std::string& path);

}  // namespace cset

#endif  // CSET_CONFORMAL_H_
