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

// Repeated random-split experiments.
//
// Trial t uses seed_t = DeriveSeed(master, kTrial, t). Within a trial:
//
//   split rows          SplitSpec{seed_t, tuning, calibration, evaluation}
//   temperature fit     on the calibration rows (tuning rows when nested)
//   tuning              DeriveSeed(seed_t, 3)
//   calibration u_i     DeriveSeed(seed_t, 1), shared by every method
//   prediction u_i      DeriveSeed(seed_t, 2), shared by every method
//
// A trial depends only on its index, so trials can run in any order and the
// aggregate is the same.

#ifndef CSET_TRIALS_H_
#define CSET_TRIALS_H_

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "cset/conformal.h"
#include "cset/eval.h"
#include "cset/platt.h"
#include "cset/score_store.h"
#include "cset/tuning.h"

namespace cset {

enum class LambdaPolicy { kManual, kTuneSize, kTuneAdaptiveness };

// One column of an experiment: a method plus how its hyperparameters are set.
struct MethodPolicy {
  std::string label;
  MethodSpec spec;
  LambdaPolicy lambda_policy = LambdaPolicy::kManual;
  std::vector<double> lambda_grid;  // Empty: the objective's default grid.
  // kManual only: take k_reg from FixedKStar on the tuning split.
  bool k_reg_from_tuning = false;
};

struct TrialProtocol {
  size_t n_trials = 1;
  size_t tuning_size = 0;
  size_t calibration_size = 0;
  size_t evaluation_size = 0;
  uint64_t seed = 0;
  double alpha = 0.1;
  std::vector<SizeRange> strata = DefaultSizeStrata();
  std::vector<SizeRange> difficulty_bins = DefaultDifficultyBins();
  // Logit inputs only.
  TemperatureBracket bracket;
  std::optional<double> temperature;  // Skip fitting.
  bool nested_platt = false;          // Fit on the tuning split instead.
};

struct MethodTrial {
  double coverage = 0;
  double avg_size = 0;
  double sscv = 0;
  double lambda = 0;
  int k_reg = 0;
  double tau_hat = 0;
  std::map<size_t, size_t> size_hist;
  std::vector<StratumRow> per_stratum;
  std::vector<DifficultyRow> per_difficulty;
};

struct TrialResult {
  size_t index = 0;
  double top1 = 0;
  double top5 = 0;
  double temperature = 1.0;
  std::vector<MethodTrial> methods;
};

struct MethodSummary {
  std::string label;
  std::vector<double> coverage;  // Per trial, in trial-index order.
  std::vector<double> avg_size;
  std::vector<double> sscv;
  std::vector<double> lambda;
  std::vector<double> k_reg;
  double median_coverage = 0;
  double median_size = 0;
  double median_sscv = 0;
  // Pooled over all trials.
  std::map<size_t, size_t> size_hist;
  std::vector<StratumRow> per_stratum;
  std::vector<DifficultyRow> per_difficulty;
};

struct TrialAggregate {
  std::vector<MethodSummary> methods;
  std::vector<double> top1;
  std::vector<double> top5;
  std::vector<double> temperature;
  double median_top1 = 0;
  double median_top5 = 0;
};

// Holds the sorted score pool and runs individual trials against it.
class TrialRunner {
 public:
  TrialRunner(const ScoreMatrix& scores, TrialProtocol protocol,
              std::vector<MethodPolicy> methods);

  TrialResult RunTrial(size_t index) const;

  const TrialProtocol& protocol() const { return protocol_; }
  const std::vector<MethodPolicy>& methods() const { return methods_; }

 private:
  const ScoreMatrix& scores_;
  TrialProtocol protocol_;
  std::vector<MethodPolicy> methods_;
  SortedScores sorted_;
};

// Median-of-means aggregation. Results are ordered by trial index first, so
// the input order does not matter.
TrialAggregate Aggregate(std::vector<TrialResult> results,
                         std::span<const MethodPolicy> methods);

TrialAggregate RunTrials(const ScoreMatrix& scores,
                         const TrialProtocol& protocol,
                         const std::vector<MethodPolicy>& methods);

// The five-column baseline set: fixed_k, naive, aps, raps (tuned for size
// when the protocol has a tuning split, else lambda = 0.01, k_reg = 5) and
// lac.
std::vector<MethodPolicy> StandardMethods(const TrialProtocol& protocol,
                                          bool randomized = true);

}  // namespace cset

#endif  // CSET_TRIALS_H_
