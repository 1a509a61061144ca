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

// Choosing k_reg and lambda on held-out tuning data, and the conformalized
// fixed-k baseline.

#ifndef CSET_TUNING_H_
#define CSET_TUNING_H_

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "cset/conformal.h"
#include "cset/eval.h"

namespace cset {

inline constexpr size_t kMinTuningRows = 20;

enum class TuneObjective { kSize, kAdaptiveness };

const char* TuneObjectiveName(TuneObjective objective);
TuneObjective ParseTuneObjective(const std::string& name);

std::vector<double> DefaultSizeLambdaGrid();          // 0.001 ... 0.5
std::vector<double> DefaultAdaptivenessLambdaGrid();  // 1e-5 ... 0.002

struct GridPoint {
  double lambda = 0;
  double objective = 0;  // Mean size or SSCV on the inner evaluation half.
};

struct TuneResult {
  int k_star = 1;
  int k_reg = 1;
  double lambda = 0;
  TuneObjective objective = TuneObjective::kSize;
  std::vector<GridPoint> grid;
};

// Smallest k whose top-k sets cover the true label of at least
// ConformalRank(n, alpha) rows: the ConformalRank-th smallest label rank, or
// K when the rank exceeds n.
int FixedKStar(const SortedScores& tuning, double alpha);

// Probability of predicting the smaller (k* - 1) set so that the mixture of
// the two empirical coverages equals 1 - alpha, clamped to [0, 1]. Zero when
// the two coverages coincide.
double FixedKMixProbability(double coverage_smaller, double coverage_larger,
                            double alpha);

// Fraction of rows whose label is within the top k.
double TopKCoverage(const SortedScores& scores, size_t k);

// Randomized (or, when !randomized, plain top-k*) fixed-size predictor
// calibrated on `calibration`.
ConformalModel MakeFixedKModel(const SortedScores& calibration, double alpha,
                               bool randomized = true, uint64_t seed = 0);

// k_reg = FixedKStar(tuning); for each lambda in the grid, RAPS is calibrated
// on a seeded half of the tuning rows and scored on the other half. Size ties
// go to the larger lambda.
TuneResult TuneForSize(const SortedScores& tuning, double alpha,
                       std::span<const double> grid, uint64_t seed,
                       bool randomized = true);

// Same protocol minimizing SSCV over `strata`. Ties go to the smaller lambda.
TuneResult TuneForAdaptiveness(const SortedScores& tuning, double alpha,
                               std::span<const double> grid,
                               std::span<const SizeRange> strata, uint64_t seed,
                               bool randomized = true);

}  // namespace cset

#endif  // CSET_TUNING_H_
