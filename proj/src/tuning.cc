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

#include "cset/tuning.h"

#include <algorithm>
#include <cmath>

#include "cset/error.h"
#include "cset/random.h"

namespace cset {
namespace {

struct InnerSplit {
  SortedScores calibration;
  SortedScores evaluation;
  uint64_t calibration_seed;
  uint64_t prediction_seed;
};

InnerSplit MakeInnerSplit(const SortedScores& tuning, uint64_t seed) {
  if (tuning.rows() < kMinTuningRows) {
    throw DataError("tuning split has " + std::to_string(tuning.rows()) +
                    " rows; at least " + std::to_string(kMinTuningRows) +
                    " are needed to split it again");
  }
  const uint64_t inner_seed = DeriveSeed(seed, streams::kTuning);
  SplitSpec spec;
  spec.seed = inner_seed;
  spec.calibration = tuning.rows() / 2;
  spec.evaluation = tuning.rows() - spec.calibration;
  const SplitIndices idx = SplitRows(tuning.rows(), spec);
  return {tuning.Subset(idx.calibration), tuning.Subset(idx.evaluation),
          DeriveSeed(inner_seed, 1), DeriveSeed(inner_seed, 2)};
}

void CheckGrid(std::span<const double> grid) {
  if (grid.empty()) throw UsageError("lambda grid is empty");
  for (const double l : grid) {
    if (!(l >= 0) || !std::isfinite(l)) {
      throw UsageError("lambda grid values must be finite and nonnegative");
    }
  }
}

// Runs the inner calibrate / evaluate protocol for every grid value.
template <typename Objective>
TuneResult TuneGrid(const SortedScores& tuning, double alpha,
                    std::span<const double> grid, uint64_t seed,
                    bool randomized, TuneObjective kind, Objective objective) {
  CheckGrid(grid);
  if (!(alpha > 0 && alpha < 1)) throw UsageError("alpha must be in (0,1)");
  TuneResult result;
  result.objective = kind;
  result.k_star = FixedKStar(tuning, alpha);
  result.k_reg = result.k_star;

  const InnerSplit inner = MakeInnerSplit(tuning, seed);
  for (const double lambda : grid) {
    MethodSpec spec;
    spec.method = Method::kRaps;
    spec.alpha = alpha;
    spec.lambda = lambda;
    spec.k_reg = result.k_reg;
    spec.randomized = randomized;
    const ConformalModel model =
        Calibrate(inner.calibration, spec, inner.calibration_seed);
    const auto outcomes =
        EvaluateModel(model, inner.evaluation, inner.prediction_seed);
    result.grid.push_back({lambda, objective(outcomes)});
  }

  const GridPoint* best = &result.grid.front();
  for (const GridPoint& point : result.grid) {
    const bool better = point.objective < best->objective;
    const bool tie = point.objective == best->objective;
    const bool tie_wins = kind == TuneObjective::kSize
                              ? point.lambda > best->lambda
                              : point.lambda < best->lambda;
    if (better || (tie && tie_wins)) best = &point;
  }
  result.lambda = best->lambda;
  return result;
}

}  // namespace

const char* TuneObjectiveName(TuneObjective objective) {
  return objective == TuneObjective::kSize ? "size" : "adaptiveness";
}

TuneObjective ParseTuneObjective(const std::string& name) {
  if (name == "size") return TuneObjective::kSize;
  if (name == "adaptiveness") return TuneObjective::kAdaptiveness;
  throw UsageError("unknown tuning objective \"" + name +
                   "\" (expected size or adaptiveness)");
}

std::vector<double> DefaultSizeLambdaGrid() {
  return {0.001, 0.01, 0.1, 0.2, 0.5};
}

std::vector<double> DefaultAdaptivenessLambdaGrid() {
  return {0.00001, 0.0001, 0.0008, 0.001, 0.0015, 0.002};
}

int FixedKStar(const SortedScores& tuning, double alpha) {
  if (tuning.rows() == 0) throw DataError("empty tuning split");
  if (!(alpha > 0 && alpha < 1)) throw UsageError("alpha must be in (0,1)");
  const size_t rank = ConformalRank(tuning.rows(), alpha);
  if (rank > tuning.rows()) return static_cast<int>(tuning.classes());
  std::vector<uint32_t> ranks(tuning.label_ranks().begin(),
                              tuning.label_ranks().end());
  const auto nth = ranks.begin() + static_cast<std::ptrdiff_t>(rank - 1);
  std::nth_element(ranks.begin(), nth, ranks.end());
  return static_cast<int>(*nth);
}

double FixedKMixProbability(double coverage_smaller, double coverage_larger,
                            double alpha) {
  const double gap = coverage_larger - coverage_smaller;
  if (!(gap > 0)) return 0.0;
  return std::clamp((coverage_larger - (1.0 - alpha)) / gap, 0.0, 1.0);
}

double TopKCoverage(const SortedScores& scores, size_t k) {
  if (scores.rows() == 0) return 0.0;
  size_t covered = 0;
  for (const uint32_t r : scores.label_ranks()) covered += r <= k ? 1 : 0;
  return static_cast<double>(covered) / static_cast<double>(scores.rows());
}

ConformalModel MakeFixedKModel(const SortedScores& calibration, double alpha,
                               bool randomized, uint64_t seed) {
  if (calibration.rows() == 0) throw DataError("empty calibration set");
  ConformalModel model;
  model.spec.method = Method::kFixedK;
  model.spec.alpha = alpha;
  model.spec.randomized = randomized;
  model.spec.Validate();
  model.n_cal = calibration.rows();
  model.num_classes = calibration.classes();
  model.seed = seed;
  const int k_star = FixedKStar(calibration, alpha);
  model.k_star = k_star;
  model.tau_hat = static_cast<double>(k_star);
  model.mix_prob = randomized
                       ? FixedKMixProbability(
                             TopKCoverage(calibration, k_star - 1),
                             TopKCoverage(calibration, k_star), alpha)
                       : 0.0;
  return model;
}

TuneResult TuneForSize(const SortedScores& tuning, double alpha,
                       std::span<const double> grid, uint64_t seed,
                       bool randomized) {
  return TuneGrid(tuning, alpha, grid, seed, randomized, TuneObjective::kSize,
                  [](std::span<const SetOutcome> outcomes) {
                    return CoverageAndSize(outcomes).avg_size;
                  });
}

TuneResult TuneForAdaptiveness(const SortedScores& tuning, double alpha,
                               std::span<const double> grid,
                               std::span<const SizeRange> strata, uint64_t seed,
                               bool randomized) {
  ValidatePartition(strata, tuning.classes());
  return TuneGrid(tuning, alpha, grid, seed, randomized,
                  TuneObjective::kAdaptiveness,
                  [&](std::span<const SetOutcome> outcomes) {
                    return Sscv(outcomes, strata, alpha);
                  });
}

}  // namespace cset
