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

#include <cmath>

#include <gtest/gtest.h>

#include "cset/error.h"
#include "cset/synth.h"
#include "test_util.h"

namespace cset {
namespace {

using testing::Probs;
using testing::RandomProbs;

// Rows whose label sits at the given 1-based rank among 4 classes.
SortedScores WithRanks(const std::vector<uint32_t>& ranks) {
  std::vector<std::vector<double>> rows;
  std::vector<uint32_t> labels;
  for (const uint32_t r : ranks) {
    rows.push_back({0.4, 0.3, 0.2, 0.1});
    labels.push_back(r - 1);
  }
  return SortScores(Probs(rows, labels), 0);
}

TEST(FixedKStar, HandExamples) {
  EXPECT_EQ(FixedKStar(WithRanks({1, 1, 2, 3, 1}), 0.4), 2);
  EXPECT_EQ(FixedKStar(WithRanks({1, 1, 1, 1, 1}), 0.4), 1);
  EXPECT_EQ(FixedKStar(WithRanks({1, 1, 1, 1}), 0.1), 4);
  EXPECT_THROW(FixedKStar(WithRanks({1}).Subset(std::vector<size_t>{}), 0.1),
               Error);
}

TEST(FixedKMix, HandExamples) {
  EXPECT_NEAR(FixedKMixProbability(0.85, 0.95, 0.1), 0.5, 1e-9);
  EXPECT_NEAR(FixedKMixProbability(0.9, 0.95, 0.1), 1.0, 1e-12);
  EXPECT_EQ(FixedKMixProbability(0.9, 0.9, 0.1), 0.0);
}

TEST(FixedKModel, MixedCoverageOnCalibration) {
  const ScoreMatrix m = RandomProbs(997, 10, 21);
  const SortedScores s = SortScores(m, 0);
  const ConformalModel model = MakeFixedKModel(s, 0.1, true, 4);
  const int k = *model.k_star;
  const double mix = *model.mix_prob;
  const double mixed = mix * TopKCoverage(s, k - 1) + (1 - mix) * TopKCoverage(s, k);
  EXPECT_NEAR(mixed, 0.9, 1.0 / 997);
  EXPECT_EQ(model.tau_hat, k);
  const ConformalModel det = MakeFixedKModel(s, 0.1, false, 4);
  EXPECT_EQ(*det.mix_prob, 0.0);
}

SortedScores TailNoise(size_t n, uint64_t seed) {
  SynthSpec spec;
  spec.n = n;
  spec.k = 100;
  spec.concentration = 0.35;
  spec.corruption = Corruption::TailPermute(1);
  spec.seed = seed;
  return SortScores(Generate(spec).observed, seed);
}

TEST(TuneForSize, PrefersRegularizationUnderTailNoise) {
  const SortedScores tune = TailNoise(2000, 6);
  const TuneResult r = TuneForSize(tune, 0.1, DefaultSizeLambdaGrid(), 1);
  EXPECT_GT(r.lambda, 0.0);
  EXPECT_EQ(r.k_reg, r.k_star);
  ASSERT_EQ(r.grid.size(), 5u);
  double chosen = 0;
  for (const auto& p : r.grid) {
    if (p.lambda == r.lambda) chosen = p.objective;
  }
  for (const auto& p : r.grid) EXPECT_LE(chosen, p.objective);
  const TuneResult again = TuneForSize(tune, 0.1, DefaultSizeLambdaGrid(), 1);
  EXPECT_EQ(again.lambda, r.lambda);
  EXPECT_EQ(again.grid.back().objective, r.grid.back().objective);
}

TEST(TuneForSize, SingletonGridAndSmallSplit) {
  const SortedScores tune = TailNoise(200, 2);
  const std::vector<double> one = {0.37};
  EXPECT_EQ(TuneForSize(tune, 0.1, one, 1).lambda, 0.37);
  EXPECT_THROW(TuneForSize(tune.Subset(std::vector<size_t>{1, 2, 3}), 0.1, one, 1),
               Error);
  EXPECT_THROW(TuneForSize(tune, 0.1, std::vector<double>{}, 1), Error);
}

TEST(TuneForAdaptiveness, ChoosesArgmin) {
  const SortedScores tune = TailNoise(2000, 7);
  const TuneResult r = TuneForAdaptiveness(
      tune, 0.1, DefaultAdaptivenessLambdaGrid(), DefaultSizeStrata(), 1);
  double chosen = -1;
  for (const auto& p : r.grid) {
    if (p.lambda == r.lambda) chosen = p.objective;
  }
  for (const auto& p : r.grid) {
    EXPECT_LE(chosen, p.objective);
    // Ties go to the smaller lambda.
    if (p.objective == chosen) {
      EXPECT_GE(p.lambda, r.lambda);
    }
  }
  const std::vector<double> one = {0.002};
  EXPECT_EQ(TuneForAdaptiveness(tune, 0.1, one, DefaultSizeStrata(), 1).lambda,
            0.002);
}

TEST(TuneForAdaptiveness, NearBestOnOracleData) {
  SynthSpec spec;
  spec.k = 100;
  spec.n = 2000;
  spec.seed = 12;
  const SortedScores tune = SortScores(Generate(spec).observed, 0);
  spec.seed = 13;
  const SortedScores cal = SortScores(Generate(spec).observed, 0);
  spec.n = 20000;
  spec.seed = 14;
  const SortedScores eval = SortScores(Generate(spec).observed, 0);

  const auto grid = DefaultAdaptivenessLambdaGrid();
  const TuneResult r =
      TuneForAdaptiveness(tune, 0.1, grid, DefaultSizeStrata(), 2);

  // Oracle: every grid value calibrated on fresh data, scored on a large
  // fresh evaluation set.
  double best = 1, chosen = 1, chosen_se = 0;
  for (const double lambda : grid) {
    MethodSpec m;
    m.method = Method::kRaps;
    m.lambda = lambda;
    m.k_reg = r.k_reg;
    const auto outcomes = EvaluateModel(Calibrate(cal, m, 3), eval, 4);
    const double v = Sscv(outcomes, DefaultSizeStrata(), 0.1);
    best = std::min(best, v);
    if (lambda == r.lambda) {
      chosen = v;
      size_t smallest = outcomes.size();
      for (const auto& row : StratifiedCoverage(outcomes, DefaultSizeStrata())) {
        if (row.count > 0) smallest = std::min(smallest, row.count);
      }
      chosen_se = std::sqrt(0.09 / static_cast<double>(smallest));
    }
  }
  EXPECT_LE(chosen, best + 3 * chosen_se);
}

}  // namespace
}  // namespace cset
