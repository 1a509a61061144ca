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

#include "cset/conformal.h"

#include <cmath>
#include <limits>

#include <gtest/gtest.h>

#include "cset/error.h"
#include "cset/random.h"
#include "test_util.h"

namespace cset {
namespace {

using testing::OneRow;
using testing::Probs;
using testing::RandomProbs;

constexpr double kInf = std::numeric_limits<double>::infinity();

MethodSpec Spec(Method m, double lambda = 0, int k_reg = 1,
                bool randomized = true, double alpha = 0.1) {
  MethodSpec s;
  s.method = m;
  s.lambda = lambda;
  s.k_reg = k_reg;
  s.randomized = randomized;
  s.alpha = alpha;
  return s;
}

ConformalModel Model(MethodSpec spec, double tau) {
  ConformalModel m;
  m.spec = spec;
  m.tau_hat = tau;
  return m;
}

TEST(ConformityScore, HandExamples) {
  const SortedScores s = OneRow({0.5, 0.3, 0.2});
  EXPECT_NEAR(ConformityScore(s.row(0), 2, 1.0, Spec(Method::kRaps, 0.1, 1)),
              0.9, 1e-9);
  EXPECT_NEAR(ConformityScore(s.row(0), 2, 0.5, Spec(Method::kRaps, 0.0, 1)),
              0.65, 1e-9);
  const SortedScores lac = OneRow({0.7, 0.2, 0.1});
  EXPECT_NEAR(ConformityScore(lac.row(0), 2, 0.3, Spec(Method::kLac)), 0.8, 1e-9);
  EXPECT_THROW(ConformityScore(s.row(0), 4, 1.0, Spec(Method::kAps)), Error);
  EXPECT_THROW(ConformityScore(s.row(0), 1, 1.0, Spec(Method::kNaive)), Error);
}

TEST(ConformityScore, NondecreasingInRank) {
  const ScoreMatrix m = RandomProbs(200, 12, 4);
  const SortedScores s = SortScores(m, 0);
  SplitMix64 rng(2);
  for (size_t i = 0; i < s.rows(); ++i) {
    const double u = rng.NextDouble();
    const MethodSpec spec =
        Spec(i % 2 ? Method::kRaps : Method::kLac, 0.05 * (i % 5), 1 + i % 4);
    double prev = -kInf;
    for (size_t o = 1; o <= 12; ++o) {
      const double v = ConformityScore(s.row(i), o, u, spec);
      EXPECT_GE(v, prev - 1e-15);
      prev = v;
    }
  }
}

TEST(ConformalQuantile, OrderStatistic) {
  EXPECT_EQ(ConformalRank(4, 0.5), 3u);
  EXPECT_EQ(ConformalRank(9, 0.1), 9u);
  EXPECT_EQ(ConformalRank(4, 0.1), 5u);
  EXPECT_NEAR(ConformalQuantile({0.9, 0.2, 0.7, 0.5}, 0.5), 0.7, 1e-12);
  EXPECT_EQ(ConformalQuantile({0.42}, 0.5), 0.42);
  EXPECT_EQ(ConformalQuantile({0.1, 0.2, 0.3, 0.4}, 0.1), kInf);
}

TEST(Calibrate, FourRowFixture) {
  // Label at rank 1 with top score E, so the deterministic score is E.
  const auto row = [](double top) {
    std::vector<double> r = {top};
    for (int j = 0; j < 8; ++j) r.push_back((1.0 - top) / 8);
    return r;
  };
  const ScoreMatrix m =
      Probs({row(0.9), row(0.2), row(0.7), row(0.5)}, {0, 0, 0, 0});
  const ConformalModel model = Calibrate(
      SortScores(m, 0), Spec(Method::kRaps, 0.01, 1, false, 0.5), 3);
  EXPECT_NEAR(model.tau_hat, 0.7, 1e-12);
  EXPECT_EQ(model.n_cal, 4u);
  EXPECT_EQ(model.num_classes, 9u);
  EXPECT_THROW(Calibrate(SortScores(m, 0), Spec(Method::kNaive), 0), Error);
}

TEST(Predict, HandExamples) {
  const SortedScores s = OneRow({0.5, 0.3, 0.2});
  const SortedRow r = s.row(0);
  const ConformalModel aps = Model(Spec(Method::kAps), 0.85);
  EXPECT_EQ(PredictSize(aps, r, 1.0), 2u);
  EXPECT_EQ(PredictSize(aps, r, 0.0), 3u);
  const ConformalModel raps = Model(Spec(Method::kRaps, 1.0, 1), 1.2);
  EXPECT_EQ(PredictSize(raps, r, 1.0), 1u);
  EXPECT_EQ(PredictSize(Model(Spec(Method::kAps), kInf), r, 1.0), 3u);

  const PredictionSet set = Predict(aps, r, 1.0);
  EXPECT_EQ(set.classes, (std::vector<uint32_t>{0, 1}));
  EXPECT_EQ(set.u, 1.0);
  const PredictionSet det =
      Predict(Model(Spec(Method::kAps, 0, 1, false), 0.85), r, 0.0);
  EXPECT_EQ(det.size(), 2u);
  EXPECT_FALSE(det.u.has_value());
}

TEST(Predict, NaiveHandExample) {
  const SortedScores s = OneRow({0.6, 0.3, 0.1});
  const ConformalModel naive =
      MakeNaiveModel(Spec(Method::kNaive, 0, 1, false, 0.05), 3);
  EXPECT_EQ(PredictSize(naive, s.row(0), 0.3), 3u);
  // Randomized: V = (1.0 - 0.95) / 0.1 = 0.5, drop when 1 - u <= V.
  const ConformalModel rnd = MakeNaiveModel(Spec(Method::kNaive, 0, 1, true, 0.05));
  EXPECT_EQ(PredictSize(rnd, s.row(0), 0.0), 3u);
  EXPECT_EQ(PredictSize(rnd, s.row(0), 1.0), 2u);
  const BoundarySizes b = SetSizeGivenU(rnd, s.row(0));
  EXPECT_EQ(b.size_at_u0, 3u);
  EXPECT_EQ(b.size_at_u1, 2u);
  EXPECT_NEAR(b.v, 0.5, 1e-9);
}

TEST(Predict, BoundaryInclusive) {
  const SortedScores s = OneRow({0.5, 0.3, 0.2});
  MethodSpec spec = Spec(Method::kAps, 0, 1, false);
  spec.boundary_inclusive = true;
  EXPECT_EQ(PredictSize(Model(spec, 0.85), s.row(0), 1.0), 3u);
  EXPECT_EQ(PredictSize(Model(spec, 1.5), s.row(0), 1.0), 3u);
}

TEST(SetSizeGivenU, HandExamples) {
  const SortedScores s = OneRow({0.5, 0.3, 0.2});
  const BoundarySizes a = SetSizeGivenU(Model(Spec(Method::kAps), 0.85), s.row(0));
  EXPECT_EQ(a.size_at_u1, 2u);
  EXPECT_EQ(a.size_at_u0, 3u);
  EXPECT_NEAR(a.v, 0.25, 1e-9);
  const BoundarySizes b = SetSizeGivenU(Model(Spec(Method::kAps), 0.3), s.row(0));
  EXPECT_EQ(b.size_at_u1, 0u);
  EXPECT_EQ(b.size_at_u0, 1u);
  EXPECT_NEAR(b.v, 0.6, 1e-9);
  const BoundarySizes lac = SetSizeGivenU(Model(Spec(Method::kLac), 0.75), s.row(0));
  EXPECT_EQ(lac.size_at_u0, lac.size_at_u1);
}

TEST(SetSizeGivenU, MatchesSampledU) {
  const ScoreMatrix m = RandomProbs(300, 10, 8);
  const SortedScores s = SortScores(m, 0);
  SplitMix64 rng(1);
  for (size_t i = 0; i < s.rows(); ++i) {
    const Method method = i % 3 == 0 ? Method::kNaive
                          : i % 3 == 1 ? Method::kAps
                                       : Method::kRaps;
    ConformalModel model = Model(Spec(method, 0.02, 2), 0.3 + 0.7 * rng.NextDouble());
    if (method == Method::kNaive) model = MakeNaiveModel(Spec(method));
    const BoundarySizes b = SetSizeGivenU(model, s.row(i));
    EXPECT_LE(b.size_at_u1, b.size_at_u0);
    EXPECT_LE(b.size_at_u0 - b.size_at_u1, 1u);
    EXPECT_EQ(PredictSize(model, s.row(i), 0.0), b.size_at_u0);
    EXPECT_EQ(PredictSize(model, s.row(i), 1.0), b.size_at_u1);
    // The larger size is used exactly for u below v.
    if (b.size_at_u0 > b.size_at_u1 && b.v > 1e-6 && b.v < 1 - 1e-6) {
      EXPECT_EQ(PredictSize(model, s.row(i), b.v * 0.999), b.size_at_u0);
      EXPECT_EQ(PredictSize(model, s.row(i), (b.v + 1) / 2), b.size_at_u1);
    }
  }
}

TEST(Predict, Nesting) {
  const ScoreMatrix m = RandomProbs(100, 15, 9);
  const SortedScores s = SortScores(m, 0);
  SplitMix64 rng(3);
  for (size_t i = 0; i < s.rows(); ++i) {
    const double u = rng.NextDouble();
    double t1 = 2 * rng.NextDouble(), t2 = 2 * rng.NextDouble();
    if (t1 > t2) std::swap(t1, t2);
    const MethodSpec spec = Spec(Method::kRaps, 0.1, 3);
    EXPECT_LE(PredictSize(Model(spec, t1), s.row(i), u),
              PredictSize(Model(spec, t2), s.row(i), u));
  }
}

TEST(Predict, ApsEqualsRapsAtZeroLambda) {
  const ScoreMatrix m = RandomProbs(500, 20, 10);
  const SortedScores s = SortScores(m, 0);
  const ConformalModel aps = Calibrate(s, Spec(Method::kAps), 77);
  const ConformalModel raps = Calibrate(s, Spec(Method::kRaps, 0.0, 4), 77);
  EXPECT_EQ(aps.tau_hat, raps.tau_hat);
  const auto a = PredictAll(aps, s, 5);
  const auto b = PredictAll(raps, s, 5);
  for (size_t i = 0; i < a.size(); ++i) EXPECT_EQ(a[i].classes, b[i].classes);
}

TEST(Predict, FixedK) {
  ConformalModel m = Model(Spec(Method::kFixedK), 3);
  m.k_star = 3;
  m.mix_prob = 0.25;
  const SortedScores s = OneRow({0.4, 0.3, 0.2, 0.1});
  EXPECT_EQ(PredictSize(m, s.row(0), 0.1), 3u);
  EXPECT_EQ(PredictSize(m, s.row(0), 0.8), 2u);
  const BoundarySizes b = SetSizeGivenU(m, s.row(0));
  EXPECT_EQ(b.size_at_u0, 3u);
  EXPECT_EQ(b.size_at_u1, 2u);
  EXPECT_NEAR(b.v, 0.75, 1e-12);
}

TEST(Calibrate, SeedsAreCounterBased) {
  const ScoreMatrix m = RandomProbs(200, 6, 12);
  const SortedScores s = SortScores(m, 0);
  const auto scores = CalibrationScores(s, Spec(Method::kAps), 9);
  const std::vector<size_t> idx = {5, 17, 42};
  const auto sub = CalibrationScores(s.Subset(idx), Spec(Method::kAps), 9);
  // Row position, not identity, selects u: subset row 0 uses u_0.
  const double u0 = CounterUniform(9, streams::kCalibrationU, 0);
  EXPECT_NEAR(sub[0], ConformityScore(s.row(5), s.LabelRank(5), u0, Spec(Method::kAps)),
              1e-15);
  EXPECT_EQ(scores.size(), 200u);
}

TEST(ModelFile, RoundTrip) {
  ConformalModel m = Model(Spec(Method::kRaps, 0.01, 5, true, 0.1), 0.9312345678901234);
  m.n_cal = 1000;
  m.seed = 18446744073709551615ULL;
  m.num_classes = 100;
  m.temperature = 1.37;
  EXPECT_EQ(ParseModel(SerializeModel(m)), m);

  ConformalModel inf = Model(Spec(Method::kAps), kInf);
  EXPECT_EQ(ParseModel(SerializeModel(inf)).tau_hat, kInf);

  ConformalModel fk = Model(Spec(Method::kFixedK), 4);
  fk.k_star = 4;
  fk.mix_prob = 0.125;
  EXPECT_EQ(ParseModel(SerializeModel(fk)), fk);

  EXPECT_THROW(ParseModel("method = raps\n"), Error);
  EXPECT_THROW(ParseModel(SerializeModel(m) + "alpha = 2\n"), Error);
  EXPECT_THROW(ParseModel("garbage\n"), Error);
}

TEST(MethodSpec, Validate) {
  EXPECT_THROW(Spec(Method::kAps, 0, 1, true, 1.5).Validate(), Error);
  EXPECT_THROW(Spec(Method::kRaps, -1).Validate(), Error);
  EXPECT_THROW(Spec(Method::kRaps, 0, 0).Validate(), Error);
  EXPECT_EQ(ParseMethod("topk"), Method::kFixedK);
  EXPECT_THROW(ParseMethod("bogus"), Error);
  EXPECT_EQ(Spec(Method::kAps, 0.5).EffectiveLambda(), 0.0);
}

}  // namespace
}  // namespace cset
