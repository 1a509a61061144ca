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

#include "cset/trials.h"

#include <algorithm>

#include "cset/error.h"
#include "cset/random.h"

namespace cset {
namespace {

void PoolStrata(std::vector<StratumRow>& into,
                const std::vector<StratumRow>& from) {
  if (into.empty()) {
    into.assign(from.size(), {});
    for (size_t j = 0; j < from.size(); ++j) into[j].range = from[j].range;
  }
  for (size_t j = 0; j < from.size(); ++j) {
    into[j].count += from[j].count;
    into[j].covered += from[j].covered;
  }
}

void PoolDifficulty(std::vector<DifficultyRow>& into,
                    const std::vector<DifficultyRow>& from) {
  if (into.empty()) {
    into.assign(from.size(), {});
    for (size_t j = 0; j < from.size(); ++j) into[j].bin = from[j].bin;
  }
  for (size_t j = 0; j < from.size(); ++j) {
    into[j].count += from[j].count;
    into[j].covered += from[j].covered;
    into[j].total_size += from[j].total_size;
  }
}

}  // namespace

TrialRunner::TrialRunner(const ScoreMatrix& scores, TrialProtocol protocol,
                         std::vector<MethodPolicy> methods)
    : scores_(scores),
      protocol_(std::move(protocol)),
      methods_(std::move(methods)),
      sorted_(SortAnyScores(scores, DeriveSeed(protocol_.seed,
                                               streams::kTieBreak))) {
  if (!(protocol_.alpha > 0 && protocol_.alpha < 1)) {
    throw UsageError("alpha must be in (0,1)");
  }
  if (protocol_.n_trials == 0) throw UsageError("need at least one trial");
  if (protocol_.calibration_size == 0 || protocol_.evaluation_size == 0) {
    throw UsageError("calibration and evaluation sizes must be positive");
  }
  const size_t total = protocol_.tuning_size + protocol_.calibration_size +
                       protocol_.evaluation_size;
  if (total > scores_.rows()) {
    throw UsageError("split sizes sum to " + std::to_string(total) +
                     " but the score matrix has " +
                     std::to_string(scores_.rows()) + " rows");
  }
  ValidatePartition(protocol_.strata, scores_.classes());
  for (const auto& m : methods_) {
    MethodSpec spec = m.spec;
    spec.alpha = protocol_.alpha;
    spec.Validate();
    const bool needs_tuning = m.lambda_policy != LambdaPolicy::kManual ||
                              m.k_reg_from_tuning;
    if (needs_tuning && protocol_.tuning_size < kMinTuningRows) {
      throw UsageError("method " + m.label + " needs a tuning split of at least " +
                       std::to_string(kMinTuningRows) + " rows");
    }
  }
  if (protocol_.nested_platt && protocol_.tuning_size == 0 &&
      scores_.kind() == ScoreKind::kLogits && !protocol_.temperature) {
    throw UsageError("nested temperature fitting needs a tuning split");
  }
}

TrialResult TrialRunner::RunTrial(size_t index) const {
  const uint64_t seed = DeriveSeed(protocol_.seed, streams::kTrial, index);
  SplitSpec split;
  split.seed = seed;
  split.tuning = protocol_.tuning_size;
  split.calibration = protocol_.calibration_size;
  split.evaluation = protocol_.evaluation_size;
  const SplitIndices idx = SplitRows(scores_.rows(), split);

  TrialResult result;
  result.index = index;

  SortedScores tune = sorted_.Subset(idx.tuning);
  SortedScores cal = sorted_.Subset(idx.calibration);
  SortedScores eval = sorted_.Subset(idx.evaluation);
  if (scores_.kind() == ScoreKind::kLogits) {
    double t = 1.0;
    if (protocol_.temperature) {
      t = *protocol_.temperature;
    } else {
      const auto& fit_rows =
          protocol_.nested_platt ? idx.tuning : idx.calibration;
      t = FitTemperature(scores_.Subset(fit_rows), protocol_.bracket)
              .temperature;
    }
    result.temperature = t;
    if (!idx.tuning.empty()) tune = ApplyTemperature(tune, t);
    cal = ApplyTemperature(cal, t);
    eval = ApplyTemperature(eval, t);
  }
  result.top1 = TopKCoverage(eval, 1);
  result.top5 = TopKCoverage(eval, 5);

  const uint64_t calibration_seed = DeriveSeed(seed, 1);
  const uint64_t prediction_seed = DeriveSeed(seed, 2);
  const uint64_t tuning_seed = DeriveSeed(seed, 3);

  for (const MethodPolicy& policy : methods_) {
    MethodSpec spec = policy.spec;
    spec.alpha = protocol_.alpha;
    switch (policy.lambda_policy) {
      case LambdaPolicy::kManual:
        if (policy.k_reg_from_tuning) spec.k_reg = FixedKStar(tune, spec.alpha);
        break;
      case LambdaPolicy::kTuneSize: {
        const auto grid = policy.lambda_grid.empty() ? DefaultSizeLambdaGrid()
                                                     : policy.lambda_grid;
        const TuneResult r =
            TuneForSize(tune, spec.alpha, grid, tuning_seed, spec.randomized);
        spec.lambda = r.lambda;
        spec.k_reg = r.k_reg;
        break;
      }
      case LambdaPolicy::kTuneAdaptiveness: {
        const auto grid = policy.lambda_grid.empty()
                              ? DefaultAdaptivenessLambdaGrid()
                              : policy.lambda_grid;
        const TuneResult r =
            TuneForAdaptiveness(tune, spec.alpha, grid, protocol_.strata,
                                tuning_seed, spec.randomized);
        spec.lambda = r.lambda;
        spec.k_reg = r.k_reg;
        break;
      }
    }

    ConformalModel model;
    switch (spec.method) {
      case Method::kNaive:
        model = MakeNaiveModel(spec, cal.classes());
        break;
      case Method::kFixedK:
        model = MakeFixedKModel(cal, spec.alpha, spec.randomized,
                                calibration_seed);
        break;
      default:
        model = Calibrate(cal, spec, calibration_seed);
        break;
    }

    const auto outcomes = EvaluateModel(model, eval, prediction_seed);
    const EvalReport report =
        Evaluate(outcomes, eval.label_ranks(), spec.alpha, protocol_.strata,
                 protocol_.difficulty_bins);
    MethodTrial m;
    m.coverage = report.coverage;
    m.avg_size = report.avg_size;
    m.sscv = report.sscv;
    m.lambda = spec.EffectiveLambda();
    m.k_reg = spec.k_reg;
    m.tau_hat = model.tau_hat;
    m.size_hist = report.size_hist;
    m.per_stratum = report.per_stratum;
    m.per_difficulty = report.per_difficulty;
    result.methods.push_back(std::move(m));
  }
  return result;
}

TrialAggregate Aggregate(std::vector<TrialResult> results,
                         std::span<const MethodPolicy> methods) {
  std::sort(results.begin(), results.end(),
            [](const TrialResult& a, const TrialResult& b) {
              return a.index < b.index;
            });
  TrialAggregate agg;
  agg.methods.resize(methods.size());
  for (size_t m = 0; m < methods.size(); ++m) {
    agg.methods[m].label = methods[m].label;
  }
  for (const TrialResult& r : results) {
    agg.top1.push_back(r.top1);
    agg.top5.push_back(r.top5);
    agg.temperature.push_back(r.temperature);
    for (size_t m = 0; m < methods.size(); ++m) {
      const MethodTrial& t = r.methods.at(m);
      MethodSummary& s = agg.methods[m];
      s.coverage.push_back(t.coverage);
      s.avg_size.push_back(t.avg_size);
      s.sscv.push_back(t.sscv);
      s.lambda.push_back(t.lambda);
      s.k_reg.push_back(t.k_reg);
      for (const auto& [size, count] : t.size_hist) s.size_hist[size] += count;
      PoolStrata(s.per_stratum, t.per_stratum);
      PoolDifficulty(s.per_difficulty, t.per_difficulty);
    }
  }
  agg.median_top1 = Median(agg.top1);
  agg.median_top5 = Median(agg.top5);
  for (MethodSummary& s : agg.methods) {
    s.median_coverage = Median(s.coverage);
    s.median_size = Median(s.avg_size);
    s.median_sscv = Median(s.sscv);
    for (auto& r : s.per_stratum) {
      if (r.count > 0) {
        r.coverage =
            static_cast<double>(r.covered) / static_cast<double>(r.count);
      }
    }
    for (auto& r : s.per_difficulty) {
      if (r.count == 0) continue;
      const double n = static_cast<double>(r.count);
      r.coverage = static_cast<double>(r.covered) / n;
      r.avg_size = static_cast<double>(r.total_size) / n;
    }
  }
  return agg;
}

TrialAggregate RunTrials(const ScoreMatrix& scores,
                         const TrialProtocol& protocol,
                         const std::vector<MethodPolicy>& methods) {
  const TrialRunner runner(scores, protocol, methods);
  std::vector<TrialResult> results;
  results.reserve(protocol.n_trials);
  for (size_t t = 0; t < protocol.n_trials; ++t) {
    results.push_back(runner.RunTrial(t));
  }
  return Aggregate(std::move(results), methods);
}

std::vector<MethodPolicy> StandardMethods(const TrialProtocol& protocol,
                                          bool randomized) {
  const auto make = [&](std::string label, Method method) {
    MethodPolicy p;
    p.label = std::move(label);
    p.spec.method = method;
    p.spec.alpha = protocol.alpha;
    p.spec.randomized = randomized;
    return p;
  };
  std::vector<MethodPolicy> out;
  out.push_back(make("Top K", Method::kFixedK));
  out.push_back(make("Naive", Method::kNaive));
  out.push_back(make("APS", Method::kAps));
  MethodPolicy raps = make("RAPS", Method::kRaps);
  if (protocol.tuning_size >= kMinTuningRows) {
    raps.lambda_policy = LambdaPolicy::kTuneSize;
  } else {
    raps.spec.lambda = 0.01;
    raps.spec.k_reg = 5;
  }
  out.push_back(std::move(raps));
  out.push_back(make("LAC", Method::kLac));
  return out;
}

}  // namespace cset
