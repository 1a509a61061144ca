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

#include "cset/synth.h"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <sstream>

#include <nlohmann/json.hpp>

#include "cset/error.h"
#include "cset/random.h"
#include "cset/tuning.h"

namespace cset {
namespace {

// exp(-700) keeps every probability strictly positive.
constexpr double kLogFloor = -700.0;

// log of a Gamma(shape, 1) draw. For shape < 1 this uses
// Gamma(shape) = Gamma(shape + 1) * U^(1/shape), kept in log space so tiny
// shapes do not underflow.
double LogGamma(double shape, SplitMix64& rng) {
  if (shape >= 1.0) {
    std::gamma_distribution<double> gamma(shape, 1.0);
    return std::log(gamma(rng));
  }
  std::gamma_distribution<double> gamma(shape + 1.0, 1.0);
  double u = rng.NextDouble();
  while (u == 0.0) u = rng.NextDouble();
  return std::log(gamma(rng)) + std::log(u) / shape;
}

// Normalizes exp(log_values) into `out`.
void NormalizeLogs(std::span<const double> log_values, std::span<double> out) {
  const double max = *std::max_element(log_values.begin(), log_values.end());
  double sum = 0;
  for (size_t j = 0; j < out.size(); ++j) {
    out[j] = std::exp(std::max(log_values[j] - max, kLogFloor));
    sum += out[j];
  }
  for (double& v : out) v /= sum;
}

// Descending order, ties by class index.
std::vector<uint32_t> DescendingOrder(std::span<const double> p) {
  std::vector<uint32_t> order(p.size());
  std::iota(order.begin(), order.end(), 0u);
  std::stable_sort(order.begin(), order.end(),
                   [&](uint32_t a, uint32_t b) { return p[a] > p[b]; });
  return order;
}

}  // namespace

Corruption Corruption::Parse(const std::string& text) {
  if (text == "none") return None();
  const auto colon = text.find(':');
  const std::string name = text.substr(0, colon);
  const std::string arg =
      colon == std::string::npos ? std::string() : text.substr(colon + 1);
  try {
    if (name == "temperature" && !arg.empty()) {
      size_t used = 0;
      const double t = std::stod(arg, &used);
      if (used == arg.size() && t > 0 && std::isfinite(t)) {
        return Temperature(t);
      }
    }
    if ((name == "tail_permute" || name == "tail-permute") && !arg.empty()) {
      size_t used = 0;
      const unsigned long m = std::stoul(arg, &used);
      if (used == arg.size()) return TailPermute(m);
    }
  } catch (const std::exception&) {
  }
  throw UsageError("unknown corruption \"" + text +
                   "\" (expected none, temperature:<t> or tail_permute:<m>)");
}

std::string Corruption::ToString() const {
  switch (kind) {
    case Kind::kNone:
      return "none";
    case Kind::kTemperature: {
      std::ostringstream out;
      out << "temperature:" << temperature;
      return out.str();
    }
    case Kind::kTailPermute:
      return "tail_permute:" + std::to_string(top_m);
  }
  return "none";
}

void SynthSpec::Validate() const {
  if (n == 0) throw UsageError("synthetic n must be positive");
  if (k < 2) throw UsageError("synthetic K must be at least 2");
  if (!(concentration > 0) || !std::isfinite(concentration)) {
    throw UsageError("concentration must be positive");
  }
  if (corruption.kind == Corruption::Kind::kTemperature &&
      !(corruption.temperature > 0)) {
    throw UsageError("corruption temperature must be positive");
  }
}

SynthData Generate(const SynthSpec& spec) {
  spec.Validate();
  const size_t n = spec.n;
  const size_t k = spec.k;
  const double shape = spec.concentration / static_cast<double>(k);

  std::vector<double> truth(n * k);
  std::vector<double> observed(n * k);
  std::vector<uint32_t> labels(n);
  std::vector<double> logs(k);

  for (size_t i = 0; i < n; ++i) {
    SplitMix64 rng(DeriveSeed(spec.seed, streams::kSynth, i));
    for (double& l : logs) l = LogGamma(shape, rng);
    const std::span<double> p(truth.data() + i * k, k);
    NormalizeLogs(logs, p);

    // Inverse-CDF label draw; falls back to the last class with positive
    // mass when rounding leaves the target above the total.
    const double target = rng.NextDouble();
    double running = 0;
    uint32_t label = static_cast<uint32_t>(k - 1);
    for (size_t j = 0; j < k; ++j) {
      running += p[j];
      if (target < running) {
        label = static_cast<uint32_t>(j);
        break;
      }
    }
    labels[i] = label;

    const std::span<double> q(observed.data() + i * k, k);
    switch (spec.corruption.kind) {
      case Corruption::Kind::kNone:
        std::copy(p.begin(), p.end(), q.begin());
        break;
      case Corruption::Kind::kTemperature: {
        const double t = spec.corruption.temperature;
        for (size_t j = 0; j < k; ++j) logs[j] = std::log(p[j]) / t;
        NormalizeLogs(logs, q);
        break;
      }
      case Corruption::Kind::kTailPermute: {
        std::copy(p.begin(), p.end(), q.begin());
        const size_t m = spec.corruption.top_m;
        if (m >= k) break;
        const auto order = DescendingOrder(p);
        // Fisher-Yates over the tail positions: values move between the tail
        // classes, the top m are untouched.
        const size_t tail = k - m;
        for (size_t a = tail; a > 1; --a) {
          const size_t b = rng.NextBounded(a);
          std::swap(q[order[m + a - 1]], q[order[m + b]]);
        }
        const double sum = std::accumulate(q.begin(), q.end(), 0.0);
        for (double& v : q) v /= sum;
        break;
      }
    }
  }
  std::vector<uint32_t> labels_copy = labels;
  return {ScoreMatrix(n, k, std::move(truth), std::move(labels_copy),
                      ScoreKind::kProbabilities),
          ScoreMatrix(n, k, std::move(observed), std::move(labels),
                      ScoreKind::kProbabilities)};
}

std::string SynthManifest(const SynthSpec& spec) {
  nlohmann::ordered_json j;
  j["generator"] = "dirichlet";
  j["n"] = spec.n;
  j["K"] = spec.k;
  j["concentration"] = spec.concentration;
  j["dirichlet_parameter"] = spec.concentration / static_cast<double>(spec.k);
  j["corruption"] = spec.corruption.ToString();
  j["seed"] = spec.seed;
  j["files"] = {{"true_probs", "true_probs.cset"},
                {"observed_scores", "scores.cset"}};
  return j.dump(2) + "\n";
}

double ConditionalCoverage(const ConformalModel& model, const SortedRow& row,
                           std::span<const double> true_probs) {
  const BoundarySizes b = SetSizeGivenU(model, row);
  double covered = 0;
  for (size_t j = 0; j < b.size_at_u1; ++j) covered += true_probs[row.perm[j]];
  if (b.size_at_u0 > b.size_at_u1) {
    covered += b.v * true_probs[row.perm[b.size_at_u0 - 1]];
  }
  return covered;
}

OracleCoverageResult OracleCoverage(const SynthSpec& spec,
                                    const MethodSpec& method, size_t n_cal,
                                    size_t n_eval, size_t n_trials) {
  method.Validate();
  if (n_trials == 0 || n_eval == 0) {
    throw UsageError("oracle coverage needs at least one trial and test row");
  }
  OracleCoverageResult result;
  for (size_t t = 0; t < n_trials; ++t) {
    const uint64_t trial_seed = DeriveSeed(spec.seed, streams::kTrial, t);
    ConformalModel model;
    if (method.method == Method::kNaive) {
      model = MakeNaiveModel(method, spec.k);
    } else {
      if (n_cal == 0) throw UsageError("calibration size must be positive");
      SynthSpec cal_spec = spec;
      cal_spec.n = n_cal;
      cal_spec.seed = DeriveSeed(trial_seed, 0);
      const SortedScores cal =
          SortScores(Generate(cal_spec).observed, DeriveSeed(trial_seed, 1));
      model = method.method == Method::kFixedK
                  ? MakeFixedKModel(cal, method.alpha, method.randomized,
                                    trial_seed)
                  : Calibrate(cal, method, DeriveSeed(trial_seed, 2));
    }
    SynthSpec eval_spec = spec;
    eval_spec.n = n_eval;
    eval_spec.seed = DeriveSeed(trial_seed, 3);
    const SynthData test = Generate(eval_spec);
    const SortedScores sorted =
        SortScores(test.observed, DeriveSeed(trial_seed, 4));
    double total = 0;
    for (size_t i = 0; i < n_eval; ++i) {
      total += ConditionalCoverage(model, sorted.row(i), test.true_probs.row(i));
    }
    result.per_trial.push_back(total / static_cast<double>(n_eval));
  }
  const double n = static_cast<double>(n_trials);
  result.mean =
      std::accumulate(result.per_trial.begin(), result.per_trial.end(), 0.0) / n;
  if (n_trials > 1) {
    double ss = 0;
    for (const double c : result.per_trial) ss += (c - result.mean) * (c - result.mean);
    result.standard_error = std::sqrt(ss / (n - 1) / n);
  }
  return result;
}

}  // namespace cset
