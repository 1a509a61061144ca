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

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>

#include "cset/error.h"
#include "cset/random.h"

namespace cset {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double Penalty(const MethodSpec& spec, size_t rank) {
  const double lambda = spec.EffectiveLambda();
  if (lambda == 0.0) return 0.0;
  const double excess =
      static_cast<double>(rank) - static_cast<double>(spec.k_reg);
  return excess > 0 ? lambda * excess : 0.0;
}

// Score without range checks, for the hot loops.
double ScoreUnchecked(const SortedRow& row, size_t rank, double u,
                      const MethodSpec& spec) {
  if (spec.method == Method::kLac) return 1.0 - row.ScoreAt(rank);
  return row.MassAbove(rank) + u * row.ScoreAt(rank) + Penalty(spec, rank);
}

bool HasScore(Method m) {
  return m == Method::kAps || m == Method::kRaps || m == Method::kLac;
}

// Shortest prefix reaching 1 - alpha cumulative mass (capped at K).
size_t NaiveLength(const SortedRow& row, double alpha) {
  const double target = 1.0 - alpha;
  for (size_t j = 0; j < row.size(); ++j) {
    if (row.cumsum[j] >= target) return j + 1;
  }
  return row.size();
}

// Probability that the naive procedure drops the last class.
double NaiveDropProbability(const SortedRow& row, size_t length,
                            double alpha) {
  const double s = row.ScoreAt(length);
  if (!(s > 0)) return 0.0;
  const double v = (row.cumsum[length - 1] - (1.0 - alpha)) / s;
  return std::clamp(v, 0.0, 1.0);
}

size_t ThresholdPrefix(const ConformalModel& model, const SortedRow& row,
                       double u) {
  const size_t k = row.size();
  if (std::isinf(model.tau_hat) && model.tau_hat > 0) return k;
  size_t count = 0;
  while (count < k &&
         ScoreUnchecked(row, count + 1, u, model.spec) <= model.tau_hat) {
    ++count;
  }
  return count;
}

std::string FormatDouble(double value) {
  if (std::isinf(value)) return value > 0 ? "inf" : "-inf";
  std::array<char, 32> buffer;
  const auto result =
      std::to_chars(buffer.data(), buffer.data() + buffer.size(), value);
  return std::string(buffer.data(), result.ptr);
}

double ParseDoubleField(const std::string& key, const std::string& text) {
  if (text == "inf" || text == "+inf") return kInf;
  if (text == "-inf") return -kInf;
  double value = 0;
  const auto result =
      std::from_chars(text.data(), text.data() + text.size(), value);
  if (result.ec != std::errc() || result.ptr != text.data() + text.size()) {
    throw DataError("model file: bad value for " + key + ": \"" + text + "\"");
  }
  return value;
}

template <typename Int>
Int ParseIntField(const std::string& key, const std::string& text) {
  Int value = 0;
  const auto result =
      std::from_chars(text.data(), text.data() + text.size(), value);
  if (result.ec != std::errc() || result.ptr != text.data() + text.size()) {
    throw DataError("model file: bad value for " + key + ": \"" + text + "\"");
  }
  return value;
}

bool ParseBoolField(const std::string& key, const std::string& text) {
  if (text == "true") return true;
  if (text == "false") return false;
  throw DataError("model file: bad value for " + key + ": \"" + text + "\"");
}

}  // namespace

const char* MethodName(Method method) {
  switch (method) {
    case Method::kNaive:
      return "naive";
    case Method::kAps:
      return "aps";
    case Method::kRaps:
      return "raps";
    case Method::kLac:
      return "lac";
    case Method::kFixedK:
      return "fixed_k";
  }
  return "unknown";
}

Method ParseMethod(const std::string& name) {
  if (name == "naive") return Method::kNaive;
  if (name == "aps") return Method::kAps;
  if (name == "raps") return Method::kRaps;
  if (name == "lac") return Method::kLac;
  if (name == "fixed_k" || name == "fixed-k" || name == "topk") {
    return Method::kFixedK;
  }
  throw UsageError("unknown method \"" + name +
                   "\" (expected naive, aps, raps, lac or fixed_k)");
}

void MethodSpec::Validate() const {
  if (!(alpha > 0 && alpha < 1)) throw UsageError("alpha must be in (0,1)");
  if (!(lambda >= 0) || !std::isfinite(lambda)) {
    throw UsageError("lambda must be a finite nonnegative number");
  }
  if (k_reg < 1) throw UsageError("k_reg must be at least 1");
}

size_t ConformalRank(size_t n, double alpha) {
  const double q = static_cast<double>(n + 1) * (1.0 - alpha);
  double rank = std::ceil(q);
  if (rank - q > 1.0 - 1e-9) rank -= 1.0;
  return std::max<size_t>(1, static_cast<size_t>(rank));
}

double ConformalQuantile(std::vector<double> scores, double alpha) {
  if (scores.empty()) throw DataError("empty calibration set");
  const size_t rank = ConformalRank(scores.size(), alpha);
  if (rank > scores.size()) return kInf;
  const auto nth = scores.begin() + static_cast<std::ptrdiff_t>(rank - 1);
  std::nth_element(scores.begin(), nth, scores.end());
  return *nth;
}

double ConformityScore(const SortedRow& row, size_t rank, double u,
                       const MethodSpec& spec) {
  if (!HasScore(spec.method)) {
    throw UsageError(std::string("method ") + MethodName(spec.method) +
                     " has no conformity score");
  }
  if (rank < 1 || rank > row.size()) {
    throw UsageError("rank " + std::to_string(rank) + " out of range [1, " +
                     std::to_string(row.size()) + "]");
  }
  return ScoreUnchecked(row, rank, u, spec);
}

std::vector<double> CalibrationScores(const SortedScores& calibration,
                                      const MethodSpec& spec, uint64_t seed) {
  std::vector<double> scores(calibration.rows());
  for (size_t i = 0; i < calibration.rows(); ++i) {
    const double u = spec.randomized
                         ? CounterUniform(seed, streams::kCalibrationU, i)
                         : 1.0;
    scores[i] = ConformityScore(calibration.row(i), calibration.LabelRank(i),
                                u, spec);
  }
  return scores;
}

ConformalModel Calibrate(const SortedScores& calibration,
                         const MethodSpec& spec, uint64_t seed) {
  spec.Validate();
  if (!HasScore(spec.method)) {
    throw UsageError(std::string("calibrate does not apply to ") +
                     MethodName(spec.method));
  }
  if (calibration.rows() == 0) throw DataError("empty calibration set");
  ConformalModel model;
  model.spec = spec;
  model.seed = seed;
  model.n_cal = calibration.rows();
  model.num_classes = calibration.classes();
  model.tau_hat =
      ConformalQuantile(CalibrationScores(calibration, spec, seed), spec.alpha);
  return model;
}

ConformalModel MakeNaiveModel(const MethodSpec& spec, size_t num_classes) {
  spec.Validate();
  ConformalModel model;
  model.spec = spec;
  model.spec.method = Method::kNaive;
  model.tau_hat = 1.0 - spec.alpha;
  model.num_classes = num_classes;
  return model;
}

size_t PredictSize(const ConformalModel& model, const SortedRow& row,
                   double u) {
  const MethodSpec& spec = model.spec;
  switch (spec.method) {
    case Method::kNaive: {
      const size_t length = NaiveLength(row, spec.alpha);
      if (!spec.randomized) return length;
      // Drop the last class when U = 1 - u <= V, so u = 0 keeps the
      // largest set.
      const double drop = NaiveDropProbability(row, length, spec.alpha);
      return drop > 0 && (1.0 - u) <= drop ? length - 1 : length;
    }
    case Method::kFixedK: {
      const size_t k = static_cast<size_t>(model.k_star.value_or(1));
      const double mix = model.mix_prob.value_or(0.0);
      if (spec.randomized && mix > 0 && u >= 1.0 - mix) return k - 1;
      return std::min(k, row.size());
    }
    case Method::kAps:
    case Method::kRaps:
    case Method::kLac: {
      if (!spec.randomized) {
        size_t size = ThresholdPrefix(model, row, 1.0);
        if (spec.boundary_inclusive && size < row.size()) ++size;
        return size;
      }
      return ThresholdPrefix(model, row, u);
    }
  }
  return 0;
}

PredictionSet Predict(const ConformalModel& model, const SortedRow& row,
                      double u) {
  const size_t size = PredictSize(model, row, u);
  PredictionSet set;
  set.classes.assign(row.perm.begin(),
                     row.perm.begin() + static_cast<std::ptrdiff_t>(size));
  if (model.spec.randomized) set.u = u;
  return set;
}

BoundarySizes SetSizeGivenU(const ConformalModel& model, const SortedRow& row) {
  BoundarySizes out;
  const MethodSpec& spec = model.spec;
  if (!spec.randomized) {
    out.size_at_u0 = out.size_at_u1 = PredictSize(model, row, 1.0);
    return out;
  }
  switch (spec.method) {
    case Method::kNaive: {
      const size_t length = NaiveLength(row, spec.alpha);
      const double drop = NaiveDropProbability(row, length, spec.alpha);
      out.size_at_u0 = length;
      out.size_at_u1 = drop > 0 ? length - 1 : length;
      out.v = drop > 0 ? 1.0 - drop : 0.0;
      break;
    }
    case Method::kFixedK: {
      const size_t k = static_cast<size_t>(model.k_star.value_or(1));
      const double mix = model.mix_prob.value_or(0.0);
      out.size_at_u0 = k;
      out.size_at_u1 = mix > 0 ? k - 1 : k;
      out.v = mix > 0 ? 1.0 - mix : 0.0;
      break;
    }
    case Method::kAps:
    case Method::kRaps:
    case Method::kLac: {
      out.size_at_u1 = ThresholdPrefix(model, row, 1.0);
      out.size_at_u0 = ThresholdPrefix(model, row, 0.0);
      if (out.size_at_u0 > out.size_at_u1) {
        const size_t rank = out.size_at_u0;
        const double s = row.ScoreAt(rank);
        const double slack =
            model.tau_hat - row.MassAbove(rank) - Penalty(spec, rank);
        out.v = s > 0 ? std::clamp(slack / s, 0.0, 1.0) : 1.0;
      }
      break;
    }
  }
  if (out.size_at_u0 == out.size_at_u1) out.v = 0.0;
  return out;
}

double PredictionU(uint64_t seed, size_t row_index) {
  return CounterUniform(seed, streams::kPredictionU, row_index);
}

std::vector<PredictionSet> PredictAll(const ConformalModel& model,
                                      const SortedScores& scores,
                                      uint64_t seed) {
  std::vector<PredictionSet> sets;
  sets.reserve(scores.rows());
  for (size_t i = 0; i < scores.rows(); ++i) {
    sets.push_back(Predict(model, scores.row(i), PredictionU(seed, i)));
  }
  return sets;
}

std::vector<size_t> PredictSizes(const ConformalModel& model,
                                 const SortedScores& scores, uint64_t seed) {
  std::vector<size_t> sizes(scores.rows());
  for (size_t i = 0; i < scores.rows(); ++i) {
    sizes[i] = PredictSize(model, scores.row(i), PredictionU(seed, i));
  }
  return sizes;
}

std::string SerializeModel(const ConformalModel& model) {
  std::ostringstream out;
  out << "# cset conformal model\n";
  out << "method = " << MethodName(model.spec.method) << '\n';
  out << "alpha = " << FormatDouble(model.spec.alpha) << '\n';
  out << "lambda = " << FormatDouble(model.spec.lambda) << '\n';
  out << "k_reg = " << model.spec.k_reg << '\n';
  out << "randomized = " << (model.spec.randomized ? "true" : "false") << '\n';
  out << "boundary_inclusive = "
      << (model.spec.boundary_inclusive ? "true" : "false") << '\n';
  out << "tau_hat = " << FormatDouble(model.tau_hat) << '\n';
  out << "n_cal = " << model.n_cal << '\n';
  out << "seed = " << model.seed << '\n';
  out << "num_classes = " << model.num_classes << '\n';
  if (model.k_star) out << "k_star = " << *model.k_star << '\n';
  if (model.mix_prob) out << "mix_prob = " << FormatDouble(*model.mix_prob) << '\n';
  if (model.temperature) {
    out << "temperature = " << FormatDouble(*model.temperature) << '\n';
  }
  return out.str();
}

ConformalModel ParseModel(const std::string& text) {
  std::map<std::string, std::string> fields;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos || line[first] == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw DataError("model file: expected \"key = value\", got \"" + line +
                      "\"");
    }
    const auto trim = [](std::string s) {
      const auto b = s.find_first_not_of(" \t\r");
      const auto e = s.find_last_not_of(" \t\r");
      return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
    };
    fields[trim(line.substr(0, eq))] = trim(line.substr(eq + 1));
  }
  const auto get = [&](const std::string& key) -> const std::string& {
    const auto it = fields.find(key);
    if (it == fields.end()) throw DataError("model file: missing " + key);
    return it->second;
  };

  ConformalModel model;
  model.spec.method = ParseMethod(get("method"));
  model.spec.alpha = ParseDoubleField("alpha", get("alpha"));
  model.spec.lambda = ParseDoubleField("lambda", get("lambda"));
  model.spec.k_reg = ParseIntField<int>("k_reg", get("k_reg"));
  model.spec.randomized = ParseBoolField("randomized", get("randomized"));
  if (fields.count("boundary_inclusive")) {
    model.spec.boundary_inclusive =
        ParseBoolField("boundary_inclusive", get("boundary_inclusive"));
  }
  model.tau_hat = ParseDoubleField("tau_hat", get("tau_hat"));
  model.n_cal = ParseIntField<size_t>("n_cal", get("n_cal"));
  model.seed = ParseIntField<uint64_t>("seed", get("seed"));
  if (fields.count("num_classes")) {
    model.num_classes = ParseIntField<size_t>("num_classes", get("num_classes"));
  }
  if (fields.count("k_star")) {
    model.k_star = ParseIntField<int>("k_star", get("k_star"));
  }
  if (fields.count("mix_prob")) {
    model.mix_prob = ParseDoubleField("mix_prob", get("mix_prob"));
  }
  if (fields.count("temperature")) {
    model.temperature = ParseDoubleField("temperature", get("temperature"));
    if (!(*model.temperature > 0) || !std::isfinite(*model.temperature)) {
      throw DataError("model file: temperature must be positive");
    }
  }
  try {
    model.spec.Validate();
  } catch (const Error& e) {
    throw DataError(std::string("model file: ") + e.what());
  }
  if (model.spec.method == Method::kFixedK && !model.k_star) {
    throw DataError("model file: fixed_k model without k_star");
  }
  return model;
}

void SaveModel(const ConformalModel& model, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path);
  out << SerializeModel(model);
  if (!out) throw IoError("write failed for " + path);
}

ConformalModel LoadModel(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path);
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return ParseModel(buffer.str());
}

}  // namespace cset
