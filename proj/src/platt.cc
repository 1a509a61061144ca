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

#include "cset/platt.h"

#include <algorithm>
#include <cmath>

#include "cset/error.h"

namespace cset {
namespace {

// Neumaier variant of Kahan summation.
class CompensatedSum {
 public:
  void Add(double x) {
    const double t = sum_ + x;
    if (std::abs(sum_) >= std::abs(x)) {
      compensation_ += (sum_ - t) + x;
    } else {
      compensation_ += (x - t) + sum_;
    }
    sum_ = t;
  }
  double value() const { return sum_ + compensation_; }

 private:
  double sum_ = 0;
  double compensation_ = 0;
};

void CheckLogits(const ScoreMatrix& m) {
  if (m.kind() != ScoreKind::kLogits) {
    throw UsageError("temperature scaling expects logits");
  }
}

}  // namespace

double Nll(const ScoreMatrix& logits, double temperature) {
  CheckLogits(logits);
  if (!(temperature > 0) || !std::isfinite(temperature)) {
    throw UsageError("temperature must be positive");
  }
  CompensatedSum total;
  for (size_t i = 0; i < logits.rows(); ++i) {
    const auto row = logits.row(i);
    const double max = *std::max_element(row.begin(), row.end());
    double z = 0;
    for (const double l : row) z += std::exp((l - max) / temperature);
    // -log p_y = log z - (l_y - max) / T
    total.Add(std::log(z) - (row[logits.label(i)] - max) / temperature);
  }
  return total.value() / static_cast<double>(logits.rows());
}

TemperatureFit FitTemperature(const ScoreMatrix& logits,
                              const TemperatureBracket& bracket) {
  CheckLogits(logits);
  if (!(bracket.lo > 0) || !(bracket.lo < bracket.hi) || !(bracket.tol > 0)) {
    throw UsageError("invalid temperature bracket: need 0 < t_lo < t_hi, tol > 0");
  }
  const auto f = [&](double t) { return Nll(logits, t); };
  const double inv_phi = (std::sqrt(5.0) - 1.0) / 2.0;

  double a = bracket.lo;
  double b = bracket.hi;
  double c = b - inv_phi * (b - a);
  double d = a + inv_phi * (b - a);
  double fc = f(c);
  double fd = f(d);
  int iterations = 0;
  while (b - a > bracket.tol) {
    if (fc <= fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - inv_phi * (b - a);
      fc = f(c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + inv_phi * (b - a);
      fd = f(d);
    }
    ++iterations;
  }

  TemperatureFit fit;
  fit.iterations = iterations;
  fit.nll_before = f(1.0);
  fit.temperature = fc <= fd ? c : d;
  fit.nll_after = std::min(fc, fd);
  const auto consider = [&](double t, double value) {
    if (value < fit.nll_after) {
      fit.temperature = t;
      fit.nll_after = value;
    }
  };
  const double mid = 0.5 * (a + b);
  consider(mid, f(mid));
  consider(bracket.lo, f(bracket.lo));
  consider(bracket.hi, f(bracket.hi));
  if (bracket.lo <= 1.0 && 1.0 <= bracket.hi) consider(1.0, fit.nll_before);
  return fit;
}

}  // namespace cset
