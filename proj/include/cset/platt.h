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

// Temperature scaling: a single scalar T dividing the logits, fit by
// minimizing the mean negative log-likelihood of the labels.

#ifndef CSET_PLATT_H_
#define CSET_PLATT_H_

#include "cset/score_store.h"

namespace cset {

struct TemperatureBracket {
  double lo = 0.05;
  double hi = 20.0;
  double tol = 1e-4;
};

struct TemperatureFit {
  double temperature = 1.0;
  double nll_before = 0.0;  // At T = 1.
  double nll_after = 0.0;
  int iterations = 0;
};

// Mean of -log softmax(logits_i / T)[label_i]. Rows are accumulated with
// compensated summation in row order.
double Nll(const ScoreMatrix& logits, double temperature);

// Golden-section search on [lo, hi] until the bracket is narrower than tol.
// The returned temperature is the best of the search result, the bracket
// endpoints and T = 1 (when inside the bracket), so nll_after <= nll_before
// whenever 1 is in the bracket.
TemperatureFit FitTemperature(const ScoreMatrix& logits,
                              const TemperatureBracket& bracket = {});

}  // namespace cset

#endif  // CSET_PLATT_H_
