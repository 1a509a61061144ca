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

#ifndef CSET_TESTS_TEST_UTIL_H_
#define CSET_TESTS_TEST_UTIL_H_

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "cset/random.h"
#include "cset/score_store.h"

namespace cset::testing {

inline ScoreMatrix Probs(const std::vector<std::vector<double>>& rows,
                         const std::vector<uint32_t>& labels) {
  std::vector<double> flat;
  for (const auto& r : rows) flat.insert(flat.end(), r.begin(), r.end());
  return ScoreMatrix(rows.size(), rows.front().size(), std::move(flat), labels,
                     ScoreKind::kProbabilities);
}

inline ScoreMatrix Logits(const std::vector<std::vector<double>>& rows,
                          const std::vector<uint32_t>& labels) {
  std::vector<double> flat;
  for (const auto& r : rows) flat.insert(flat.end(), r.begin(), r.end());
  return ScoreMatrix(rows.size(), rows.front().size(), std::move(flat), labels,
                     ScoreKind::kLogits);
}

// One already-sorted row, label 0.
inline SortedScores OneRow(const std::vector<double>& row) {
  return SortScores(Probs({row}, {0}), 0);
}

// n x k random probability rows (exponential weights) with uniform labels.
inline ScoreMatrix RandomProbs(size_t n, size_t k, uint64_t seed) {
  SplitMix64 rng(seed);
  std::vector<double> flat(n * k);
  std::vector<uint32_t> labels(n);
  for (size_t i = 0; i < n; ++i) {
    double sum = 0;
    for (size_t j = 0; j < k; ++j) {
      flat[i * k + j] = -std::log(1.0 - rng.NextDouble());
      sum += flat[i * k + j];
    }
    for (size_t j = 0; j < k; ++j) flat[i * k + j] /= sum;
    labels[i] = static_cast<uint32_t>(rng.NextBounded(k));
  }
  return ScoreMatrix(n, k, std::move(flat), std::move(labels),
                     ScoreKind::kProbabilities);
}

// Fresh empty directory under the system temp dir.
inline std::string TempDir(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() /
                   ("cset_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir.string();
}

}  // namespace cset::testing

#endif  // CSET_TESTS_TEST_UTIL_H_
