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

// Evaluation metrics for prediction sets: marginal coverage and size, the
// size-stratified coverage violation (SSCV), size- and difficulty-stratified
// tables and set-size histograms.

#ifndef CSET_EVAL_H_
#define CSET_EVAL_H_

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "cset/conformal.h"

namespace cset {

// Inclusive integer range [lo, hi], used for set-size strata and difficulty
// bins.
struct SizeRange {
  size_t lo = 0;
  size_t hi = 0;

  bool Contains(size_t v) const { return lo <= v && v <= hi; }
  // "1", "2 to 3", ...
  std::string Label() const;
  bool operator==(const SizeRange&) const = default;
};

// 0-1, 2-3, 4-10, 11-100, 101-1000. Size-0 sets fall in the first stratum.
std::vector<SizeRange> DefaultSizeStrata();
// 1, 2-3, 4-6, 7-10, 11-100, 101-1000.
std::vector<SizeRange> DefaultDifficultyBins();

// Parses "0-1,2-3,4-10" (a single number is a one-element range). Throws
// UsageError for malformed, reversed or overlapping ranges.
std::vector<SizeRange> ParseRanges(const std::string& text);
std::string FormatRanges(std::span<const SizeRange> ranges);

// Checks that the ranges are disjoint and cover 1..num_classes. Ranges past
// num_classes are allowed (they simply stay empty).
void ValidatePartition(std::span<const SizeRange> ranges, size_t num_classes);

// Index of the range holding `value`. A value of 0 not covered by any range
// goes to the range holding 1. Returns nullopt when nothing matches.
std::optional<size_t> FindRange(std::span<const SizeRange> ranges,
                                size_t value);

// Per-example result of a prediction set.
struct SetOutcome {
  size_t size = 0;
  bool covered = false;
};

std::vector<SetOutcome> Outcomes(std::span<const PredictionSet> sets,
                                 std::span<const uint32_t> labels);

struct CoverageSize {
  double coverage = 0;
  double avg_size = 0;
};

CoverageSize CoverageAndSize(std::span<const SetOutcome> outcomes);
CoverageSize CoverageAndSize(std::span<const PredictionSet> sets,
                             std::span<const uint32_t> labels);

struct StratumRow {
  SizeRange range;
  size_t count = 0;
  size_t covered = 0;
  std::optional<double> coverage;  // Absent for empty strata.
};

// Throws DataError if a size falls in no stratum.
std::vector<StratumRow> StratifiedCoverage(std::span<const SetOutcome> outcomes,
                                           std::span<const SizeRange> strata);

// sup over nonempty strata of |stratum coverage - (1 - alpha)|.
double Sscv(std::span<const SetOutcome> outcomes,
            std::span<const SizeRange> strata, double alpha);
double Sscv(std::span<const PredictionSet> sets,
            std::span<const uint32_t> labels, std::span<const SizeRange> strata,
            double alpha);

struct DifficultyRow {
  SizeRange bin;
  size_t count = 0;
  size_t covered = 0;
  size_t total_size = 0;
  std::optional<double> coverage;
  std::optional<double> avg_size;
};

// Groups examples by the 1-based rank of the true label.
std::vector<DifficultyRow> DifficultyTable(std::span<const SetOutcome> outcomes,
                                           std::span<const uint32_t> label_ranks,
                                           std::span<const SizeRange> bins);

std::map<size_t, size_t> SizeHistogram(std::span<const SetOutcome> outcomes);

struct EvalReport {
  double coverage = 0;
  double avg_size = 0;
  double sscv = 0;
  std::map<size_t, size_t> size_hist;
  std::vector<StratumRow> per_stratum;
  std::vector<DifficultyRow> per_difficulty;
};

EvalReport Evaluate(std::span<const SetOutcome> outcomes,
                    std::span<const uint32_t> label_ranks, double alpha,
                    std::span<const SizeRange> strata,
                    std::span<const SizeRange> bins);

// Outcomes of `model` on every row, with u_i = PredictionU(seed, i).
std::vector<SetOutcome> EvaluateModel(const ConformalModel& model,
                                      const SortedScores& scores,
                                      uint64_t seed);

// Median of the values; mean of the two middle values for even counts.
double Median(std::vector<double> values);

}  // namespace cset

#endif  // CSET_EVAL_H_
