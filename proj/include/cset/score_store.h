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

// Score matrices: loading, validation, softmax, per-row sorting and seeded
// splitting. Every other module consumes these types.
//
// File formats
//
//   CSV:     header "scores,K=<K>" (optionally followed by ",kind=logits" or
//            ",kind=probabilities"; probabilities when absent), then one line
//            per example: K decimal scores and an integer label.
//   Binary:  "CSET1", u8 kind (0 = logits, 1 = probabilities), u64 n, u64 K,
//            n*K f32 scores row-major, n u32 labels. All little-endian.

#ifndef CSET_SCORE_STORE_H_
#define CSET_SCORE_STORE_H_

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace cset {

enum class ScoreKind : uint8_t { kLogits = 0, kProbabilities = 1 };

enum class ScoreFormat { kCsv, kBinary };

const char* ScoreKindName(ScoreKind kind);

// Tolerances for probability rows. Rows within kRowSumTolerance of 1 are kept
// as is; rows within kRowSumRenormalize are divided by their sum; anything
// else is rejected.
inline constexpr double kRowSumTolerance = 1e-6;
inline constexpr double kRowSumRenormalize = 1e-3;

// n x K class scores with one label per row. Immutable once constructed; the
// constructor enforces every invariant (labels in range, finite values,
// probability rows normalized).
class ScoreMatrix {
 public:
  ScoreMatrix(size_t rows, size_t classes, std::vector<double> scores,
              std::vector<uint32_t> labels, ScoreKind kind);

  size_t rows() const { return rows_; }
  size_t classes() const { return classes_; }
  ScoreKind kind() const { return kind_; }

  std::span<const double> row(size_t i) const {
    return {scores_.data() + i * classes_, classes_};
  }
  uint32_t label(size_t i) const { return labels_[i]; }
  std::span<const uint32_t> labels() const { return labels_; }
  std::span<const double> data() const { return scores_; }

  // Rows in the given order. Indices must be < rows() and `indices` nonempty.
  ScoreMatrix Subset(std::span<const size_t> indices) const;

 private:
  size_t rows_;
  size_t classes_;
  std::vector<double> scores_;
  std::vector<uint32_t> labels_;
  ScoreKind kind_;
};

ScoreMatrix LoadScores(const std::string& path, ScoreFormat format);
void SaveScores(const ScoreMatrix& matrix, const std::string& path,
                ScoreFormat format);

// ".csv" selects CSV; everything else is binary.
ScoreFormat FormatFromPath(const std::string& path);
ScoreFormat ParseScoreFormat(const std::string& name);

// Row-wise softmax of logits at the given temperature, stabilized by
// subtracting the row max.
ScoreMatrix Softmax(const ScoreMatrix& logits, double temperature);

// One row of a SortedScores. `sorted` is nonincreasing, `perm[j]` is the class
// at 0-based position j, `cumsum[j]` = sorted[0] + ... + sorted[j].
struct SortedRow {
  std::span<const double> sorted;
  std::span<const double> cumsum;
  std::span<const uint32_t> perm;

  size_t size() const { return sorted.size(); }
  // Mass of the classes strictly ahead of the 1-based rank.
  double MassAbove(size_t rank) const {
    return rank <= 1 ? 0.0 : cumsum[rank - 2];
  }
  // Score at the 1-based rank.
  double ScoreAt(size_t rank) const { return sorted[rank - 1]; }
};

// Per-row descending sort with the class permutation, running sums and the
// 1-based rank of each row's label.
class SortedScores {
 public:
  size_t rows() const { return rows_; }
  size_t classes() const { return classes_; }

  SortedRow row(size_t i) const {
    const size_t offset = i * classes_;
    return {{sorted_.data() + offset, classes_},
            {cumsum_.data() + offset, classes_},
            {perm_.data() + offset, classes_}};
  }
  uint32_t label(size_t i) const { return labels_[i]; }
  std::span<const uint32_t> labels() const { return labels_; }
  // 1-based position of the label in the row's permutation.
  size_t LabelRank(size_t i) const { return label_ranks_[i]; }
  std::span<const uint32_t> label_ranks() const { return label_ranks_; }

  SortedScores Subset(std::span<const size_t> indices) const;

 private:
  friend SortedScores SortScores(const ScoreMatrix&, uint64_t);
  friend SortedScores SortAnyScores(const ScoreMatrix&, uint64_t);
  friend SortedScores ApplyTemperature(const SortedScores&, double);

  size_t rows_ = 0;
  size_t classes_ = 0;
  std::vector<double> sorted_;
  std::vector<double> cumsum_;
  std::vector<uint32_t> perm_;
  std::vector<uint32_t> labels_;
  std::vector<uint32_t> label_ranks_;
};

// Sorts probability rows. Exact ties are broken by a random order derived from
// (tie_seed, row index, class index), so the result is reproducible and
// independent of the sort implementation. Throws on logits.
SortedScores SortScores(const ScoreMatrix& probabilities, uint64_t tie_seed);

// Same ordering for either kind. For logits the `cumsum` holds running sums of
// logits and is only meaningful after ApplyTemperature.
SortedScores SortAnyScores(const ScoreMatrix& matrix, uint64_t tie_seed);

// Softmax at `temperature` applied to sorted logits. Softmax is monotone, so
// the permutation is reused and the result equals
// SortScores(Softmax(logits, temperature)) up to tie handling.
SortedScores ApplyTemperature(const SortedScores& sorted_logits,
                              double temperature);

// Partition sizes for tuning / calibration / evaluation. Rows not assigned to
// any partition are dropped.
struct SplitSpec {
  uint64_t seed = 0;
  size_t tuning = 0;
  size_t calibration = 0;
  size_t evaluation = 0;

  // Sizes from fractions of n, each rounded down.
  static SplitSpec FromFractions(size_t n, double tuning, double calibration,
                                 double evaluation, uint64_t seed);
};

struct SplitIndices {
  std::vector<size_t> tuning;
  std::vector<size_t> calibration;
  std::vector<size_t> evaluation;
};

// Seeded Fisher-Yates shuffle of 0..n-1 cut into the three partitions.
SplitIndices SplitRows(size_t n, const SplitSpec& spec);

struct ScoreSplit {
  std::optional<ScoreMatrix> tuning;
  std::optional<ScoreMatrix> calibration;
  std::optional<ScoreMatrix> evaluation;
};

// Empty partitions come back as std::nullopt.
ScoreSplit Split(const ScoreMatrix& matrix, const SplitSpec& spec);

}  // namespace cset

#endif  // CSET_SCORE_STORE_H_
