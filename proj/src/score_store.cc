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

#include "cset/score_store.h"

#include <algorithm>
#include <array>
#include <bit>
#include <charconv>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <numeric>
#include <sstream>
#include <string_view>

#include "cset/error.h"
#include "cset/random.h"

namespace cset {
namespace {

constexpr std::array<char, 5> kMagic = {'C', 'S', 'E', 'T', '1'};

std::string AtRow(size_t row) { return " at row " + std::to_string(row); }

// Splits on commas without allocating per field.
std::vector<std::string_view> SplitFields(std::string_view line) {
  std::vector<std::string_view> fields;
  size_t start = 0;
  while (true) {
    const size_t comma = line.find(',', start);
    if (comma == std::string_view::npos) {
      fields.push_back(line.substr(start));
      break;
    }
    fields.push_back(line.substr(start, comma - start));
    start = comma + 1;
  }
  return fields;
}

std::string_view Trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) {
    s.remove_prefix(1);
  }
  while (!s.empty() &&
         (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) {
    s.remove_suffix(1);
  }
  return s;
}

bool ParseDouble(std::string_view text, double* value) {
  text = Trim(text);
  if (!text.empty() && text.front() == '+') text.remove_prefix(1);
  const auto result =
      std::from_chars(text.data(), text.data() + text.size(), *value);
  return result.ec == std::errc() && result.ptr == text.data() + text.size();
}

template <typename Int>
bool ParseInt(std::string_view text, Int* value) {
  text = Trim(text);
  const auto result =
      std::from_chars(text.data(), text.data() + text.size(), *value);
  return result.ec == std::errc() && result.ptr == text.data() + text.size();
}

void WriteShortest(std::ostream& out, double value) {
  std::array<char, 32> buffer;
  const auto result =
      std::to_chars(buffer.data(), buffer.data() + buffer.size(), value);
  out.write(buffer.data(), result.ptr - buffer.data());
}

ScoreMatrix LoadCsv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path);

  std::string line;
  if (!std::getline(in, line)) throw DataError("malformed header: empty file");
  const auto header = SplitFields(Trim(line));
  size_t classes = 0;
  ScoreKind kind = ScoreKind::kProbabilities;
  if (header.size() < 2 || Trim(header[0]) != "scores" ||
      Trim(header[1]).substr(0, 2) != "K=" ||
      !ParseInt(Trim(header[1]).substr(2), &classes)) {
    throw DataError("malformed header: expected \"scores,K=<K>\"");
  }
  for (size_t f = 2; f < header.size(); ++f) {
    const std::string_view field = Trim(header[f]);
    if (field == "kind=logits") {
      kind = ScoreKind::kLogits;
    } else if (field == "kind=probabilities") {
      kind = ScoreKind::kProbabilities;
    } else {
      throw DataError("malformed header: unknown field \"" +
                      std::string(field) + "\"");
    }
  }

  std::vector<double> scores;
  std::vector<uint32_t> labels;
  size_t row = 0;
  while (std::getline(in, line)) {
    const std::string_view trimmed = Trim(line);
    if (trimmed.empty()) continue;
    const auto fields = SplitFields(trimmed);
    if (fields.size() != classes + 1) {
      throw DataError("row-length mismatch" + AtRow(row) + ": expected " +
                      std::to_string(classes + 1) + " fields, got " +
                      std::to_string(fields.size()));
    }
    for (size_t j = 0; j < classes; ++j) {
      double value = 0;
      if (!ParseDouble(fields[j], &value)) {
        throw DataError("unparsable score" + AtRow(row));
      }
      scores.push_back(value);
    }
    int64_t label = 0;
    if (!ParseInt(fields[classes], &label)) {
      throw DataError("unparsable label" + AtRow(row));
    }
    if (label < 0 || static_cast<uint64_t>(label) >= classes) {
      throw DataError("label out of range" + AtRow(row));
    }
    labels.push_back(static_cast<uint32_t>(label));
    ++row;
  }
  return ScoreMatrix(row, classes, std::move(scores), std::move(labels), kind);
}

template <typename T>
T ReadLittleEndian(std::istream& in, const std::string& what) {
  std::array<unsigned char, sizeof(T)> bytes;
  if (!in.read(reinterpret_cast<char*>(bytes.data()), bytes.size())) {
    throw DataError("truncated file while reading " + what);
  }
  using U = std::conditional_t<sizeof(T) == 8, uint64_t,
                               std::conditional_t<sizeof(T) == 4, uint32_t,
                                                  uint8_t>>;
  U raw = 0;
  for (size_t b = 0; b < sizeof(T); ++b) {
    raw |= static_cast<U>(static_cast<U>(bytes[b]) << (8 * b));
  }
  return std::bit_cast<T>(raw);
}

template <typename T>
void WriteLittleEndian(std::ostream& out, T value) {
  using U = std::conditional_t<sizeof(T) == 8, uint64_t,
                               std::conditional_t<sizeof(T) == 4, uint32_t,
                                                  uint8_t>>;
  const U raw = std::bit_cast<U>(value);
  std::array<char, sizeof(T)> bytes;
  for (size_t b = 0; b < sizeof(T); ++b) {
    bytes[b] = static_cast<char>((raw >> (8 * b)) & 0xFF);
  }
  out.write(bytes.data(), bytes.size());
}

ScoreMatrix LoadBinary(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);

  std::array<char, kMagic.size()> magic;
  if (!in.read(magic.data(), magic.size()) || magic != kMagic) {
    throw DataError("malformed header: bad magic bytes");
  }
  const auto kind_flag = ReadLittleEndian<uint8_t>(in, "kind flag");
  if (kind_flag > 1) throw DataError("malformed header: unknown kind flag");
  const auto rows = ReadLittleEndian<uint64_t>(in, "row count");
  const auto classes = ReadLittleEndian<uint64_t>(in, "class count");
  if (rows == 0) throw DataError("empty matrix");
  if (classes < 2) throw DataError("malformed header: K must be at least 2");
  // Guard the allocation against a corrupt header.
  in.seekg(0, std::ios::end);
  const auto file_size = static_cast<uint64_t>(in.tellg());
  const uint64_t header_size = kMagic.size() + 1 + 8 + 8;
  if (classes > (file_size / 4) || rows > file_size / 4 ||
      header_size + rows * classes * 4 + rows * 4 != file_size) {
    throw DataError("row-length mismatch: file size does not match header");
  }
  in.seekg(static_cast<std::streamoff>(header_size));

  std::vector<double> scores(rows * classes);
  for (size_t i = 0; i < rows * classes; ++i) {
    scores[i] = ReadLittleEndian<float>(in, "scores");
  }
  std::vector<uint32_t> labels(rows);
  for (size_t i = 0; i < rows; ++i) {
    labels[i] = ReadLittleEndian<uint32_t>(in, "labels");
  }
  return ScoreMatrix(rows, classes, std::move(scores), std::move(labels),
                     static_cast<ScoreKind>(kind_flag));
}

}  // namespace

const char* ScoreKindName(ScoreKind kind) {
  return kind == ScoreKind::kLogits ? "logits" : "probabilities";
}

ScoreMatrix::ScoreMatrix(size_t rows, size_t classes,
                         std::vector<double> scores,
                         std::vector<uint32_t> labels, ScoreKind kind)
    : rows_(rows),
      classes_(classes),
      scores_(std::move(scores)),
      labels_(std::move(labels)),
      kind_(kind) {
  if (rows_ == 0) throw DataError("empty matrix");
  if (classes_ < 2) throw DataError("K must be at least 2");
  if (scores_.size() != rows_ * classes_) {
    throw DataError("score buffer holds " + std::to_string(scores_.size()) +
                    " values, expected n*K = " +
                    std::to_string(rows_ * classes_));
  }
  if (labels_.size() != rows_) {
    throw DataError("label count " + std::to_string(labels_.size()) +
                    " does not match n = " + std::to_string(rows_));
  }
  for (size_t i = 0; i < rows_; ++i) {
    if (labels_[i] >= classes_) throw DataError("label out of range" + AtRow(i));
    double* values = scores_.data() + i * classes_;
    double sum = 0;
    bool in_unit_interval = true;
    for (size_t j = 0; j < classes_; ++j) {
      if (!std::isfinite(values[j])) {
        throw DataError("non-finite value" + AtRow(i));
      }
      if (kind_ == ScoreKind::kProbabilities) {
        if (values[j] < 0) throw DataError("negative probability" + AtRow(i));
        if (values[j] > 1) in_unit_interval = false;
        sum += values[j];
      }
    }
    if (kind_ != ScoreKind::kProbabilities) continue;
    const double deviation = std::abs(sum - 1.0);
    if (deviation <= kRowSumTolerance && in_unit_interval) continue;
    if (deviation > kRowSumRenormalize) {
      throw DataError("probabilities do not sum to 1" + AtRow(i) +
                      " (sum = " + std::to_string(sum) + ")");
    }
    for (size_t j = 0; j < classes_; ++j) values[j] /= sum;
  }
}

ScoreMatrix ScoreMatrix::Subset(std::span<const size_t> indices) const {
  std::vector<double> scores;
  scores.reserve(indices.size() * classes_);
  std::vector<uint32_t> labels;
  labels.reserve(indices.size());
  for (const size_t i : indices) {
    const auto r = row(i);
    scores.insert(scores.end(), r.begin(), r.end());
    labels.push_back(labels_[i]);
  }
  return ScoreMatrix(indices.size(), classes_, std::move(scores),
                     std::move(labels), kind_);
}

ScoreFormat FormatFromPath(const std::string& path) {
  const std::string_view view(path);
  if (view.size() >= 4 && view.substr(view.size() - 4) == ".csv") {
    return ScoreFormat::kCsv;
  }
  return ScoreFormat::kBinary;
}

ScoreFormat ParseScoreFormat(const std::string& name) {
  if (name == "csv") return ScoreFormat::kCsv;
  if (name == "binary" || name == "bin") return ScoreFormat::kBinary;
  throw UsageError("unknown score format \"" + name +
                   "\" (expected csv or binary)");
}

ScoreMatrix LoadScores(const std::string& path, ScoreFormat format) {
  return format == ScoreFormat::kCsv ? LoadCsv(path) : LoadBinary(path);
}

void SaveScores(const ScoreMatrix& matrix, const std::string& path,
                ScoreFormat format) {
  if (format == ScoreFormat::kCsv) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path);
    out << "scores,K=" << matrix.classes();
    if (matrix.kind() == ScoreKind::kLogits) out << ",kind=logits";
    out << '\n';
    for (size_t i = 0; i < matrix.rows(); ++i) {
      for (const double v : matrix.row(i)) {
        WriteShortest(out, v);
        out << ',';
      }
      out << matrix.label(i) << '\n';
    }
    if (!out) throw IoError("write failed for " + path);
    return;
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path);
  out.write(kMagic.data(), kMagic.size());
  WriteLittleEndian<uint8_t>(out, static_cast<uint8_t>(matrix.kind()));
  WriteLittleEndian<uint64_t>(out, matrix.rows());
  WriteLittleEndian<uint64_t>(out, matrix.classes());
  for (const double v : matrix.data()) {
    WriteLittleEndian<float>(out, static_cast<float>(v));
  }
  for (const uint32_t label : matrix.labels()) {
    WriteLittleEndian<uint32_t>(out, label);
  }
  if (!out) throw IoError("write failed for " + path);
}

ScoreMatrix Softmax(const ScoreMatrix& logits, double temperature) {
  if (!(temperature > 0) || !std::isfinite(temperature)) {
    throw UsageError("temperature must be positive");
  }
  if (logits.kind() != ScoreKind::kLogits) {
    throw UsageError("softmax expects logits");
  }
  const size_t k = logits.classes();
  std::vector<double> probs(logits.rows() * k);
  for (size_t i = 0; i < logits.rows(); ++i) {
    const auto in = logits.row(i);
    double* out = probs.data() + i * k;
    const double max = *std::max_element(in.begin(), in.end());
    double sum = 0;
    for (size_t j = 0; j < k; ++j) {
      out[j] = std::exp((in[j] - max) / temperature);
      sum += out[j];
    }
    for (size_t j = 0; j < k; ++j) out[j] /= sum;
  }
  return ScoreMatrix(logits.rows(), k, std::move(probs),
                     std::vector<uint32_t>(logits.labels().begin(),
                                           logits.labels().end()),
                     ScoreKind::kProbabilities);
}

SortedScores SortAnyScores(const ScoreMatrix& matrix, uint64_t tie_seed) {
  const size_t n = matrix.rows();
  const size_t k = matrix.classes();
  SortedScores out;
  out.rows_ = n;
  out.classes_ = k;
  out.sorted_.resize(n * k);
  out.cumsum_.resize(n * k);
  out.perm_.resize(n * k);
  out.labels_.assign(matrix.labels().begin(), matrix.labels().end());
  out.label_ranks_.resize(n);

  std::vector<uint64_t> tie_keys(k);
  for (size_t i = 0; i < n; ++i) {
    const auto scores = matrix.row(i);
    uint32_t* perm = out.perm_.data() + i * k;
    std::iota(perm, perm + k, 0u);
    const uint64_t row_seed = DeriveSeed(tie_seed, streams::kTieBreak, i);
    for (size_t j = 0; j < k; ++j) tie_keys[j] = DeriveSeed(row_seed, j);
    std::sort(perm, perm + k, [&](uint32_t a, uint32_t b) {
      if (scores[a] != scores[b]) return scores[a] > scores[b];
      if (tie_keys[a] != tie_keys[b]) return tie_keys[a] < tie_keys[b];
      return a < b;
    });
    double running = 0;
    for (size_t j = 0; j < k; ++j) {
      const double s = scores[perm[j]];
      out.sorted_[i * k + j] = s;
      running += s;
      out.cumsum_[i * k + j] = running;
      if (perm[j] == matrix.label(i)) {
        out.label_ranks_[i] = static_cast<uint32_t>(j + 1);
      }
    }
  }
  return out;
}

SortedScores SortScores(const ScoreMatrix& probabilities, uint64_t tie_seed) {
  if (probabilities.kind() != ScoreKind::kProbabilities) {
    throw UsageError("sorting expects probabilities; apply softmax first");
  }
  return SortAnyScores(probabilities, tie_seed);
}

SortedScores ApplyTemperature(const SortedScores& sorted_logits,
                              double temperature) {
  if (!(temperature > 0) || !std::isfinite(temperature)) {
    throw UsageError("temperature must be positive");
  }
  SortedScores out = sorted_logits;
  const size_t k = out.classes_;
  for (size_t i = 0; i < out.rows_; ++i) {
    double* s = out.sorted_.data() + i * k;
    double* c = out.cumsum_.data() + i * k;
    const double max = s[0];
    double sum = 0;
    for (size_t j = 0; j < k; ++j) {
      s[j] = std::exp((s[j] - max) / temperature);
      sum += s[j];
    }
    double running = 0;
    for (size_t j = 0; j < k; ++j) {
      s[j] /= sum;
      running += s[j];
      c[j] = running;
    }
  }
  return out;
}

SortedScores SortedScores::Subset(std::span<const size_t> indices) const {
  SortedScores out;
  out.rows_ = indices.size();
  out.classes_ = classes_;
  out.sorted_.reserve(indices.size() * classes_);
  out.cumsum_.reserve(indices.size() * classes_);
  out.perm_.reserve(indices.size() * classes_);
  for (const size_t i : indices) {
    const auto r = row(i);
    out.sorted_.insert(out.sorted_.end(), r.sorted.begin(), r.sorted.end());
    out.cumsum_.insert(out.cumsum_.end(), r.cumsum.begin(), r.cumsum.end());
    out.perm_.insert(out.perm_.end(), r.perm.begin(), r.perm.end());
    out.labels_.push_back(labels_[i]);
    out.label_ranks_.push_back(label_ranks_[i]);
  }
  return out;
}

SplitSpec SplitSpec::FromFractions(size_t n, double tuning, double calibration,
                                   double evaluation, uint64_t seed) {
  for (const double f : {tuning, calibration, evaluation}) {
    if (!(f >= 0 && f <= 1)) throw UsageError("split fractions must be in [0,1]");
  }
  const auto part = [n](double f) {
    return static_cast<size_t>(std::floor(f * static_cast<double>(n)));
  };
  return {seed, part(tuning), part(calibration), part(evaluation)};
}

SplitIndices SplitRows(size_t n, const SplitSpec& spec) {
  const size_t total = spec.tuning + spec.calibration + spec.evaluation;
  if (total > n) {
    throw UsageError("split sizes " + std::to_string(spec.tuning) + "+" +
                     std::to_string(spec.calibration) + "+" +
                     std::to_string(spec.evaluation) + " exceed n = " +
                     std::to_string(n));
  }
  std::vector<size_t> order(n);
  std::iota(order.begin(), order.end(), size_t{0});
  SplitMix64 rng(DeriveSeed(spec.seed, streams::kSplit));
  for (size_t i = n; i > 1; --i) {
    std::swap(order[i - 1], order[rng.NextBounded(i)]);
  }
  SplitIndices out;
  auto cursor = order.begin();
  out.tuning.assign(cursor, cursor + spec.tuning);
  cursor += spec.tuning;
  out.calibration.assign(cursor, cursor + spec.calibration);
  cursor += spec.calibration;
  out.evaluation.assign(cursor, cursor + spec.evaluation);
  return out;
}

ScoreSplit Split(const ScoreMatrix& matrix, const SplitSpec& spec) {
  const SplitIndices idx = SplitRows(matrix.rows(), spec);
  const auto take = [&](const std::vector<size_t>& rows)
      -> std::optional<ScoreMatrix> {
    if (rows.empty()) return std::nullopt;
    return matrix.Subset(rows);
  };
  return {take(idx.tuning), take(idx.calibration), take(idx.evaluation)};
}

}  // namespace cset
