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

#include "cset/eval.h"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <sstream>

#include "cset/error.h"

namespace cset {

std::string SizeRange::Label() const {
  if (lo == hi) return std::to_string(lo);
  return std::to_string(lo) + " to " + std::to_string(hi);
}

std::vector<SizeRange> DefaultSizeStrata() {
  return {{0, 1}, {2, 3}, {4, 10}, {11, 100}, {101, 1000}};
}

std::vector<SizeRange> DefaultDifficultyBins() {
  return {{1, 1}, {2, 3}, {4, 6}, {7, 10}, {11, 100}, {101, 1000}};
}

std::vector<SizeRange> ParseRanges(const std::string& text) {
  std::vector<SizeRange> ranges;
  std::stringstream stream(text);
  std::string item;
  const auto parse = [&](const std::string& s) {
    size_t value = 0;
    const auto r = std::from_chars(s.data(), s.data() + s.size(), value);
    if (s.empty() || r.ec != std::errc() || r.ptr != s.data() + s.size()) {
      throw UsageError("malformed range list \"" + text + "\"");
    }
    return value;
  };
  while (std::getline(stream, item, ',')) {
    item.erase(std::remove(item.begin(), item.end(), ' '), item.end());
    const auto dash = item.find('-');
    SizeRange r;
    if (dash == std::string::npos) {
      r.lo = r.hi = parse(item);
    } else {
      r.lo = parse(item.substr(0, dash));
      r.hi = parse(item.substr(dash + 1));
    }
    if (r.lo > r.hi) throw UsageError("reversed range in \"" + text + "\"");
    ranges.push_back(r);
  }
  if (ranges.empty()) throw UsageError("empty range list");
  for (size_t a = 0; a < ranges.size(); ++a) {
    for (size_t b = a + 1; b < ranges.size(); ++b) {
      if (ranges[a].lo <= ranges[b].hi && ranges[b].lo <= ranges[a].hi) {
        throw UsageError("overlapping ranges in \"" + text + "\"");
      }
    }
  }
  return ranges;
}

std::string FormatRanges(std::span<const SizeRange> ranges) {
  std::string out;
  for (const auto& r : ranges) {
    if (!out.empty()) out += ',';
    out += std::to_string(r.lo);
    if (r.hi != r.lo) out += "-" + std::to_string(r.hi);
  }
  return out;
}

void ValidatePartition(std::span<const SizeRange> ranges, size_t num_classes) {
  for (size_t v = 1; v <= num_classes; ++v) {
    size_t hits = 0;
    for (const auto& r : ranges) hits += r.Contains(v) ? 1 : 0;
    if (hits != 1) {
      throw UsageError("ranges " + FormatRanges(ranges) +
                       " do not partition 1.." + std::to_string(num_classes) +
                       " (value " + std::to_string(v) + " is covered " +
                       std::to_string(hits) + " times)");
    }
  }
}

std::optional<size_t> FindRange(std::span<const SizeRange> ranges,
                                size_t value) {
  for (size_t j = 0; j < ranges.size(); ++j) {
    if (ranges[j].Contains(value)) return j;
  }
  if (value == 0) return FindRange(ranges, 1);
  return std::nullopt;
}

std::vector<SetOutcome> Outcomes(std::span<const PredictionSet> sets,
                                 std::span<const uint32_t> labels) {
  if (sets.size() != labels.size()) {
    throw UsageError("length mismatch: " + std::to_string(sets.size()) +
                     " sets vs " + std::to_string(labels.size()) + " labels");
  }
  std::vector<SetOutcome> out(sets.size());
  for (size_t i = 0; i < sets.size(); ++i) {
    const auto& c = sets[i].classes;
    out[i].size = c.size();
    out[i].covered = std::find(c.begin(), c.end(), labels[i]) != c.end();
  }
  return out;
}

CoverageSize CoverageAndSize(std::span<const SetOutcome> outcomes) {
  if (outcomes.empty()) return {};
  size_t covered = 0;
  size_t total = 0;
  for (const auto& o : outcomes) {
    covered += o.covered ? 1 : 0;
    total += o.size;
  }
  const double n = static_cast<double>(outcomes.size());
  return {static_cast<double>(covered) / n, static_cast<double>(total) / n};
}

CoverageSize CoverageAndSize(std::span<const PredictionSet> sets,
                             std::span<const uint32_t> labels) {
  return CoverageAndSize(Outcomes(sets, labels));
}

std::vector<StratumRow> StratifiedCoverage(std::span<const SetOutcome> outcomes,
                                           std::span<const SizeRange> strata) {
  std::vector<StratumRow> rows(strata.size());
  for (size_t j = 0; j < strata.size(); ++j) rows[j].range = strata[j];
  for (const auto& o : outcomes) {
    const auto j = FindRange(strata, o.size);
    if (!j) {
      throw DataError("set size " + std::to_string(o.size) +
                      " falls in no stratum of " + FormatRanges(strata));
    }
    ++rows[*j].count;
    rows[*j].covered += o.covered ? 1 : 0;
  }
  for (auto& r : rows) {
    if (r.count > 0) {
      r.coverage =
          static_cast<double>(r.covered) / static_cast<double>(r.count);
    }
  }
  return rows;
}

double Sscv(std::span<const SetOutcome> outcomes,
            std::span<const SizeRange> strata, double alpha) {
  double worst = 0;
  for (const auto& r : StratifiedCoverage(outcomes, strata)) {
    if (r.coverage) worst = std::max(worst, std::abs(*r.coverage - (1 - alpha)));
  }
  return worst;
}

double Sscv(std::span<const PredictionSet> sets,
            std::span<const uint32_t> labels, std::span<const SizeRange> strata,
            double alpha) {
  return Sscv(Outcomes(sets, labels), strata, alpha);
}

std::vector<DifficultyRow> DifficultyTable(std::span<const SetOutcome> outcomes,
                                           std::span<const uint32_t> label_ranks,
                                           std::span<const SizeRange> bins) {
  if (outcomes.size() != label_ranks.size()) {
    throw UsageError("length mismatch between outcomes and label ranks");
  }
  std::vector<DifficultyRow> rows(bins.size());
  for (size_t j = 0; j < bins.size(); ++j) rows[j].bin = bins[j];
  for (size_t i = 0; i < outcomes.size(); ++i) {
    const auto j = FindRange(bins, label_ranks[i]);
    if (!j) continue;
    ++rows[*j].count;
    rows[*j].covered += outcomes[i].covered ? 1 : 0;
    rows[*j].total_size += outcomes[i].size;
  }
  for (auto& r : rows) {
    if (r.count == 0) continue;
    const double n = static_cast<double>(r.count);
    r.coverage = static_cast<double>(r.covered) / n;
    r.avg_size = static_cast<double>(r.total_size) / n;
  }
  return rows;
}

std::map<size_t, size_t> SizeHistogram(std::span<const SetOutcome> outcomes) {
  std::map<size_t, size_t> hist;
  for (const auto& o : outcomes) ++hist[o.size];
  return hist;
}

EvalReport Evaluate(std::span<const SetOutcome> outcomes,
                    std::span<const uint32_t> label_ranks, double alpha,
                    std::span<const SizeRange> strata,
                    std::span<const SizeRange> bins) {
  EvalReport report;
  const CoverageSize cs = CoverageAndSize(outcomes);
  report.coverage = cs.coverage;
  report.avg_size = cs.avg_size;
  report.size_hist = SizeHistogram(outcomes);
  report.per_stratum = StratifiedCoverage(outcomes, strata);
  for (const auto& r : report.per_stratum) {
    if (r.coverage) {
      report.sscv = std::max(report.sscv, std::abs(*r.coverage - (1 - alpha)));
    }
  }
  report.per_difficulty = DifficultyTable(outcomes, label_ranks, bins);
  return report;
}

std::vector<SetOutcome> EvaluateModel(const ConformalModel& model,
                                      const SortedScores& scores,
                                      uint64_t seed) {
  std::vector<SetOutcome> out(scores.rows());
  for (size_t i = 0; i < scores.rows(); ++i) {
    const size_t size =
        PredictSize(model, scores.row(i), PredictionU(seed, i));
    out[i].size = size;
    out[i].covered = scores.LabelRank(i) <= size;
  }
  return out;
}

double Median(std::vector<double> values) {
  if (values.empty()) return std::nan("");
  std::sort(values.begin(), values.end());
  const size_t mid = values.size() / 2;
  if (values.size() % 2 == 1) return values[mid];
  return 0.5 * (values[mid - 1] + values[mid]);
}

}  // namespace cset
