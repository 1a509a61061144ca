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

// Experiment reports rendered as aligned text and CSV.

#ifndef CSET_REPORT_H_
#define CSET_REPORT_H_

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "cset/trials.h"

namespace cset {

// One cell. Numbers print with `digits` decimals in text and with full
// precision in CSV; an empty value renders as a blank cell.
struct Cell {
  std::optional<double> value;
  std::string text;  // Used when value is absent.
  int digits = 3;

  static Cell Number(double v, int digits) { return {v, {}, digits}; }
  static Cell Count(size_t v) { return {static_cast<double>(v), {}, 0}; }
  static Cell Text(std::string s) { return {std::nullopt, std::move(s), 0}; }
  static Cell Blank() { return {}; }
};

struct ColumnGroup {
  std::string title;
  size_t width = 1;  // Number of columns spanned.
};

struct ReportTable {
  std::vector<ColumnGroup> groups;  // Optional first header line.
  std::vector<std::string> columns;
  std::vector<std::string> csv_columns;  // Empty: use `columns`.
  std::vector<std::vector<Cell>> rows;

  std::string ToText() const;
  std::string ToCsv() const;
};

// Accuracy (Top-1, Top-5), then one Coverage and one Size column per method.
// Every value is a median over trials. `model` fills the first column.
ReportTable SummaryTable(const TrialAggregate& agg, const std::string& model);

// Per-trial coverage, size and SSCV of every method.
ReportTable TrialTable(const TrialAggregate& agg);

// Rows are set-size strata, two columns (count, coverage) per method. Counts
// and coverages are pooled over trials; empty strata leave coverage blank.
ReportTable StrataTable(const TrialAggregate& agg);

// Rows are difficulty bins (rank of the true label). One count column, then
// coverage and mean size per method, pooled over trials.
ReportTable DifficultyReport(const TrialAggregate& agg);

// Median set size of a k_reg x lambda grid. `agg.methods` must be ordered
// k_reg-major: method i has k_reg = k_regs[i / lambdas.size()] and
// lambda = lambdas[i % lambdas.size()].
ReportTable SweepTable(const TrialAggregate& agg, std::span<const int> k_regs,
                       std::span<const double> lambdas);

// "size,count" lines of the pooled set-size histogram.
std::string HistogramCsv(const MethodSummary& method);

// Lowercase label with runs of non-alphanumerics collapsed to '_'.
std::string Slug(const std::string& label);

// Shortest decimal form of a double ("0.001", "1e-05").
std::string ShortDouble(double v);

}  // namespace cset

#endif  // CSET_REPORT_H_
