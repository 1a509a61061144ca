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

#include "cset/report.h"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cstdio>
#include <sstream>

namespace cset {
namespace {

std::string Fixed(double v, int digits) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.*f", digits, v);
  return buf;
}

std::string TextCell(const Cell& c) {
  return c.value ? Fixed(*c.value, c.digits) : c.text;
}

std::string CsvCell(const Cell& c) {
  if (!c.value) return c.text;
  if (c.digits == 0) return Fixed(*c.value, 0);
  return Fixed(*c.value, 6);
}

std::string CsvEscape(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (const char ch : s) {
    if (ch == '"') out += '"';
    out += ch;
  }
  return out + "\"";
}

std::string Pad(const std::string& s, size_t width, bool left) {
  if (s.size() >= width) return s;
  const std::string fill(width - s.size(), ' ');
  return left ? s + fill : fill + s;
}

}  // namespace

std::string ReportTable::ToText() const {
  const size_t n = columns.size();
  std::vector<size_t> width(n, 0);
  for (size_t j = 0; j < n; ++j) width[j] = columns[j].size();
  std::vector<std::vector<std::string>> text;
  for (const auto& row : rows) {
    std::vector<std::string> line;
    for (size_t j = 0; j < n; ++j) {
      line.push_back(j < row.size() ? TextCell(row[j]) : std::string());
      width[j] = std::max(width[j], line.back().size());
    }
    text.push_back(std::move(line));
  }
  // Widen spanned columns so each group title fits.
  size_t col = 0;
  for (const ColumnGroup& g : groups) {
    if (col + g.width > n) break;
    size_t span = 2 * (g.width - 1);
    for (size_t j = col; j < col + g.width; ++j) span += width[j];
    if (g.title.size() > span) width[col + g.width - 1] += g.title.size() - span;
    col += g.width;
  }

  std::ostringstream out;
  if (!groups.empty()) {
    std::string line;
    col = 0;
    for (const ColumnGroup& g : groups) {
      if (col + g.width > n) break;
      size_t span = 2 * (g.width - 1);
      for (size_t j = col; j < col + g.width; ++j) span += width[j];
      if (col > 0) line += "  ";
      line += Pad(g.title, span, true);
      col += g.width;
    }
    while (!line.empty() && line.back() == ' ') line.pop_back();
    out << line << '\n';
  }
  const auto emit = [&](const std::vector<std::string>& cells) {
    std::string line;
    for (size_t j = 0; j < n; ++j) {
      if (j > 0) line += "  ";
      line += Pad(cells[j], width[j], j == 0);
    }
    while (!line.empty() && line.back() == ' ') line.pop_back();
    out << line << '\n';
  };
  emit(columns);
  for (const auto& line : text) emit(line);
  return out.str();
}

std::string ReportTable::ToCsv() const {
  std::ostringstream out;
  const auto& names = csv_columns.empty() ? columns : csv_columns;
  for (size_t j = 0; j < names.size(); ++j) {
    out << (j ? "," : "") << CsvEscape(names[j]);
  }
  out << '\n';
  for (const auto& row : rows) {
    for (size_t j = 0; j < names.size(); ++j) {
      out << (j ? "," : "") << CsvEscape(j < row.size() ? CsvCell(row[j]) : "");
    }
    out << '\n';
  }
  return out.str();
}

std::string Slug(const std::string& label) {
  std::string out;
  bool gap = false;
  for (const char ch : label) {
    if (std::isalnum(static_cast<unsigned char>(ch))) {
      if (gap && !out.empty()) out += '_';
      out += static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
      gap = false;
    } else {
      gap = true;
    }
  }
  return out;
}

std::string ShortDouble(double v) {
  char buf[64];
  const auto r = std::to_chars(buf, buf + sizeof(buf), v,
                               std::chars_format::fixed);
  return std::string(buf, r.ptr);
}

ReportTable SummaryTable(const TrialAggregate& agg, const std::string& model) {
  const size_t m = agg.methods.size();
  ReportTable t;
  t.groups = {{"", 1}, {"Accuracy", 2}, {"Coverage", m}, {"Size", m}};
  t.columns = {"Model", "Top-1", "Top-5"};
  t.csv_columns = {"model", "top1", "top5"};
  for (const auto& s : agg.methods) {
    t.columns.push_back(s.label);
    t.csv_columns.push_back("coverage_" + Slug(s.label));
  }
  for (const auto& s : agg.methods) {
    t.columns.push_back(s.label);
    t.csv_columns.push_back("size_" + Slug(s.label));
  }
  std::vector<Cell> row = {Cell::Text(model), Cell::Number(agg.median_top1, 3),
                           Cell::Number(agg.median_top5, 3)};
  for (const auto& s : agg.methods) row.push_back(Cell::Number(s.median_coverage, 3));
  for (const auto& s : agg.methods) row.push_back(Cell::Number(s.median_size, 2));
  t.rows.push_back(std::move(row));
  return t;
}

ReportTable TrialTable(const TrialAggregate& agg) {
  ReportTable t;
  t.columns = {"trial", "method", "coverage", "size", "sscv", "lambda", "k_reg"};
  for (size_t i = 0; i < agg.top1.size(); ++i) {
    for (const auto& s : agg.methods) {
      t.rows.push_back({Cell::Count(i), Cell::Text(s.label),
                        Cell::Number(s.coverage[i], 4),
                        Cell::Number(s.avg_size[i], 3),
                        Cell::Number(s.sscv[i], 4),
                        Cell::Text(ShortDouble(s.lambda[i])),
                        Cell::Count(static_cast<size_t>(s.k_reg[i]))});
    }
  }
  return t;
}

ReportTable StrataTable(const TrialAggregate& agg) {
  ReportTable t;
  t.groups.push_back({"", 1});
  t.columns = {"size"};
  t.csv_columns = {"size"};
  for (const auto& s : agg.methods) {
    t.groups.push_back({s.label, 2});
    t.columns.insert(t.columns.end(), {"cnt", "cvg"});
    t.csv_columns.push_back("count_" + Slug(s.label));
    t.csv_columns.push_back("coverage_" + Slug(s.label));
  }
  if (agg.methods.empty()) return t;
  const size_t n_strata = agg.methods.front().per_stratum.size();
  for (size_t r = 0; r < n_strata; ++r) {
    std::vector<Cell> row = {
        Cell::Text(agg.methods.front().per_stratum[r].range.Label())};
    for (const auto& s : agg.methods) {
      const StratumRow& st = s.per_stratum[r];
      row.push_back(Cell::Count(st.count));
      row.push_back(st.coverage ? Cell::Number(*st.coverage, 2) : Cell::Blank());
    }
    t.rows.push_back(std::move(row));
  }
  return t;
}

ReportTable DifficultyReport(const TrialAggregate& agg) {
  ReportTable t;
  t.groups = {{"", 1}, {"", 1}};
  t.columns = {"difficulty", "count"};
  t.csv_columns = {"difficulty", "count"};
  for (const auto& s : agg.methods) {
    t.groups.push_back({s.label, 2});
    t.columns.insert(t.columns.end(), {"cvg", "sz"});
    t.csv_columns.push_back("coverage_" + Slug(s.label));
    t.csv_columns.push_back("size_" + Slug(s.label));
  }
  if (agg.methods.empty()) return t;
  const auto& first = agg.methods.front().per_difficulty;
  for (size_t r = 0; r < first.size(); ++r) {
    std::vector<Cell> row = {Cell::Text(first[r].bin.Label()),
                             Cell::Count(first[r].count)};
    for (const auto& s : agg.methods) {
      const DifficultyRow& d = s.per_difficulty[r];
      row.push_back(d.coverage ? Cell::Number(*d.coverage, 2) : Cell::Blank());
      row.push_back(d.avg_size ? Cell::Number(*d.avg_size, 1) : Cell::Blank());
    }
    t.rows.push_back(std::move(row));
  }
  return t;
}

ReportTable SweepTable(const TrialAggregate& agg, std::span<const int> k_regs,
                       std::span<const double> lambdas) {
  ReportTable t;
  t.columns = {"k_reg | lambda"};
  t.csv_columns = {"k_reg"};
  for (const double l : lambdas) {
    t.columns.push_back(ShortDouble(l));
    t.csv_columns.push_back("lambda_" + ShortDouble(l));
  }
  for (size_t r = 0; r < k_regs.size(); ++r) {
    std::vector<Cell> row = {Cell::Count(static_cast<size_t>(k_regs[r]))};
    for (size_t c = 0; c < lambdas.size(); ++c) {
      const size_t i = r * lambdas.size() + c;
      row.push_back(i < agg.methods.size()
                        ? Cell::Number(agg.methods[i].median_size, 1)
                        : Cell::Blank());
    }
    t.rows.push_back(std::move(row));
  }
  return t;
}

std::string HistogramCsv(const MethodSummary& method) {
  std::ostringstream out;
  out << "size,count\n";
  for (const auto& [size, count] : method.size_hist) {
    out << size << ',' << count << '\n';
  }
  return out.str();
}

}  // namespace cset
