// Copyright 2026 The Clarigate Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <array>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <map>
#include <ranges>
#include <sstream>
#include <string>
#include <vector>

#include "clarigate/core_types.hpp"

namespace clarigate {

struct PRF1 {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  std::size_t support = 0;  // number of examples scored

  bool operator==(const PRF1&) const = default;
};

/// Precision, recall and F1 of the positive class. A degenerate case with
/// no predicted or no actual positives scores 0 on the empty side and F1 is
/// 0 whenever precision + recall is 0.
template <std::ranges::sized_range P, std::ranges::sized_range L>
PRF1 prf1(const P& predictions, const L& labels) {
  if (std::ranges::size(predictions) != std::ranges::size(labels))
    throw Error(ErrorCode::LengthMismatch, "predictions and labels differ in length");
  if (std::ranges::size(labels) == 0) throw Error(ErrorCode::LengthMismatch, "no examples to score");
  std::size_t tp = 0, fp = 0, fn = 0;
  auto p = std::ranges::begin(predictions);
  for (bool y : labels) {
    const bool yhat = *p++;
    tp += yhat && y;
    fp += yhat && !y;
    fn += !yhat && y;
  }
  PRF1 r;
  r.support = std::ranges::size(labels);
  r.precision = tp + fp ? double(tp) / double(tp + fp) : 0.0;
  r.recall = tp + fn ? double(tp) / double(tp + fn) : 0.0;
  r.f1 = r.precision + r.recall > 0 ? 2 * r.precision * r.recall / (r.precision + r.recall) : 0.0;
  return r;
}

/// Report columns in display order: All, then the five ambiguity types.
inline constexpr std::array<const char*, 6> kReportColumns = {"All", "ASR", "IC", "HC", "SNR", "TRUNC"};

/// F1 per column; an example counts under every type it carries. Columns
/// with no examples are omitted from the map.
inline std::map<std::string, double> per_type_f1(const std::vector<bool>& predictions,
                                                 const std::vector<LabeledExample>& examples) {
  if (predictions.size() != examples.size())
    throw Error(ErrorCode::LengthMismatch, "predictions and examples differ in length");
  std::map<std::string, double> out;
  if (examples.empty()) return out;
  std::vector<bool> labels;
  for (const auto& e : examples) labels.push_back(e.label);
  out["All"] = prf1(predictions, labels).f1;
  for (auto t : kOccurrenceTypes) {
    std::vector<bool> p, y;
    for (std::size_t i = 0; i < examples.size(); ++i) {
      if (!examples[i].type_tags.contains(t)) continue;
      p.push_back(predictions[i]);
      y.push_back(examples[i].label);
    }
    if (!y.empty()) out[std::string(to_string(t))] = prf1(p, y).f1;
  }
  return out;
}

/// 100 * (f - f_always) / f_always
inline double relative_f1(double f_x, double f_always) {
  if (!(f_always > 0.0)) throw Error(ErrorCode::BaselineZero, "baseline F1 is zero");
  return 100.0 * (f_x - f_always) / f_always;
}

struct ReportRow {
  std::string model;  // variant name
  std::string flags;  // ablation flags, "none" when unablated
  std::map<std::string, double> f1;
};

struct Report {
  std::string baseline;  // model name the relative scores refer to
  std::map<std::string, double> baseline_f1;
  std::vector<ReportRow> rows;

  double relative(const ReportRow& row, const std::string& column) const {
    auto b = baseline_f1.find(column);
    auto f = row.f1.find(column);
    if (b == baseline_f1.end() || f == row.f1.end()) return 0.0;
    return relative_f1(f->second, b->second);
  }

  /// Fixed-width text table of relative F1 (%).
  std::string to_text() const {
    std::ostringstream os;
    os << std::left << std::setw(22) << "Model";
    for (auto c : kReportColumns) os << std::right << std::setw(10) << c;
    os << '\n';
    for (const auto& r : rows) {
      std::string name = r.model + (r.flags == "none" ? "" : " [" + r.flags + "]");
      os << std::left << std::setw(22) << name;
      for (auto c : kReportColumns) {
        if (r.f1.contains(c) && baseline_f1.contains(c))
          os << std::right << std::setw(10) << std::fixed << std::setprecision(2) << relative(r, c);
        else
          os << std::right << std::setw(10) << "-";
      }
      os << '\n';
    }
    os << "Relative F1 (%) against " << baseline
       << ". Examples with several ambiguities count under each of their types.\n";
    return os.str();
  }

  /// variant,flags,<col>_f1...,<col>_rel... ; empty cells for absent columns.
  std::string to_csv() const {
    std::ostringstream os;
    os << "variant,flags";
    for (auto c : kReportColumns) os << ',' << c << "_f1";
    for (auto c : kReportColumns) os << ',' << c << "_rel";
    os << '\n';
    os << std::setprecision(17);
    for (const auto& r : rows) {
      os << r.model << ',' << quote_flags(r.flags);
      for (auto c : kReportColumns) {
        os << ',';
        if (r.f1.contains(c)) os << r.f1.at(c);
      }
      for (auto c : kReportColumns) {
        os << ',';
        if (r.f1.contains(c) && baseline_f1.contains(c)) os << relative(r, c);
      }
      os << '\n';
    }
    return os.str();
  }

  bool operator==(const Report&) const = default;

 private:
  static std::string quote_flags(const std::string& f) {
    return f.find(',') == std::string::npos ? f : "\"" + f + "\"";
  }
};

/// Builds a report whose relative scores refer to `baseline`.
inline Report make_report(const ReportRow& baseline, std::vector<ReportRow> rows) {
  Report r;
  r.baseline = baseline.model + (baseline.flags == "none" ? "" : " [" + baseline.flags + "]");
  r.baseline_f1 = baseline.f1;
  r.rows = std::move(rows);
  return r;
}

/// Reads the absolute-F1 part of a CSV written by Report::to_csv.
inline std::vector<ReportRow> read_report_csv(std::istream& in) {
  std::vector<ReportRow> rows;
  std::string line;
  if (!std::getline(in, line)) return rows;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::string cur;
    bool quoted = false;
    for (char c : line) {
      if (c == '"') quoted = !quoted;
      else if (c == ',' && !quoted) cells.push_back(std::exchange(cur, {}));
      else cur.push_back(c);
    }
    cells.push_back(cur);
    if (cells.size() != 2 + 2 * kReportColumns.size())
      throw Error(ErrorCode::MalformedRecord, "report line " + std::to_string(line_no));
    ReportRow r{cells[0], cells[1], {}};
    for (std::size_t i = 0; i < kReportColumns.size(); ++i)
      if (!cells[2 + i].empty()) r.f1[kReportColumns[i]] = std::stod(cells[2 + i]);
    rows.push_back(std::move(r));
  }
  return rows;
}

}  // namespace clarigate
