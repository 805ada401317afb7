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


#include <gtest/gtest.h>

#include <sstream>

#include "fixtures.hpp"

namespace clarigate {
namespace {

LabeledExample tagged(bool label, std::set<AmbiguityType> tags) {
  LabeledExample e;
  e.label = label;
  e.type_tags = std::move(tags);
  return e;
}

TEST(Prf1, AllAskGivesClosedForm) {
  Rng rng(1);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = std::uniform_int_distribution<std::size_t>(1, 500)(rng);
    std::vector<bool> labels(n);
    std::size_t k = 0;
    for (std::size_t i = 0; i < n; ++i) k += labels[i] = uniform(rng, 0, 1) < 0.3;
    if (k == 0) continue;
    const PRF1 r = prf1(std::vector<bool>(n, true), labels);
    const double p = double(k) / double(n);
    EXPECT_EQ(r.precision, p);
    EXPECT_EQ(r.recall, 1.0);
    EXPECT_EQ(r.f1, 2 * p / (1 + p));
  }
  EXPECT_NEAR(2 * 0.23 / 1.23, 0.374, 5e-4);
}

TEST(Prf1, PerfectAndDegenerate) {
  const std::vector<bool> y = {true, false, true, false};
  EXPECT_EQ(prf1(y, y), (PRF1{1.0, 1.0, 1.0, 4}));
  EXPECT_EQ(prf1(std::vector<bool>(4, false), y).f1, 0.0);
  EXPECT_EQ(prf1(y, std::vector<bool>(4, false)).f1, 0.0);
  EXPECT_THROW(prf1(y, std::vector<bool>(3, false)), Error);
  EXPECT_THROW(prf1(std::vector<bool>{}, std::vector<bool>{}), Error);
}

TEST(Prf1Property, SwappingRolesSwapsPrecisionAndRecall) {
  Rng rng(2);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<bool> a(50), b(50);
    for (std::size_t i = 0; i < 50; ++i) {
      a[i] = uniform(rng, 0, 1) < 0.4;
      b[i] = uniform(rng, 0, 1) < 0.4;
    }
    const PRF1 ab = prf1(a, b), ba = prf1(b, a);
    EXPECT_EQ(ab.precision, ba.recall);
    EXPECT_EQ(ab.recall, ba.precision);
    EXPECT_DOUBLE_EQ(ab.f1, ba.f1);
  }
}

TEST(PerTypeF1, MembershipAttribution) {
  std::vector<LabeledExample> ex = {tagged(true, {AmbiguityType::TRUNC}), tagged(false, {AmbiguityType::TRUNC})};
  auto f = per_type_f1({true, true}, ex);
  EXPECT_EQ(f.size(), 2u);
  EXPECT_EQ(f.at("All"), f.at("TRUNC"));

  ex.push_back(tagged(true, {AmbiguityType::SNR, AmbiguityType::TRUNC}));
  f = per_type_f1({false, false, true}, ex);
  EXPECT_EQ(f.at("SNR"), 1.0);
  EXPECT_EQ(f.at("TRUNC"), prf1(std::vector<bool>{false, false, true}, std::vector<bool>{true, false, true}).f1);
  EXPECT_EQ(f.at("All"), prf1(std::vector<bool>{false, false, true}, labels_of(ex)).f1);
}

TEST(PerTypeF1, AlwaysMatchesPerTypeAskRate) {
  GeneratorConfig cfg;
  cfg.n_examples = 4000;
  const auto ex = to_labeled(generate_records(cfg));
  const auto f = per_type_f1(std::vector<bool>(ex.size(), true), ex);
  for (auto t : kOccurrenceTypes) {
    std::size_t n = 0, k = 0;
    for (const auto& e : ex)
      if (e.type_tags.contains(t)) {
        ++n;
        k += e.label;
      }
    const double p = double(k) / double(n);
    EXPECT_EQ(f.at(std::string(to_string(t))), 2 * p / (1 + p));
  }
}

TEST(RelativeF1, Definition) {
  EXPECT_EQ(relative_f1(0.4, 0.4), 0.0);
  EXPECT_DOUBLE_EQ(relative_f1(0.8, 0.4), 100.0);
  try {
    relative_f1(0.5, 0.0);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::BaselineZero);
  }
}

TEST(Report, AlwaysRowIsAllZeros) {
  const ReportRow always{"ALWAYS", "none", {{"All", 0.37}, {"ASR", 0.3}, {"IC", 0.2}, {"HC", 0.4}, {"SNR", 0.35}, {"TRUNC", 0.75}}};
  const Report r = make_report(always, {always});
  for (auto c : kReportColumns) EXPECT_EQ(r.relative(r.rows[0], c), 0.0);
  const std::string text = r.to_text();
  EXPECT_LT(text.find("All"), text.find("ASR"));
  EXPECT_LT(text.find("ASR"), text.find("IC"));
  EXPECT_LT(text.find("HC"), text.find("SNR"));
  EXPECT_LT(text.find("SNR"), text.find("TRUNC"));
}

TEST(Report, CsvRoundTrip) {
  const ReportRow base{"SELF_ATT2", "none", {{"All", 0.61}, {"ASR", 0.5}, {"IC", 0.4}, {"SNR", 0.6}, {"TRUNC", 0.8}}};
  const ReportRow a{"SELF_ATT2", "no_hyp", {{"All", 0.46}, {"ASR", 0.25}, {"IC", 1.0 / 3.0}, {"SNR", 0.5}, {"TRUNC", 0.7}}};
  const ReportRow b{"SELF_ATT2", "no_sent,no_rpt", {{"All", 0.1 + 0.2}}};
  const Report r = make_report(base, {a, b});
  std::istringstream in(r.to_csv());
  const auto rows = read_report_csv(in);
  ASSERT_EQ(rows.size(), 2u);
  EXPECT_EQ(rows[0].model, a.model);
  EXPECT_EQ(rows[0].flags, a.flags);
  EXPECT_EQ(rows[0].f1, a.f1);
  EXPECT_EQ(rows[1].flags, b.flags);
  EXPECT_EQ(rows[1].f1, b.f1);
  EXPECT_EQ(make_report(base, rows).to_csv(), r.to_csv());
}

}  // namespace
}  // namespace clarigate
