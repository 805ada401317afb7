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

#include <algorithm>

#include "fixtures.hpp"

namespace clarigate {
namespace {

class FeaturizerTest : public ::testing::Test {
 protected:
  void SetUp() override {
    for (const auto& h : testing::harry_potter_list()) vocabs.observe(h);
    vocabs.words.add("turn");
    vocabs.words.add("on");
    vocabs.words.add("light");
    cfg.d_model = 8;
    cfg.n_heads_sentence = 2;
    cfg.ffn_mult = 2;
    Rng rng(1);
    feat = Featurizer(cfg, vocabs, ps, rng);
  }

  std::vector<double> sentence(const std::string& text) { return feat.encode_sentence(ps, tokenize(text)).values(); }

  Vocabularies vocabs;
  FeaturizerConfig cfg;
  ParamStore ps;
  Featurizer feat;
};

double max_abs_diff(const std::vector<double>& a, const std::vector<double>& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

TEST_F(FeaturizerTest, WidthIsFiveDPlusTwo) {
  const auto v = feat.featurize_hypothesis(ps, testing::harry_potter_list()[0], AmbiguityType::TOP);
  EXPECT_EQ(v.size(), 5 * cfg.d_model + 2);
  EXPECT_TRUE(std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); }));
}

TEST_F(FeaturizerTest, ScalarsAreRawConfidences) {
  const auto v = feat.featurize_hypothesis(ps, testing::harry_potter_list()[0], AmbiguityType::TOP);
  EXPECT_EQ(v[feat.layout().asr_conf()], 0.9);
  EXPECT_EQ(v[feat.layout().intent_conf()], 0.95);
}

TEST_F(FeaturizerTest, HypConfIsNotAFeature) {
  Hypothesis h = testing::harry_potter_list()[0];
  const auto a = feat.featurize_hypothesis(ps, h, AmbiguityType::TOP);
  h.hyp_conf = 0.01;
  EXPECT_EQ(a, feat.featurize_hypothesis(ps, h, AmbiguityType::TOP));
}

TEST_F(FeaturizerTest, SentenceSumIsPermutationInvariant) {
  const auto a = sentence("harry potter turn on the light");
  const auto b = sentence("light the on turn potter harry");
  const auto c = sentence("on light harry the potter turn");
  EXPECT_LE(max_abs_diff(a, b), 1e-6);
  EXPECT_LE(max_abs_diff(a, c), 1e-6);
}

TEST_F(FeaturizerTest, DifferentWordsGiveDifferentVectors) {
  EXPECT_GT(max_abs_diff(sentence("harry potter"), sentence("larry potter")), 1e-9);
}

TEST_F(FeaturizerTest, SingleTokenAttendsOnlyToItself) {
  const auto v = sentence("harry");
  EXPECT_EQ(v.size(), cfg.d_model);
  EXPECT_TRUE(std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); }));
}

TEST_F(FeaturizerTest, EmptySentenceIsAnError) {
  try {
    feat.encode_sentence(ps, {});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::EmptyTokenSequence);
  }
}

TEST_F(FeaturizerTest, SlotVectorIsSumOfKeyEmbeddings) {
  EXPECT_EQ(feat.slot_vector(ps, {}).values(), std::vector<double>(cfg.d_model, 0.0));
  const Slot a{"videotitle", {"x"}}, b{"booktitle", {"y"}};
  const auto va = feat.slot_vector(ps, {a}).values();
  const auto vb = feat.slot_vector(ps, {b}).values();
  const auto ab = feat.slot_vector(ps, {a, b}).values();
  const auto ba = feat.slot_vector(ps, {b, a}).values();
  for (std::size_t j = 0; j < cfg.d_model; ++j) {
    EXPECT_DOUBLE_EQ(ab[j], va[j] + vb[j]);
    EXPECT_DOUBLE_EQ(ab[j], ba[j]);
  }
  const auto unknown = feat.slot_vector(ps, {Slot{"no_such_key", {"z"}}}).values();
  EXPECT_EQ(unknown, feat.slot_vector(ps, {Slot{"also_unknown", {"z"}}}).values());
}

TEST_F(FeaturizerTest, TagChangesOnlyAmbiguityBlock) {
  const Hypothesis h = testing::harry_potter_list()[1];
  const auto a = feat.featurize_hypothesis(ps, h, AmbiguityType::HC);
  const auto b = feat.featurize_hypothesis(ps, h, AmbiguityType::IC);
  const std::size_t lo = feat.layout().ambiguity();
  for (std::size_t j = 0; j < a.size(); ++j) {
    if (j >= lo && j < lo + cfg.d_model) continue;
    EXPECT_EQ(a[j], b[j]) << j;
  }
  EXPECT_GT(max_abs_diff(a, b), 0.0);
}

TEST_F(FeaturizerTest, PlaceholderHasZeroScalarsAndIsFixed) {
  const auto p = feat.featurize_placeholder(ps, AmbiguityType::SNR);
  EXPECT_EQ(p[feat.layout().asr_conf()], 0.0);
  EXPECT_EQ(p[feat.layout().intent_conf()], 0.0);
  EXPECT_EQ(p, feat.featurize_placeholder(ps, AmbiguityType::SNR));
  EXPECT_NE(p, feat.featurize_placeholder(ps, AmbiguityType::TRUNC));
}

TEST(ContextVector, Layout) {
  DecisionInput in;
  EXPECT_EQ(context_vector(in), std::vector<double>(kContextWidth, 0.0));
  in.occurrences = {false, true, true, false, false};
  in.snr_norm = -0.25;
  in.repetition = true;
  EXPECT_EQ(context_vector(in), (std::vector<double>{0, 1, 1, 0, 0, -0.25, 1}));
}

TEST(Vocab, ReservedIdsAndRoundTrip) {
  Vocab v;
  EXPECT_NE(Vocab::kPad, Vocab::kUnk);
  const std::size_t id = v.add("harry");
  EXPECT_EQ(v.add("harry"), id);
  EXPECT_EQ(v.id("unseen"), Vocab::kUnk);
  EXPECT_EQ(Vocab::from_tokens(v.tokens()), v);
}

}  // namespace
}  // namespace clarigate
