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

#include <filesystem>
#include <sstream>

#include "fixtures.hpp"

namespace clarigate {
namespace {

Dataset small_dataset(std::size_t n) {
  GeneratorConfig cfg;
  cfg.n_examples = n;
  return generate_records(cfg);
}

TEST(DatasetIo, RoundTripIsLossless) {
  const Dataset d = small_dataset(1000);
  std::stringstream ss;
  write_dataset(ss, d);
  EXPECT_EQ(read_dataset(ss), d);
}

TEST(DatasetIo, RoundTripKeepsExtremeDoubles) {
  ExampleRecord r;
  r.hypotheses = {testing::make_hyp("a b", 0.1 + 0.2, "D", "I", 1.0 / 3.0, "k", std::nullopt, 1)};
  r.snr_raw = -1e-300;
  r.label = true;
  std::stringstream ss;
  write_dataset(ss, {r});
  EXPECT_EQ(read_dataset(ss), Dataset{r});
}

TEST(DatasetIo, FileRoundTrip) {
  const Dataset d = small_dataset(50);
  const auto path = std::filesystem::temp_directory_path() / "clarigate_io_test.jsonl";
  write_dataset(path.string(), d);
  EXPECT_EQ(read_dataset(path.string()), d);
  std::filesystem::remove(path);
}

TEST(DatasetIo, EmptyInputIsEmptyDataset) {
  std::istringstream empty("");
  EXPECT_TRUE(read_dataset(empty).empty());
  std::istringstream blank("\n  \n");
  EXPECT_TRUE(read_dataset(blank).empty());
}

TEST(DatasetIo, MissingLabelIsMalformedWithLineNumber) {
  auto j = record_to_json(small_dataset(2)[1]);
  j.erase("label");
  std::istringstream in(record_to_json(small_dataset(1)[0]).dump() + "\n" + j.dump() + "\n");
  try {
    read_dataset(in);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::MalformedRecord);
    EXPECT_NE(std::string(e.what()).find("line 2"), std::string::npos) << e.what();
  }
  std::istringstream again(j.dump());
  EXPECT_EQ(read_dataset(again, false).size(), 1u);
}

TEST(DatasetIo, StructuralErrorsAreMalformed) {
  const auto good = record_to_json(small_dataset(1)[0]);
  std::vector<std::string> bad = {"{not json", "[1,2]", "{}"};
  auto misaligned = good;
  misaligned["asr_conf"].push_back(0.5);
  bad.push_back(misaligned.dump());
  auto bad_kind = good;
  bad_kind["occurrences"] = nlohmann::json::array({{{"kind", "XYZ"}}});
  bad.push_back(bad_kind.dump());
  auto wrong_type = good;
  wrong_type["snr_raw"] = "loud";
  bad.push_back(wrong_type.dump());
  for (const auto& line : bad) {
    std::istringstream in(line);
    try {
      read_dataset(in);
      ADD_FAILURE() << line;
    } catch (const Error& e) {
      EXPECT_EQ(e.code(), ErrorCode::MalformedRecord) << line;
    }
  }
}

TEST(DatasetIo, FieldNamesAreFixed) {
  const auto j = record_to_json(small_dataset(1)[0]);
  for (const char* k : {"transcript", "asr_conf", "domain", "intent", "intent_conf", "slots", "hyp_conf", "rank",
                        "occurrences", "snr_raw", "repetition", "label"})
    EXPECT_TRUE(j.contains(k)) << k;
}

TEST(Checkpoint, RoundTripGivesIdenticalProbabilities) {
  auto batch = make_micro_batch(4);
  for (auto v : kAllVariants) {
    for (auto f : {"none", "diff_att", "no_hyp"}) {
      if (v == Variant::ALWAYS && std::string(f) != "none") continue;
      ClarificationModel m(testing::small_model(v, AblationFlags::parse(f)), vocabularies_of(batch), 9);
      std::stringstream ss;
      save_checkpoint(ss, m);
      const ClarificationModel back = load_checkpoint(ss);
      EXPECT_EQ(checkpoint_bytes(back), checkpoint_bytes(m));
      EXPECT_EQ(back.config().flags.to_string(), m.config().flags.to_string());
      EXPECT_EQ(back.vocabularies(), m.vocabularies());
      for (const auto& ex : batch) EXPECT_EQ(back.predict(ex.input).p_ask, m.predict(ex.input).p_ask);
    }
  }
}

TEST(Checkpoint, RejectsGarbageAndTruncation) {
  std::istringstream garbage("definitely not a checkpoint");
  EXPECT_THROW(load_checkpoint(garbage), Error);
  auto batch = make_micro_batch(4);
  const std::string bytes =
      checkpoint_bytes(ClarificationModel(testing::small_model(Variant::SELF_ATT), vocabularies_of(batch), 1));
  std::istringstream cut(bytes.substr(0, bytes.size() / 2));
  try {
    load_checkpoint(cut);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::MalformedRecord);
  }
}

TEST(WordVectors, LoaderOverwritesKnownRows) {
  Vocab words;
  words.add("harry");
  const auto path = std::filesystem::temp_directory_path() / "clarigate_vectors.txt";
  {
    std::ofstream os(path);
    os << "harry 0.5 -0.25\nunseen 9 9\n";
  }
  Matrix emb(words.size(), 2, 7.0);
  load_word_vectors(path.string(), words, emb);
  EXPECT_EQ(emb(words.id("harry"), 0), 0.5);
  EXPECT_EQ(emb(words.id("harry"), 1), -0.25);
  EXPECT_EQ(emb(Vocab::kUnk, 0), 7.0);
  std::filesystem::remove(path);
}

}  // namespace
}  // namespace clarigate
