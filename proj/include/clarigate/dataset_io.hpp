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

// JSON-lines dataset format. One object per line; per-hypothesis fields are
// arrays aligned by position in the ranked list:
//   transcript   ["set a timer for fifteen minutes", ...]
//   asr_conf     [0.75, ...]
//   domain       ["Timers", ...]
//   intent       ["SetTimer", ...]
//   intent_conf  [0.9, ...]
//   slots        [[{"key": "duration", "value": "fifteen minutes"}], ...]
//   hyp_conf     [0.8, null, ...]        null when absent
//   rank         [1, 2, ...]
//   occurrences  [{"kind": "IC", "alt_index": 2}, {"kind": "SNR"}]
//                alt_index is a 0-based position in the list; the array
//                follows the order ASR, IC, HC, SNR, TRUNC
//   snr_raw      12.5
//   repetition   false
//   label        true                    true means ask

#pragma once

#include <fstream>
#include <istream>
#include <ostream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "clarigate/core_types.hpp"

namespace clarigate {

using Dataset = std::vector<ExampleRecord>;

namespace detail {
[[noreturn]] inline void malformed(const std::string& msg) {
  throw Error(ErrorCode::MalformedRecord, msg);
}
}  // namespace detail

inline nlohmann::json record_to_json(const ExampleRecord& r) {
  using nlohmann::json;
  json transcript = json::array(), asr = json::array(), domain = json::array(),
       intent = json::array(), intent_conf = json::array(), slots = json::array(),
       hyp_conf = json::array(), rank = json::array(), occ = json::array();
  for (const auto& h : r.hypotheses) {
    transcript.push_back(join(h.transcript));
    asr.push_back(h.asr_conf);
    domain.push_back(h.domain);
    intent.push_back(h.intent);
    intent_conf.push_back(h.intent_conf);
    json s = json::array();
    for (const auto& slot : h.slots) s.push_back({{"key", slot.key}, {"value", join(slot.value)}});
    slots.push_back(std::move(s));
    hyp_conf.push_back(h.hyp_conf ? json(*h.hyp_conf) : json(nullptr));
    rank.push_back(h.rank);
  }
  for (const auto& o : r.occurrences) {
    json j = {{"kind", std::string(to_string(o.kind))}};
    if (o.alt_index) j["alt_index"] = *o.alt_index;
    occ.push_back(std::move(j));
  }
  json j = {{"transcript", transcript}, {"asr_conf", asr},       {"domain", domain},
            {"intent", intent},         {"intent_conf", intent_conf}, {"slots", slots},
            {"hyp_conf", hyp_conf},     {"rank", rank},          {"occurrences", occ},
            {"snr_raw", r.snr_raw},     {"repetition", r.repetition}};
  if (r.label) j["label"] = *r.label;
  return j;
}

/// Parses one record. `require_label` makes a missing label an error.
inline ExampleRecord record_from_json(const nlohmann::json& j, bool require_label = true) {
  using detail::malformed;
  if (!j.is_object()) malformed("record is not an object");
  auto field = [&](const char* name) -> const nlohmann::json& {
    auto it = j.find(name);
    if (it == j.end()) malformed(std::string("missing field \"") + name + "\"");
    return *it;
  };
  try {
    const auto& transcript = field("transcript");
    if (!transcript.is_array()) malformed("\"transcript\" must be an array");
    const std::size_t n = transcript.size();
    const char* columns[] = {"asr_conf", "domain", "intent", "intent_conf", "slots", "hyp_conf", "rank"};
    for (const char* c : columns)
      if (!field(c).is_array() || field(c).size() != n)
        malformed(std::string("\"") + c + "\" must be an array aligned with \"transcript\"");
    ExampleRecord r;
    for (std::size_t i = 0; i < n; ++i) {
      Hypothesis h;
      h.transcript = tokenize(transcript[i].get<std::string>());
      h.asr_conf = field("asr_conf")[i].get<double>();
      h.domain = field("domain")[i].get<std::string>();
      h.intent = field("intent")[i].get<std::string>();
      h.intent_conf = field("intent_conf")[i].get<double>();
      for (const auto& s : field("slots")[i])
        h.slots.push_back({s.at("key").get<std::string>(), tokenize(s.at("value").get<std::string>())});
      const auto& hc = field("hyp_conf")[i];
      if (!hc.is_null()) h.hyp_conf = hc.get<double>();
      h.rank = field("rank")[i].get<int>();
      r.hypotheses.push_back(std::move(h));
    }
    for (const auto& o : field("occurrences")) {
      AmbiguityOccurrence occ;
      occ.kind = ambiguity_from_string(o.at("kind").get<std::string>());
      if (occ.kind == AmbiguityType::TOP) malformed("TOP cannot be an occurrence");
      if (o.contains("alt_index")) occ.alt_index = o.at("alt_index").get<std::size_t>();
      r.occurrences.push_back(occ);
    }
    r.snr_raw = field("snr_raw").get<double>();
    r.repetition = field("repetition").get<bool>();
    if (j.contains("label")) r.label = j.at("label").get<bool>();
    else if (require_label) malformed("missing field \"label\"");
    return r;
  } catch (const nlohmann::json::exception& e) {
    malformed(e.what());
  } catch (const Error& e) {
    malformed(e.message());
  }
}

inline void write_dataset(std::ostream& os, const Dataset& data) {
  for (const auto& r : data) os << record_to_json(r).dump() << '\n';
  if (!os) throw Error(ErrorCode::Io, "dataset write failed");
}

inline void write_dataset(const std::string& path, const Dataset& data) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw Error(ErrorCode::Io, "cannot write " + path);
  write_dataset(os, data);
}

/// Reads JSON lines; blank lines are skipped. Errors carry the line number.
inline Dataset read_dataset(std::istream& is, bool require_label = true) {
  Dataset data;
  std::string line;
  for (std::size_t line_no = 1; std::getline(is, line); ++line_no) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      auto j = nlohmann::json::parse(line);
      data.push_back(record_from_json(j, require_label));
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorCode::MalformedRecord, "line " + std::to_string(line_no) + ": " + e.what());
    } catch (const Error& e) {
      throw Error(ErrorCode::MalformedRecord, "line " + std::to_string(line_no) + ": " + e.message());
    }
  }
  return data;
}

inline Dataset read_dataset(const std::string& path, bool require_label = true) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw Error(ErrorCode::Io, "cannot open " + path);
  return read_dataset(is, require_label);
}

/// Assembles model inputs for every record. Records must carry labels.
inline std::vector<LabeledExample> to_labeled(const Dataset& data, SnrBounds bounds = {}) {
  std::vector<LabeledExample> out;
  out.reserve(data.size());
  for (const auto& r : data) out.push_back(to_labeled(r, bounds));
  return out;
}

}  // namespace clarigate
