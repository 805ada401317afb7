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

#include <algorithm>
#include <array>
#include <cctype>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "clarigate/error.hpp"

namespace clarigate {

/// Ambiguity kinds in the fixed order used by occurrence vectors.
/// TOP only tags the top hypothesis during featurization.
enum class AmbiguityType : std::uint8_t { ASR = 0, IC = 1, HC = 2, SNR = 3, TRUNC = 4, TOP = 5 };

inline constexpr std::size_t kNumOccurrenceTypes = 5;
inline constexpr std::size_t kNumAmbiguityTags = 6;

inline constexpr std::array<AmbiguityType, kNumOccurrenceTypes> kOccurrenceTypes = {
    AmbiguityType::ASR, AmbiguityType::IC, AmbiguityType::HC, AmbiguityType::SNR,
    AmbiguityType::TRUNC};

constexpr std::size_t index_of(AmbiguityType t) { return static_cast<std::size_t>(t); }

constexpr std::string_view to_string(AmbiguityType t) {
  switch (t) {
    case AmbiguityType::ASR: return "ASR";
    case AmbiguityType::IC: return "IC";
    case AmbiguityType::HC: return "HC";
    case AmbiguityType::SNR: return "SNR";
    case AmbiguityType::TRUNC: return "TRUNC";
    case AmbiguityType::TOP: return "TOP";
  }
  return "?";
}

inline AmbiguityType ambiguity_from_string(std::string_view s) {
  for (std::size_t i = 0; i < kNumAmbiguityTags; ++i) {
    auto t = static_cast<AmbiguityType>(i);
    if (to_string(t) == s) return t;
  }
  throw Error(ErrorCode::MalformedRecord, "unknown ambiguity type '" + std::string(s) + "'");
}

/// SNR and TRUNC never point at an alternative hypothesis.
constexpr bool has_alternative(AmbiguityType t) {
  return t == AmbiguityType::ASR || t == AmbiguityType::IC || t == AmbiguityType::HC;
}

using Tokens = std::vector<std::string>;

/// Lowercase + whitespace split.
inline Tokens tokenize(std::string_view text) {
  Tokens out;
  std::string cur;
  for (char c : text) {
    if (std::isspace(static_cast<unsigned char>(c))) {
      if (!cur.empty()) out.push_back(std::move(cur)), cur.clear();
    } else {
      cur.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
    }
  }
  if (!cur.empty()) out.push_back(std::move(cur));
  return out;
}

inline std::string join(const Tokens& tokens) {
  std::string out;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (i) out.push_back(' ');
    out += tokens[i];
  }
  return out;
}

struct Slot {
  std::string key;
  Tokens value;

  bool operator==(const Slot&) const = default;
};

/// One ranked interpretation of an utterance.
struct Hypothesis {
  Tokens transcript;
  double asr_conf = 0.0;
  std::string domain;
  std::string intent;
  double intent_conf = 0.0;
  std::vector<Slot> slots;
  std::optional<double> hyp_conf;  // absent for rule-based hypotheses
  int rank = 1;

  bool operator==(const Hypothesis&) const = default;
};

/// Non-empty, ordered by rank ascending.
using HypothesisList = std::vector<Hypothesis>;

struct SnrBounds {
  double lo = 0.0;
  double hi = 40.0;
};

struct TurnContext {
  double snr_raw = 0.0;
  bool repetition = false;
  SnrBounds bounds;
};

struct AmbiguityOccurrence {
  AmbiguityType kind = AmbiguityType::ASR;
  std::optional<std::size_t> alt_index;

  bool operator==(const AmbiguityOccurrence&) const = default;
};

/// Stands in for the missing alternative of SNR and TRUNC occurrences.
struct Placeholder {
  bool operator==(const Placeholder&) const = default;
};

struct Alternative {
  AmbiguityType kind = AmbiguityType::SNR;
  std::variant<Placeholder, Hypothesis> value;

  bool is_placeholder() const { return std::holds_alternative<Placeholder>(value); }
  const Hypothesis& hypothesis() const { return std::get<Hypothesis>(value); }

  bool operator==(const Alternative&) const = default;
};

/// Occurrence flags in (ASR, IC, HC, SNR, TRUNC) order.
using OccurrenceVector = std::array<bool, kNumOccurrenceTypes>;

struct DecisionInput {
  Hypothesis top;
  std::vector<Alternative> alternatives;
  OccurrenceVector occurrences{};
  double snr_norm = 0.0;
  bool repetition = false;

  bool operator==(const DecisionInput&) const = default;
};

struct LabeledExample {
  DecisionInput input;
  bool label = false;
  std::set<AmbiguityType> type_tags;
};

/// Raw dataset record: one line of the JSON-lines format.
struct ExampleRecord {
  HypothesisList hypotheses;
  std::vector<AmbiguityOccurrence> occurrences;
  double snr_raw = 0.0;
  bool repetition = false;
  std::optional<bool> label;

  bool operator==(const ExampleRecord&) const = default;
};

namespace detail {
inline bool in_unit(double x) { return std::isfinite(x) && x >= 0.0 && x <= 1.0; }
}  // namespace detail

inline void validate_hypothesis_list(const HypothesisList& list) {
  if (list.empty()) throw Error(ErrorCode::EmptyList, "hypothesis list is empty");
  std::set<int> ranks;
  for (std::size_t i = 0; i < list.size(); ++i) {
    const auto& h = list[i];
    if (!detail::in_unit(h.asr_conf) || !detail::in_unit(h.intent_conf) ||
        (h.hyp_conf && !detail::in_unit(*h.hyp_conf))) {
      throw Error(ErrorCode::ConfidenceOutOfRange,
                  "hypothesis " + std::to_string(i) + " has a confidence outside [0,1]");
    }
    if (!ranks.insert(h.rank).second) {
      throw Error(ErrorCode::RankNotUnique, "rank " + std::to_string(h.rank) + " repeats");
    }
    if (h.rank < 1 || (i > 0 && h.rank < list[i - 1].rank)) {
      throw Error(ErrorCode::RankOutOfOrder, "ranks must be >= 1 and ascending");
    }
    if (i > 0 && h.hyp_conf && list[i - 1].hyp_conf && *h.hyp_conf > *list[i - 1].hyp_conf) {
      throw Error(ErrorCode::NonMonotoneHypConf,
                  "hyp_conf increases at position " + std::to_string(i));
    }
  }
}

/// Affine map of [lo, hi] onto [-1, 1], clamped.
inline double normalize_snr(double snr_raw, SnrBounds b) {
  if (!(b.lo < b.hi)) throw Error(ErrorCode::Config, "snr bounds require lo < hi");
  if (std::isnan(snr_raw)) return 0.0;
  double x = 2.0 * (snr_raw - b.lo) / (b.hi - b.lo) - 1.0;
  return std::clamp(x, -1.0, 1.0);
}

inline DecisionInput assemble_decision_input(const HypothesisList& list,
                                             const std::vector<AmbiguityOccurrence>& occ,
                                             const TurnContext& ctx) {
  validate_hypothesis_list(list);
  DecisionInput in;
  in.top = list.front();
  in.snr_norm = normalize_snr(ctx.snr_raw, ctx.bounds);
  in.repetition = ctx.repetition;
  for (const auto& o : occ) {
    if (o.kind == AmbiguityType::TOP) {
      throw Error(ErrorCode::MalformedRecord, "TOP is not an occurrence type");
    }
    bool& bit = in.occurrences[index_of(o.kind)];
    if (bit) {
      throw Error(ErrorCode::DuplicateOccurrenceType,
                  "type " + std::string(to_string(o.kind)) + " occurs twice");
    }
    bit = true;
    if (!has_alternative(o.kind)) {
      if (o.alt_index) {
        throw Error(ErrorCode::AltIndexOutOfRange,
                    std::string(to_string(o.kind)) + " occurrences carry no alternative");
      }
      in.alternatives.push_back({o.kind, Placeholder{}});
      continue;
    }
    if (!o.alt_index || *o.alt_index == 0 || *o.alt_index >= list.size()) {
      throw Error(ErrorCode::AltIndexOutOfRange,
                  std::string(to_string(o.kind)) + " occurrence needs a non-top index < " +
                      std::to_string(list.size()));
    }
    in.alternatives.push_back({o.kind, list[*o.alt_index]});
  }
  return in;
}

inline std::set<AmbiguityType> type_tags(const OccurrenceVector& v) {
  std::set<AmbiguityType> tags;
  for (auto t : kOccurrenceTypes)
    if (v[index_of(t)]) tags.insert(t);
  return tags;
}

/// Record -> labeled example. Unlabeled records count as no-ask.
inline LabeledExample to_labeled(const ExampleRecord& r, SnrBounds bounds = {}) {
  LabeledExample ex;
  ex.input = assemble_decision_input(r.hypotheses, r.occurrences,
                                     TurnContext{r.snr_raw, r.repetition, bounds});
  ex.label = r.label.value_or(false);
  ex.type_tags = type_tags(ex.input.occurrences);
  return ex;
}

}  // namespace clarigate
