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
#include <cmath>
#include <optional>
#include <ranges>
#include <set>
#include <string>
#include <vector>

#include "clarigate/core_types.hpp"

namespace clarigate {

struct DetectorConfig {
  double asr_conf_floor = 0.8;
  double asr_conf_gap = 0.2;
  double ic_conf_gap = 0.2;
  double ic_conf_floor = 0.5;
  double hc_conf_gap = 0.2;
  double snr_threshold = 10.0;
  std::set<std::string> trunc_lexicon = {"a",  "an", "the", "my",  "your", "his", "her",
                                         "its", "our", "their", "by", "to", "of", "for",
                                         "on", "in", "at", "with", "from"};

  void validate() const {
    auto gap_ok = [](double g) { return g > 0.0 && g <= 1.0; };
    auto floor_ok = [](double f) { return f >= 0.0 && f <= 1.0; };
    if (!gap_ok(asr_conf_gap) || !gap_ok(ic_conf_gap) || !gap_ok(hc_conf_gap))
      throw Error(ErrorCode::Config, "detector gaps must lie in (0, 1]");
    if (!floor_ok(asr_conf_floor) || !floor_ok(ic_conf_floor))
      throw Error(ErrorCode::Config, "detector floors must lie in [0, 1]");
    if (!std::isfinite(snr_threshold)) throw Error(ErrorCode::Config, "snr_threshold must be finite");
  }
};

/// Levenshtein distance over whole elements (tokens), unit costs.
template <std::ranges::random_access_range A, std::ranges::random_access_range B>
std::size_t token_edit_distance(const A& a, const B& b) {
  const std::size_t m = std::ranges::size(a);
  const std::size_t n = std::ranges::size(b);
  std::vector<std::size_t> row(n + 1);
  for (std::size_t j = 0; j <= n; ++j) row[j] = j;
  for (std::size_t i = 1; i <= m; ++i) {
    std::size_t diag = row[0];
    row[0] = i;
    for (std::size_t j = 1; j <= n; ++j) {
      std::size_t up = row[j];
      std::size_t sub = diag + (a[i - 1] == b[j - 1] ? 0 : 1);
      row[j] = std::min({sub, up + 1, row[j - 1] + 1});
      diag = up;
    }
  }
  return row[n];
}

namespace detail {

inline std::vector<Tokens> slot_values(const Hypothesis& h) {
  std::vector<Tokens> v;
  v.reserve(h.slots.size());
  for (const auto& s : h.slots) v.push_back(s.value);
  std::sort(v.begin(), v.end());
  return v;
}

/// Highest score wins; ties go to the earlier (lower-rank) row.
template <typename Qualifies, typename Score>
std::optional<std::size_t> best_alternative(const HypothesisList& list, Qualifies&& qualifies,
                                            Score&& score) {
  std::optional<std::size_t> best;
  for (std::size_t i = 1; i < list.size(); ++i) {
    if (!qualifies(list[i])) continue;
    if (!best || score(list[i]) > score(list[*best])) best = i;
  }
  return best;
}

}  // namespace detail

inline std::optional<AmbiguityOccurrence> detect_asr(const HypothesisList& list,
                                                     const DetectorConfig& cfg) {
  const Hypothesis& top = list.front();
  const auto top_values = detail::slot_values(top);
  auto idx = detail::best_alternative(
      list,
      [&](const Hypothesis& h) {
        return token_edit_distance(top.transcript, h.transcript) == 1 &&
               std::abs(top.asr_conf - h.asr_conf) <= cfg.asr_conf_gap &&
               h.asr_conf >= cfg.asr_conf_floor && detail::slot_values(h) != top_values;
      },
      [](const Hypothesis& h) { return h.asr_conf; });
  if (!idx) return std::nullopt;
  return AmbiguityOccurrence{AmbiguityType::ASR, idx};
}

inline std::optional<AmbiguityOccurrence> detect_ic(const HypothesisList& list,
                                                    const DetectorConfig& cfg) {
  const Hypothesis& top = list.front();
  auto idx = detail::best_alternative(
      list,
      [&](const Hypothesis& h) {
        return h.transcript == top.transcript && h.intent != top.intent &&
               h.intent_conf >= cfg.ic_conf_floor &&
               std::abs(top.intent_conf - h.intent_conf) <= cfg.ic_conf_gap;
      },
      [](const Hypothesis& h) { return h.intent_conf; });
  if (!idx) return std::nullopt;
  return AmbiguityOccurrence{AmbiguityType::IC, idx};
}

inline std::optional<AmbiguityOccurrence> detect_hc(const HypothesisList& list,
                                                    const DetectorConfig& cfg) {
  const Hypothesis& top = list.front();
  if (!top.hyp_conf) return std::nullopt;
  auto idx = detail::best_alternative(
      list,
      [&](const Hypothesis& h) {
        return h.hyp_conf && std::abs(*top.hyp_conf - *h.hyp_conf) <= cfg.hc_conf_gap;
      },
      [](const Hypothesis& h) { return *h.hyp_conf; });
  if (!idx) return std::nullopt;
  return AmbiguityOccurrence{AmbiguityType::HC, idx};
}

/// Strict: snr_raw equal to the threshold does not fire.
inline std::optional<AmbiguityOccurrence> detect_snr(const TurnContext& ctx,
                                                     const DetectorConfig& cfg) {
  if (ctx.snr_raw < cfg.snr_threshold) return AmbiguityOccurrence{AmbiguityType::SNR, std::nullopt};
  return std::nullopt;
}

inline std::optional<AmbiguityOccurrence> detect_trunc(const Tokens& transcript,
                                                       const DetectorConfig& cfg) {
  if (transcript.empty()) throw Error(ErrorCode::EmptyTranscript, "cannot test truncation");
  if (cfg.trunc_lexicon.contains(transcript.back()))
    return AmbiguityOccurrence{AmbiguityType::TRUNC, std::nullopt};
  return std::nullopt;
}

/// All five detectors, in occurrence-vector order.
inline std::vector<AmbiguityOccurrence> detect_all(const HypothesisList& list,
                                                   const TurnContext& ctx,
                                                   const DetectorConfig& cfg) {
  validate_hypothesis_list(list);
  std::vector<AmbiguityOccurrence> out;
  for (auto found : {detect_asr(list, cfg), detect_ic(list, cfg), detect_hc(list, cfg),
                     detect_snr(ctx, cfg), detect_trunc(list.front().transcript, cfg)}) {
    if (found) out.push_back(*found);
  }
  return out;
}

}  // namespace clarigate
