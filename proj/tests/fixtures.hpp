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

#include <string>
#include <vector>

#include "clarigate/clarigate.hpp"

namespace clarigate::testing {

inline Hypothesis make_hyp(const std::string& text, double asr, const std::string& domain,
                           const std::string& intent, double ic, const std::string& slot_key,
                           std::optional<double> hc, int rank) {
  Hypothesis h;
  h.transcript = tokenize(text);
  h.asr_conf = asr;
  h.domain = domain;
  h.intent = intent;
  h.intent_conf = ic;
  if (!slot_key.empty()) h.slots.push_back({slot_key, tokenize(text)});
  h.hyp_conf = hc;
  h.rank = rank;
  return h;
}

// The five-row "harry potter" list with the confidences as printed.
inline HypothesisList harry_potter_list() {
  return {
      make_hyp("harry potter", 0.9, "Video", "PlayVideo", 0.95, "videotitle", 0.9, 1),
      make_hyp("harry potter", 0.9, "Books", "ReadBook", 0.75, "booktitle", 0.8, 2),
      make_hyp("harry potter", 0.9, "Music", "SoundTrack", 0.94, "albumtitle", 0.6, 3),
      make_hyp("harry potter", 0.9, "Knowledge", "GetWiki", 0.7, "entity", 0.4, 4),
      make_hyp("larry potter", 0.6, "Books", "ReadBook", 0.65, "booktitle", 0.1, 5),
  };
}

inline TurnContext clean_context() { return TurnContext{35.0, false, {}}; }

inline ModelConfig small_model(Variant v, AblationFlags flags = {}) {
  ModelConfig c;
  c.variant = v;
  c.flags = flags;
  c.featurizer.d_model = 8;
  c.featurizer.n_heads_sentence = 2;
  c.featurizer.ffn_mult = 2;
  c.hyp_heads = 2;
  c.hyp_ffn_mult = 2;
  return c;
}

// Random input with `n_alt` alternatives drawn from the micro-batch vocabulary.
inline DecisionInput random_input(Rng& rng, std::size_t n_alt) {
  static const std::vector<std::string> words = {"play", "the", "song", "harry", "potter",
                                                 "set", "a", "timer", "for", "fifteen",
                                                 "fifty", "minutes", "turn", "on", "light"};
  static const std::vector<std::string> domains = {"Music", "Video", "Timers", "Home"};
  static const std::vector<std::string> intents = {"PlaySong", "PlayVideo", "SetTimer", "TurnOn"};
  static const std::vector<std::string> keys = {"songtitle", "duration", "device"};
  auto pick = [&](const std::vector<std::string>& v) {
    return v[std::uniform_int_distribution<std::size_t>(0, v.size() - 1)(rng)];
  };
  auto hyp = [&]() {
    Hypothesis h;
    const std::size_t len = std::uniform_int_distribution<std::size_t>(1, 5)(rng);
    for (std::size_t i = 0; i < len; ++i) h.transcript.push_back(pick(words));
    h.asr_conf = uniform(rng, 0.0, 1.0);
    h.intent_conf = uniform(rng, 0.0, 1.0);
    h.domain = pick(domains);
    h.intent = pick(intents);
    const std::size_t ns = std::uniform_int_distribution<std::size_t>(0, 2)(rng);
    for (std::size_t i = 0; i < ns; ++i) h.slots.push_back({pick(keys), {pick(words)}});
    return h;
  };
  static constexpr AmbiguityType kinds[] = {AmbiguityType::ASR, AmbiguityType::IC, AmbiguityType::HC,
                                            AmbiguityType::SNR, AmbiguityType::TRUNC};
  DecisionInput in;
  in.top = hyp();
  for (std::size_t i = 0; i < n_alt; ++i) {
    const AmbiguityType k = kinds[i % 5];
    if (has_alternative(k) && uniform(rng, 0.0, 1.0) < 0.8)
      in.alternatives.push_back({k, hyp()});
    else
      in.alternatives.push_back({k, Placeholder{}});
    in.occurrences[index_of(k)] = true;
  }
  in.snr_norm = uniform(rng, -1.0, 1.0);
  in.repetition = uniform(rng, 0.0, 1.0) < 0.3;
  return in;
}

inline Vocabularies random_input_vocab() {
  Rng rng(7);
  Vocabularies v;
  for (int i = 0; i < 200; ++i) {
    DecisionInput in = random_input(rng, 3);
    v.observe(in.top);
    for (const auto& a : in.alternatives)
      if (!a.is_placeholder()) v.observe(a.hypothesis());
  }
  return v;
}

}  // namespace clarigate::testing
