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

// Synthetic spoken-language logs: ranked hypothesis lists with injected
// ambiguities and weak satisfaction labels.
//
// Each example draws a primary ambiguity type (and with some probability a
// second one), realizes an utterance from a template grammar, decides
// whether the top hypothesis misrecognizes the latent truth, and builds a
// ranked list whose detectors fire exactly on the injected types. The
// label is "ask" when some ambiguity occurred and the planted rule says
// the user was not satisfied; satisfaction is flipped at a fixed rate.
//
// Where the evidence for a wrong top lives depends on the type: for ASR,
// IC and HC it is in the alternative's confidences, for SNR and TRUNC it is
// in the top hypothesis itself. A repeated utterance is more likely after a
// wrong top.

#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <functional>
#include <istream>
#include <map>
#include <numeric>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "clarigate/core_types.hpp"
#include "clarigate/dataset_io.hpp"
#include "clarigate/detectors.hpp"
#include "clarigate/params.hpp"

namespace clarigate {

// ---------------------------------------------------------------------------
// Grammar

struct Template {
  std::string domain;
  std::string intent;
  Tokens tokens;  // "{name}" tokens are slot placeholders
};

/// Utterance templates with slot fillers, confusable word pairs and
/// competing intent pairs. Text format:
///
///   # comment
///   [slot duration]
///   fifteen minutes
///   [templates]
///   Timers SetTimer: set a timer for {duration}
///   [confusions]
///   fifteen fifty
///   [intent_pairs]
///   TurnOn TurnOff
struct Grammar {
  std::map<std::string, std::vector<Tokens>> slots;
  std::vector<Template> templates;
  std::vector<std::pair<std::string, std::string>> confusions;
  std::vector<std::pair<std::string, std::string>> intent_pairs;

  static Grammar parse(std::istream& in) {
    Grammar g;
    enum class Section { None, Slot, Templates, Confusions, IntentPairs } section = Section::None;
    std::string slot_name, line;
    for (std::size_t line_no = 1; std::getline(in, line); ++line_no) {
      auto fail = [&](const std::string& msg) {
        throw Error(ErrorCode::Config, "grammar line " + std::to_string(line_no) + ": " + msg);
      };
      if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
      const auto first = line.find_first_not_of(" \t\r");
      if (first == std::string::npos) continue;
      line = line.substr(first, line.find_last_not_of(" \t\r") - first + 1);
      if (line.front() == '[') {
        if (line.back() != ']') fail("unterminated section header");
        std::istringstream hdr(line.substr(1, line.size() - 2));
        std::string kind;
        hdr >> kind;
        if (kind == "slot") {
          if (!(hdr >> slot_name)) fail("slot section needs a name");
          g.slots[slot_name];
          section = Section::Slot;
        } else if (kind == "templates") {
          section = Section::Templates;
        } else if (kind == "confusions") {
          section = Section::Confusions;
        } else if (kind == "intent_pairs") {
          section = Section::IntentPairs;
        } else {
          fail("unknown section " + kind);
        }
        continue;
      }
      switch (section) {
        case Section::None:
          fail("content outside a section");
          break;
        case Section::Slot:
          g.slots[slot_name].push_back(tokenize(line));
          break;
        case Section::Templates: {
          const auto colon = line.find(':');
          if (colon == std::string::npos) fail("template needs 'Domain Intent: text'");
          std::istringstream head(line.substr(0, colon));
          Template t;
          if (!(head >> t.domain >> t.intent)) fail("template needs a domain and an intent");
          t.tokens = tokenize(line.substr(colon + 1));
          if (t.tokens.empty()) fail("empty template");
          g.templates.push_back(std::move(t));
          break;
        }
        case Section::Confusions:
        case Section::IntentPairs: {
          std::istringstream pair(line);
          std::string a, b;
          if (!(pair >> a >> b)) fail("expected two words");
          (section == Section::Confusions ? g.confusions : g.intent_pairs).emplace_back(a, b);
          break;
        }
      }
    }
    g.validate();
    return g;
  }

  static Grammar from_string(const std::string& text) {
    std::istringstream in(text);
    return parse(in);
  }

  static Grammar load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::Io, "cannot open grammar " + path);
    return parse(in);
  }

  void validate() const {
    if (templates.empty()) throw Error(ErrorCode::Config, "grammar has no templates");
    for (const auto& t : templates)
      for (const auto& tok : t.tokens)
        if (is_placeholder(tok) && !slots.contains(placeholder_name(tok)))
          throw Error(ErrorCode::Config, "template uses undefined slot " + tok);
    for (const auto& [name, fillers] : slots)
      if (fillers.empty()) throw Error(ErrorCode::Config, "slot " + name + " has no fillers");
  }

  static bool is_placeholder(const std::string& tok) {
    return tok.size() > 2 && tok.front() == '{' && tok.back() == '}';
  }
  static std::string placeholder_name(const std::string& tok) { return tok.substr(1, tok.size() - 2); }

  std::set<std::string> domains() const {
    std::set<std::string> d;
    for (const auto& t : templates) d.insert(t.domain);
    return d;
  }
  std::set<std::string> intents() const {
    std::set<std::string> i;
    for (const auto& t : templates) i.insert(t.intent);
    return i;
  }
};

inline const char* default_grammar_text() {
  return R"(# Default utterance grammar.
[slot duration]
fifteen minutes
fifty minutes
thirteen minutes
thirty minutes
fourteen minutes
forty minutes
sixteen seconds
sixty seconds
two hours
ten minutes
[slot time]
seven am
eleven pm
six thirty
noon
nine fifteen
nine fifty
[slot videotitle]
harry potter
star wars
frozen
the lion king
toy story
[slot booktitle]
harry potter
dune
the hobbit
moby dick
[slot artist]
mozart
adele
drake
queen
the beatles
[slot song]
hello
yesterday
thriller
[slot device]
light
fan
lamp
heater
tv
[slot room]
kitchen
bedroom
living room
[slot destination]
the airport
downtown
boston
austin
the station
[slot city]
boston
austin
seattle
dallas
[slot item]
paper towels
coffee
batteries
dog food
[slot contact]
mom
tom
john
sarah
[slot day]
monday
sunday
today
tomorrow
[templates]
Timers SetTimer: set a timer for {duration}
Timers CancelTimer: cancel the timer for {duration}
Alarms SetAlarm: set an alarm for {time}
Alarms CancelAlarm: cancel my alarm for {time}
Music PlayMusic: play music by {artist}
Music PlaySong: play {song} by {artist}
Music PlaySoundtrack: play the {videotitle} soundtrack
Music PauseMusic: pause the music
Video PlayVideo: play {videotitle}
Video SearchVideo: find movies like {videotitle}
Video PlayTrailer: play the trailer for {videotitle}
Books ReadBook: read {booktitle}
Books BuyBook: buy the book {booktitle}
SmartHome TurnOn: turn on the {device}
SmartHome TurnOff: turn off the {device}
SmartHome DimLight: dim the {device} in the {room}
Rideshare GetRide: get me a ride to {destination}
Rideshare CancelRide: cancel my ride to {destination}
Weather GetWeather: what is the weather in {city}
Weather GetForecast: show the forecast for {city}
Shopping AddToCart: add {item} to my cart
Shopping ReorderItem: reorder {item}
Communication CallContact: call {contact}
Communication MessageContact: send a message to {contact}
Calendar CreateEvent: schedule a meeting with {contact} on {day}
Calendar CheckCalendar: what is on my calendar {day}
Navigation GetDirections: directions to {destination}
Navigation TrafficInfo: how is traffic to {destination}
[confusions]
fifteen fifty
thirteen thirty
fourteen forty
sixteen sixty
harry larry
light night
fan van
lamp camp
austin boston
mom tom
hello yellow
drake lake
queen green
noon moon
seven eleven
dune june
[intent_pairs]
TurnOn TurnOff
PlayVideo PlaySoundtrack
PlayVideo ReadBook
SetTimer SetAlarm
CancelTimer CancelAlarm
PlayMusic PlaySong
GetWeather GetForecast
CallContact MessageContact
GetRide GetDirections
GetDirections TrafficInfo
AddToCart ReorderItem
CreateEvent CheckCalendar
)";
}

inline const Grammar& default_grammar() {
  static const Grammar g = Grammar::from_string(default_grammar_text());
  return g;
}

// ---------------------------------------------------------------------------
// Configuration and planted rule

/// What the user actually meant.
struct Interpretation {
  Tokens transcript;
  std::string domain;
  std::string intent;
  std::vector<Slot> slots;

  bool operator==(const Interpretation&) const = default;
};

/// Decides whether the turn satisfied the user.
struct PlantedRule {
  std::function<bool(const Interpretation& truth, const Hypothesis& top, const TurnContext& ctx)>
      satisfied = [](const Interpretation& truth, const Hypothesis& top, const TurnContext&) {
        return truth.transcript == top.transcript && truth.intent == top.intent;
      };
};

struct Interval {
  double lo = 0.0;
  double hi = 1.0;
};

/// Confidence draws. "wrong" means the top hypothesis misrecognizes the
/// latent truth; "right" means it does not.
struct ConfidenceNoise {
  Interval top_hyp_conf{0.6, 0.95};
  Interval top_asr_conf{0.8, 0.98};        // ASR/IC/HC examples, either case
  Interval top_intent_conf{0.6, 0.95};     // examples whose primary type is not TRUNC
  Interval snr_asr_right{0.55, 0.98};      // top asr_conf, SNR primary
  Interval snr_asr_wrong{0.30, 0.80};
  Interval trunc_intent_right{0.55, 0.98};  // top intent_conf, TRUNC primary
  Interval trunc_intent_wrong{0.30, 0.75};
  Interval asr_delta_right{-0.20, 0.03};   // alt.asr_conf - top.asr_conf
  Interval asr_delta_wrong{-0.08, 0.15};
  Interval ic_delta_right{-0.20, 0.02};    // alt.intent_conf - top.intent_conf
  Interval ic_delta_wrong{-0.05, 0.18};
  Interval hc_gap_right{0.08, 0.19};       // top.hyp_conf - alt.hyp_conf
  Interval hc_gap_wrong{0.0, 0.10};
  Interval hc_intent_right{0.05, 0.32};    // alt.intent_conf for HC alternatives
  Interval hc_intent_wrong{0.22, 0.48};
  Interval filler_gap{0.25, 0.60};         // top.hyp_conf - filler.hyp_conf
  Interval other_alt_gap{0.25, 0.45};      // hyp_conf gap of ASR and IC alternatives
  Interval snr_low{0.0, 9.9};
  Interval snr_clean{10.5, 40.0};
};

/// Injection shares and ask rates follow the per-type test counts of a
/// large production log (totals 4.6M/4.5M/343K/18.2M/2.8M; ask
/// 780K/491K/92K/3.8M/1.7M).
struct GeneratorConfig {
  std::size_t n_examples = 50000;
  std::uint64_t seed = 1;
  // Probability that an example's primary ambiguity is each type, in the
  // order ASR, IC, HC, SNR, TRUNC. The remainder to 1 is unambiguous.
  std::array<double, 5> injection_rates = {4.6 / 30.443, 4.5 / 30.443, 0.343 / 30.443,
                                           18.2 / 30.443, 2.8 / 30.443};
  // Target P(ask | primary type).
  std::array<double, 5> ask_rates = {0.170, 0.109, 0.268, 0.209, 0.607};
  double flip_rate = 0.05;       // satisfaction label noise
  double co_occurrence = 0.1;    // probability of a second ambiguity type
  double repeat_if_wrong = 0.30;
  double repeat_if_right = 0.06;
  double missing_hyp_conf = 0.1;  // fillers without a reranker score
  std::size_t max_fillers = 2;
  double test_fraction = 0.5;
  double valid_fraction = 0.1;    // of the non-test part
  std::size_t max_attempts = 64;
  ConfidenceNoise noise;
  DetectorConfig detector;
  SnrBounds snr_bounds;
  std::string grammar_file;       // empty: built-in grammar

  void validate() const {
    if (n_examples < 1) throw Error(ErrorCode::Config, "n_examples must be >= 1");
    auto unit = [](double x) { return x >= 0.0 && x <= 1.0; };
    double total = 0.0;
    for (std::size_t i = 0; i < 5; ++i) {
      if (!unit(injection_rates[i]) || !unit(ask_rates[i]))
        throw Error(ErrorCode::Config, "rates must lie in [0, 1]");
      total += injection_rates[i];
    }
    if (total > 1.0 + 1e-9) throw Error(ErrorCode::Config, "injection rates sum above 1");
    for (double r : {flip_rate, co_occurrence, repeat_if_wrong, repeat_if_right, missing_hyp_conf,
                     test_fraction, valid_fraction})
      if (!unit(r)) throw Error(ErrorCode::Config, "probabilities must lie in [0, 1]");
    if (flip_rate >= 0.5) throw Error(ErrorCode::Config, "flip_rate must be below 0.5");
    if (max_attempts < 1) throw Error(ErrorCode::Config, "max_attempts must be >= 1");
    detector.validate();
    if (!(snr_bounds.lo < snr_bounds.hi)) throw Error(ErrorCode::Config, "snr bounds need lo < hi");
  }

  /// P(top wrong | primary type) so that the post-flip ask rate matches.
  double wrong_rate(AmbiguityType t) const {
    const double r = ask_rates[index_of(t)];
    return std::clamp((r - flip_rate) / (1.0 - 2.0 * flip_rate), 0.0, 1.0);
  }
};

// ---------------------------------------------------------------------------
// Generation

struct GeneratedExample {
  ExampleRecord record;
  Interpretation truth;
  std::vector<AmbiguityType> injected;  // primary first
  bool top_wrong = false;
  bool flipped = false;
};

namespace detail {

struct Utterance {
  const Template* tmpl = nullptr;
  Tokens tokens;
  std::vector<Slot> slots;
  std::vector<std::pair<std::size_t, std::size_t>> spans;  // [begin, end) per slot
};

class ExampleBuilder {
 public:
  ExampleBuilder(const Grammar& g, const GeneratorConfig& cfg, const PlantedRule& rule)
      : g_(g), cfg_(cfg), rule_(rule) {
    for (const auto& [a, b] : g.confusions) {
      confusable_[a].push_back(b);
      confusable_[b].push_back(a);
    }
    for (const auto& t : g.templates) intent_domain_[t.intent] = t.domain;
    for (const auto& [a, b] : g.intent_pairs) {
      competitors_[a].push_back(b);
      competitors_[b].push_back(a);
    }
    for (std::size_t i = 0; i < g.templates.size(); ++i)
      for (const auto& tok : g.templates[i].tokens)
        if (Grammar::is_placeholder(tok) && has_confusable_filler(Grammar::placeholder_name(tok))) {
          asr_templates_.push_back(i);
          break;
        }
  }

  GeneratedExample build(std::uint64_t index) const {
    Rng rng(derive_seed(cfg_.seed, index));
    const auto types = draw_types(rng);
    // Drawn once so that rejected realizations cannot bias the label rate.
    const bool wrong = !types.empty() && bernoulli(rng, cfg_.wrong_rate(types.front()));
    const bool flipped = bernoulli(rng, cfg_.flip_rate);
    for (std::size_t attempt = 0; attempt < cfg_.max_attempts; ++attempt)
      if (auto ex = try_build(types, wrong, flipped, rng)) return *ex;
    std::string names;
    for (auto t : types) names += std::string(names.empty() ? "" : ",") + std::string(to_string(t));
    throw Error(ErrorCode::InjectionFailed,
                "example " + std::to_string(index) + ": could not realize {" + names + "}");
  }

 private:
  bool has_confusable_filler(const std::string& slot) const {
    for (const auto& f : g_.slots.at(slot))
      for (const auto& w : f)
        if (confusable_.contains(w)) return true;
    return false;
  }

  static double draw(Rng& rng, Interval iv) { return iv.lo == iv.hi ? iv.lo : uniform(rng, iv.lo, iv.hi); }
  static bool bernoulli(Rng& rng, double p) { return uniform(rng, 0.0, 1.0) < p; }
  template <typename T>
  static const T& pick(Rng& rng, const std::vector<T>& v) {
    return v[std::uniform_int_distribution<std::size_t>(0, v.size() - 1)(rng)];
  }

  std::vector<AmbiguityType> draw_types(Rng& rng) const {
    std::vector<AmbiguityType> types;
    const double u = uniform(rng, 0.0, 1.0);
    double acc = 0.0;
    for (auto t : kOccurrenceTypes) {
      acc += cfg_.injection_rates[index_of(t)];
      if (u < acc) {
        types.push_back(t);
        break;
      }
    }
    if (types.empty() || !bernoulli(rng, cfg_.co_occurrence)) return types;
    // Second type, proportional to the injection rates of compatible types.
    auto compatible = [&](AmbiguityType t) {
      if (t == types[0]) return false;
      const bool asr_trunc = (t == AmbiguityType::ASR && types[0] == AmbiguityType::TRUNC) ||
                             (t == AmbiguityType::TRUNC && types[0] == AmbiguityType::ASR);
      return !asr_trunc;
    };
    double total = 0.0;
    for (auto t : kOccurrenceTypes)
      if (compatible(t)) total += cfg_.injection_rates[index_of(t)];
    if (total <= 0.0) return types;
    const double v = uniform(rng, 0.0, total);
    acc = 0.0;
    for (auto t : kOccurrenceTypes) {
      if (!compatible(t)) continue;
      acc += cfg_.injection_rates[index_of(t)];
      if (v < acc) {
        types.push_back(t);
        break;
      }
    }
    return types;
  }

  /// Fills the template's slots. With `confusable`, at least one slot value
  /// contains a word that has a confusion partner.
  Utterance realize(const Template& t, Rng& rng, bool confusable) const {
    Utterance u;
    u.tmpl = &t;
    std::vector<std::size_t> placeholder_pos;
    for (std::size_t i = 0; i < t.tokens.size(); ++i)
      if (Grammar::is_placeholder(t.tokens[i])) placeholder_pos.push_back(i);
    std::size_t forced = placeholder_pos.size();
    if (confusable) {
      std::vector<std::size_t> candidates;
      for (std::size_t k = 0; k < placeholder_pos.size(); ++k)
        if (has_confusable_filler(Grammar::placeholder_name(t.tokens[placeholder_pos[k]])))
          candidates.push_back(k);
      forced = pick(rng, candidates);
    }
    std::size_t k = 0;
    for (std::size_t i = 0; i < t.tokens.size(); ++i) {
      if (!Grammar::is_placeholder(t.tokens[i])) {
        u.tokens.push_back(t.tokens[i]);
        continue;
      }
      const std::string name = Grammar::placeholder_name(t.tokens[i]);
      const auto& fillers = g_.slots.at(name);
      Tokens value;
      if (k == forced) {
        std::vector<Tokens> conf;
        for (const auto& f : fillers)
          if (std::any_of(f.begin(), f.end(), [&](const auto& w) { return confusable_.contains(w); }))
            conf.push_back(f);
        value = pick(rng, conf);
      } else {
        value = pick(rng, fillers);
      }
      u.spans.emplace_back(u.tokens.size(), u.tokens.size() + value.size());
      u.tokens.insert(u.tokens.end(), value.begin(), value.end());
      u.slots.push_back({name, value});
      ++k;
    }
    return u;
  }

  Interpretation interpretation(const Utterance& u) const {
    return {u.tokens, u.tmpl->domain, u.tmpl->intent, u.slots};
  }

  std::string other_intent_same_domain_or_pair(const std::string& intent, Rng& rng) const {
    if (auto it = competitors_.find(intent); it != competitors_.end()) return pick(rng, it->second);
    std::vector<std::string> same;
    for (const auto& t : g_.templates)
      if (t.domain == intent_domain_.at(intent) && t.intent != intent) same.push_back(t.intent);
    if (!same.empty()) return pick(rng, same);
    std::vector<std::string> all;
    for (const auto& t : g_.templates)
      if (t.intent != intent) all.push_back(t.intent);
    return all.empty() ? intent + "Alt" : pick(rng, all);
  }

  std::string intent_in_other_domain(const std::string& domain, Rng& rng) const {
    std::vector<const Template*> other;
    for (const auto& t : g_.templates)
      if (t.domain != domain) other.push_back(&t);
    return other.empty() ? "Other" : pick(rng, other)->intent;
  }

  std::optional<GeneratedExample> try_build(const std::vector<AmbiguityType>& types, bool wrong, bool flipped,
                                            Rng& rng) const {
    const auto& nz = cfg_.noise;
    auto has = [&](AmbiguityType t) { return std::find(types.begin(), types.end(), t) != types.end(); };
    const AmbiguityType primary = types.empty() ? AmbiguityType::TOP : types.front();

    // Utterance the user said and what the recognizer heard.
    const bool need_confusable = has(AmbiguityType::ASR);
    if (need_confusable && asr_templates_.empty()) return std::nullopt;
    const Template& tmpl =
        need_confusable ? g_.templates[pick(rng, asr_templates_)] : pick(rng, g_.templates);
    Utterance said = realize(tmpl, rng, need_confusable);
    Utterance heard = said;
    if (has(AmbiguityType::TRUNC)) {
      std::vector<std::size_t> cuts;
      for (std::size_t i = 1; i + 1 < said.tokens.size(); ++i)
        if (cfg_.detector.trunc_lexicon.contains(said.tokens[i])) cuts.push_back(i);
      if (cuts.empty()) return std::nullopt;
      const std::size_t cut = pick(rng, cuts);
      heard.tokens.resize(cut + 1);
      heard.slots.clear();
      heard.spans.clear();
      for (std::size_t s = 0; s < said.slots.size(); ++s)
        if (said.spans[s].second <= cut + 1) {
          heard.slots.push_back(said.slots[s]);
          heard.spans.push_back(said.spans[s]);
        }
    }

    Hypothesis top;
    top.transcript = heard.tokens;
    top.domain = tmpl.domain;
    top.intent = tmpl.intent;
    top.slots = heard.slots;
    top.hyp_conf = draw(rng, nz.top_hyp_conf);
    top.asr_conf = primary == AmbiguityType::SNR
                       ? draw(rng, wrong ? nz.snr_asr_wrong : nz.snr_asr_right)
                       : draw(rng, nz.top_asr_conf);
    top.intent_conf = primary == AmbiguityType::TRUNC
                          ? draw(rng, wrong ? nz.trunc_intent_wrong : nz.trunc_intent_right)
                          : draw(rng, nz.top_intent_conf);

    struct Row {
      Hypothesis h;
      AmbiguityType kind;  // TOP for fillers
    };
    std::vector<Row> rows;
    Interpretation truth = interpretation(heard);
    const DetectorConfig& dc = cfg_.detector;

    if (has(AmbiguityType::ASR)) {
      // Swap one confusable word inside a slot value.
      std::vector<std::pair<std::size_t, std::size_t>> sites;  // (slot, token position)
      for (std::size_t s = 0; s < heard.slots.size(); ++s)
        for (std::size_t p = heard.spans[s].first; p < heard.spans[s].second; ++p)
          if (confusable_.contains(heard.tokens[p])) sites.emplace_back(s, p);
      if (sites.empty()) return std::nullopt;
      const auto [slot, pos] = pick(rng, sites);
      Hypothesis alt = top;
      alt.transcript[pos] = pick(rng, confusable_.at(heard.tokens[pos]));
      alt.slots[slot].value[pos - heard.spans[slot].first] = alt.transcript[pos];
      const bool cue = wrong && primary == AmbiguityType::ASR;
      const double delta = draw(rng, cue ? nz.asr_delta_wrong : nz.asr_delta_right);
      alt.asr_conf = std::clamp(top.asr_conf + delta, dc.asr_conf_floor, 1.0);
      if (std::abs(alt.asr_conf - top.asr_conf) > dc.asr_conf_gap * 0.99) return std::nullopt;
      alt.intent_conf = std::clamp(top.intent_conf + uniform(rng, -0.05, 0.05), 0.0, 1.0);
      alt.hyp_conf = std::max(0.0, *top.hyp_conf - draw(rng, nz.other_alt_gap));
      if (cue) truth = {alt.transcript, alt.domain, alt.intent, alt.slots};
      rows.push_back({std::move(alt), AmbiguityType::ASR});
    }
    if (has(AmbiguityType::IC)) {
      Hypothesis alt = top;
      alt.intent = other_intent_same_domain_or_pair(top.intent, rng);
      alt.domain = intent_domain_.contains(alt.intent) ? intent_domain_.at(alt.intent) : top.domain;
      const bool cue = wrong && primary == AmbiguityType::IC;
      const double delta = draw(rng, cue ? nz.ic_delta_wrong : nz.ic_delta_right);
      alt.intent_conf = std::clamp(top.intent_conf + delta, dc.ic_conf_floor, 1.0);
      if (std::abs(alt.intent_conf - top.intent_conf) > dc.ic_conf_gap * 0.99) return std::nullopt;
      alt.hyp_conf = std::max(0.0, *top.hyp_conf - draw(rng, nz.other_alt_gap));
      if (cue) truth = {alt.transcript, alt.domain, alt.intent, alt.slots};
      rows.push_back({std::move(alt), AmbiguityType::IC});
    }
    if (has(AmbiguityType::HC)) {
      Hypothesis alt = top;
      alt.intent = intent_in_other_domain(top.domain, rng);
      alt.domain = intent_domain_.contains(alt.intent) ? intent_domain_.at(alt.intent) : "Other";
      const bool cue = wrong && primary == AmbiguityType::HC;
      alt.intent_conf = draw(rng, cue ? nz.hc_intent_wrong : nz.hc_intent_right);
      // Same transcript with a different intent must stay clear of IC.
      if (alt.intent_conf >= dc.ic_conf_floor &&
          std::abs(alt.intent_conf - top.intent_conf) <= dc.ic_conf_gap)
        return std::nullopt;
      alt.hyp_conf = std::max(0.0, *top.hyp_conf - draw(rng, cue ? nz.hc_gap_wrong : nz.hc_gap_right));
      if (cue) truth = {alt.transcript, alt.domain, alt.intent, alt.slots};
      rows.push_back({std::move(alt), AmbiguityType::HC});
    }
    if (wrong && primary == AmbiguityType::SNR) {
      // Misheard: the truth differs from the top in one word the list never shows.
      std::vector<std::string> vocab;
      for (const auto& [name, fillers] : g_.slots)
        for (const auto& f : fillers) vocab.insert(vocab.end(), f.begin(), f.end());
      const std::size_t pos =
          std::uniform_int_distribution<std::size_t>(0, truth.transcript.size() - 1)(rng);
      std::string w = pick(rng, vocab);
      if (w == truth.transcript[pos]) w += "s";
      truth.transcript[pos] = w;
    }
    if (wrong && primary == AmbiguityType::TRUNC) truth = interpretation(said);

    // Unrelated low-confidence hypotheses.
    const std::size_t n_fillers =
        std::uniform_int_distribution<std::size_t>(0, cfg_.max_fillers)(rng);
    for (std::size_t f = 0; f < n_fillers; ++f) {
      const Template& ft = pick(rng, g_.templates);
      Utterance fu = realize(ft, rng, false);
      Hypothesis h;
      h.transcript = fu.tokens;
      h.domain = ft.domain;
      h.intent = ft.intent;
      h.slots = fu.slots;
      h.asr_conf = uniform(rng, 0.1, std::min(0.6, dc.asr_conf_floor - 0.05));
      h.intent_conf = uniform(rng, 0.05, std::max(0.06, dc.ic_conf_floor - 0.05));
      if (!bernoulli(rng, cfg_.missing_hyp_conf))
        h.hyp_conf = std::max(0.0, *top.hyp_conf - draw(rng, nz.filler_gap));
      rows.push_back({std::move(h), AmbiguityType::TOP});
    }

    // Rank by hyp_conf; rows without one go last.
    std::stable_sort(rows.begin(), rows.end(), [](const Row& a, const Row& b) {
      if (a.h.hyp_conf.has_value() != b.h.hyp_conf.has_value()) return a.h.hyp_conf.has_value();
      return a.h.hyp_conf && *a.h.hyp_conf > *b.h.hyp_conf;
    });
    GeneratedExample ex;
    ex.record.hypotheses.push_back(top);
    std::map<AmbiguityType, std::size_t> expected_alt;
    for (auto& r : rows) {
      if (r.kind != AmbiguityType::TOP) expected_alt[r.kind] = ex.record.hypotheses.size();
      ex.record.hypotheses.push_back(std::move(r.h));
    }
    for (std::size_t i = 0; i < ex.record.hypotheses.size(); ++i)
      ex.record.hypotheses[i].rank = int(i + 1);
    ex.record.snr_raw = draw(rng, has(AmbiguityType::SNR) ? nz.snr_low : nz.snr_clean);
    ex.record.repetition = bernoulli(rng, wrong ? cfg_.repeat_if_wrong : cfg_.repeat_if_right);

    // The detectors must report exactly what was injected.
    TurnContext ctx{ex.record.snr_raw, ex.record.repetition, cfg_.snr_bounds};
    std::vector<AmbiguityOccurrence> found;
    try {
      found = detect_all(ex.record.hypotheses, ctx, dc);
    } catch (const Error&) {
      return std::nullopt;
    }
    std::set<AmbiguityType> injected(types.begin(), types.end()), detected;
    for (const auto& o : found) {
      detected.insert(o.kind);
      if (o.alt_index && expected_alt.at(o.kind) != *o.alt_index) return std::nullopt;
    }
    if (detected != injected) return std::nullopt;

    ex.record.occurrences = found;
    ex.truth = truth;
    ex.injected = types;
    ex.top_wrong = wrong;
    const bool satisfied = rule_.satisfied(truth, top, ctx);
    ex.flipped = flipped;
    ex.record.label = !found.empty() && (satisfied == ex.flipped);
    return ex;
  }

  const Grammar& g_;
  const GeneratorConfig& cfg_;
  const PlantedRule& rule_;
  std::map<std::string, std::vector<std::string>> confusable_;
  std::map<std::string, std::string> intent_domain_;
  std::map<std::string, std::vector<std::string>> competitors_;
  std::vector<std::size_t> asr_templates_;
};

}  // namespace detail

/// One example, a pure function of (config, grammar, rule, index).
inline GeneratedExample generate_example(const GeneratorConfig& cfg, const Grammar& grammar,
                                         std::uint64_t index, const PlantedRule& rule = {}) {
  return detail::ExampleBuilder(grammar, cfg, rule).build(index);
}

struct DatasetSplits {
  Dataset train, valid, test;
};

inline const Grammar& grammar_for(const GeneratorConfig& cfg, Grammar& storage) {
  if (cfg.grammar_file.empty()) return default_grammar();
  storage = Grammar::load(cfg.grammar_file);
  return storage;
}

/// Examples in index order. Indices are sharded over `threads` workers;
/// every example depends only on its index, so the output does not.
inline Dataset generate_records(const GeneratorConfig& cfg, std::size_t threads = 1,
                                const PlantedRule& rule = {}) {
  cfg.validate();
  Grammar storage;
  const Grammar& g = grammar_for(cfg, storage);
  detail::ExampleBuilder builder(g, cfg, rule);
  Dataset out(cfg.n_examples);
  threads = std::max<std::size_t>(1, std::min(threads, cfg.n_examples));
  std::vector<std::exception_ptr> errors(threads);
  {
    std::vector<std::jthread> pool;
    for (std::size_t w = 0; w < threads; ++w)
      pool.emplace_back([&, w] {
        try {
          for (std::size_t i = w; i < cfg.n_examples; i += threads) out[i] = builder.build(i).record;
        } catch (...) {
          errors[w] = std::current_exception();
        }
      });
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
  return out;
}

/// Time-ordered split: the last `test_fraction` of the indices is the test
/// set; the rest is shuffled with the seed and cut into train and valid.
inline DatasetSplits split_records(Dataset records, const GeneratorConfig& cfg) {
  DatasetSplits s;
  const std::size_t n = records.size();
  const std::size_t n_test = std::size_t(std::floor(double(n) * cfg.test_fraction));
  const std::size_t n_first = n - n_test;
  s.test.assign(std::make_move_iterator(records.begin() + std::ptrdiff_t(n_first)),
                std::make_move_iterator(records.end()));
  std::vector<std::size_t> order(n_first);
  std::iota(order.begin(), order.end(), 0);
  Rng rng(derive_seed(cfg.seed, 0x53504c4954ULL));
  std::shuffle(order.begin(), order.end(), rng);
  const std::size_t n_valid = std::size_t(std::llround(double(n_first) * cfg.valid_fraction));
  for (std::size_t k = 0; k < n_first; ++k)
    (k < n_valid ? s.valid : s.train).push_back(std::move(records[order[k]]));
  return s;
}

inline DatasetSplits generate_dataset(const GeneratorConfig& cfg, std::size_t threads = 1,
                                      const PlantedRule& rule = {}) {
  return split_records(generate_records(cfg, threads, rule), cfg);
}

/// Fraction of labeled records that ask.
inline double ask_rate(const Dataset& data) {
  if (data.empty()) return 0.0;
  std::size_t ask = 0;
  for (const auto& r : data) ask += r.label.value_or(false);
  return double(ask) / double(data.size());
}

}  // namespace clarigate
