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

#include <cmath>
#include <cstdint>
#include <fstream>
#include <span>
#include <sstream>
#include <string>
#include <unordered_map>
#include <vector>

#include "clarigate/core_types.hpp"
#include "clarigate/layers.hpp"
#include "clarigate/params.hpp"

namespace clarigate {

/// Dense token <-> id map. Id 0 is <pad>, id 1 is <unk>.
class Vocab {
 public:
  static constexpr std::size_t kPad = 0;
  static constexpr std::size_t kUnk = 1;

  Vocab() {
    add("<pad>");
    add("<unk>");
  }

  std::size_t add(const std::string& token) {
    auto [it, inserted] = index_.try_emplace(token, tokens_.size());
    if (inserted) tokens_.push_back(token);
    return it->second;
  }

  std::size_t id(const std::string& token) const {
    auto it = index_.find(token);
    return it == index_.end() ? kUnk : it->second;
  }

  bool contains(const std::string& token) const { return index_.contains(token); }
  const std::string& token(std::size_t id) const { return tokens_.at(id); }
  std::size_t size() const { return tokens_.size(); }
  const std::vector<std::string>& tokens() const { return tokens_; }

  /// FNV-1a over the tokens in id order.
  std::uint64_t hash() const {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (const auto& t : tokens_) {
      for (unsigned char c : t) h = (h ^ c) * 0x100000001b3ULL;
      h = (h ^ 0xffU) * 0x100000001b3ULL;
    }
    return h;
  }

  static Vocab from_tokens(const std::vector<std::string>& tokens) {
    if (tokens.size() < 2 || tokens[kPad] != "<pad>" || tokens[kUnk] != "<unk>")
      throw Error(ErrorCode::Config, "vocabulary must start with <pad>, <unk>");
    Vocab v;
    for (const auto& t : tokens) v.add(t);
    if (v.size() != tokens.size()) throw Error(ErrorCode::Config, "vocabulary has duplicate tokens");
    return v;
  }

  /// One token per line; the line number is the id.
  static Vocab load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::Io, "cannot open vocab file " + path);
    std::vector<std::string> tokens;
    for (std::string line; std::getline(in, line);) {
      if (!line.empty() && line.back() == '\r') line.pop_back();
      tokens.push_back(line);
    }
    return from_tokens(tokens);
  }

  void save(const std::string& path) const {
    std::ofstream out(path);
    if (!out) throw Error(ErrorCode::Io, "cannot write vocab file " + path);
    for (const auto& t : tokens_) out << t << '\n';
  }

  bool operator==(const Vocab& o) const { return tokens_ == o.tokens_; }

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, std::size_t> index_;
};

struct Vocabularies {
  Vocab words, domains, intents, slot_keys;

  void observe(const Hypothesis& h) {
    for (const auto& w : h.transcript) words.add(w);
    domains.add(h.domain);
    intents.add(h.intent);
    for (const auto& s : h.slots) {
      slot_keys.add(s.key);
      for (const auto& w : s.value) words.add(w);
    }
  }

  void observe(const ExampleRecord& r) {
    for (const auto& h : r.hypotheses) observe(h);
  }

  bool operator==(const Vocabularies&) const = default;
};

struct FeaturizerConfig {
  std::size_t d_model = 100;
  std::size_t n_heads_sentence = 4;
  std::size_t ffn_mult = 4;
  double layer_norm_eps = 1e-5;
  double embedding_init = 0.1;
  bool sentence_positional = false;

  void validate() const {
    if (d_model == 0 || n_heads_sentence == 0 || ffn_mult == 0)
      throw Error(ErrorCode::Config, "featurizer sizes must be positive");
    if (d_model % n_heads_sentence != 0)
      throw Error(ErrorCode::Config, "d_model must be divisible by n_heads_sentence");
  }

  std::size_t hypothesis_width() const { return 5 * d_model + 2; }
};

/// Column layout of a hypothesis vector.
struct HypothesisLayout {
  std::size_t d;
  std::size_t sentence() const { return 0; }
  std::size_t asr_conf() const { return d; }
  std::size_t intent_conf() const { return d + 1; }
  std::size_t domain() const { return d + 2; }
  std::size_t intent() const { return 2 * d + 2; }
  std::size_t slots() const { return 3 * d + 2; }
  std::size_t ambiguity() const { return 4 * d + 2; }
  std::size_t width() const { return 5 * d + 2; }
};

inline constexpr std::size_t kContextWidth = kNumOccurrenceTypes + 2;

/// [occ(ASR..TRUNC) as 0/1, snr_norm, repetition as 0/1]
inline std::vector<double> context_vector(const DecisionInput& in) {
  std::vector<double> c(kContextWidth, 0.0);
  for (std::size_t i = 0; i < kNumOccurrenceTypes; ++i) c[i] = in.occurrences[i] ? 1.0 : 0.0;
  c[kNumOccurrenceTypes] = in.snr_norm;
  c[kNumOccurrenceTypes + 1] = in.repetition ? 1.0 : 0.0;
  return c;
}

/// Owns the ids of every featurization parameter; values live in a ParamStore.
class Featurizer {
 public:
  struct SentenceCache {
    std::vector<std::size_t> ids;
    EncoderStack::Cache encoder;
  };

  Featurizer() = default;

  Featurizer(const FeaturizerConfig& cfg, const Vocabularies& vocabs, ParamStore& ps, Rng& rng)
      : cfg_(cfg), vocabs_(vocabs), layout_{cfg.d_model} {
    cfg.validate();
    const std::size_t d = cfg.d_model;
    const double e = cfg.embedding_init;
    word_emb_ = ps.add_uniform("feat.word_emb", vocabs.words.size(), d, e, rng);
    sentence_ = EncoderStack::create(ps, "feat.sentence", 1, d, cfg.n_heads_sentence,
                                     cfg.ffn_mult * d, cfg.layer_norm_eps, rng);
    sentence_unk_ = ps.add_uniform("feat.sentence_unk", 1, d, e, rng);
    domain_emb_ = ps.add_uniform("feat.domain_emb", vocabs.domains.size(), d, e, rng);
    intent_emb_ = ps.add_uniform("feat.intent_emb", vocabs.intents.size(), d, e, rng);
    slot_emb_ = ps.add_uniform("feat.slot_emb", vocabs.slot_keys.size(), d, e, rng);
    amb_emb_ = ps.add_uniform("feat.ambiguity_emb", kNumAmbiguityTags, d, e, rng);
  }

  const FeaturizerConfig& config() const { return cfg_; }
  const HypothesisLayout& layout() const { return layout_; }
  std::size_t width() const { return layout_.width(); }
  ParamId word_embedding() const { return word_emb_; }
  const Vocabularies& vocabularies() const { return vocabs_; }

  /// Sum over tokens of a one-layer encoder applied to the word embeddings.
  Matrix encode_sentence(const ParamStore& ps, const Tokens& tokens, SentenceCache& c) const {
    if (tokens.empty()) throw Error(ErrorCode::EmptyTokenSequence, "cannot encode empty sentence");
    const std::size_t d = cfg_.d_model;
    c.ids.clear();
    for (const auto& t : tokens) c.ids.push_back(vocabs_.words.id(t));
    Matrix x(tokens.size(), d);
    const Matrix& emb = ps[word_emb_];
    for (std::size_t i = 0; i < c.ids.size(); ++i) {
      std::copy_n(&emb(c.ids[i], 0), d, &x(i, 0));
      if (cfg_.sentence_positional) add_positional(x.row_span(i), i);
    }
    return column_sum(sentence_.forward(ps, x, c.encoder));
  }

  Matrix encode_sentence(const ParamStore& ps, const Tokens& tokens) const {
    SentenceCache c;
    return encode_sentence(ps, tokens, c);
  }

  void backward_sentence(const ParamStore& ps, const SentenceCache& c, std::span<const double> dvec,
                         Gradients& g) const {
    const std::size_t d = cfg_.d_model;
    Matrix dout(c.ids.size(), d);
    for (std::size_t i = 0; i < c.ids.size(); ++i) std::copy_n(dvec.data(), d, &dout(i, 0));
    Matrix dx = sentence_.backward(ps, c.encoder, dout, g);
    Matrix& demb = g[word_emb_];
    for (std::size_t i = 0; i < c.ids.size(); ++i)
      for (std::size_t j = 0; j < d; ++j) demb(c.ids[i], j) += dx(i, j);
  }

  /// Sum of slot-key embeddings; unknown keys use the <unk> row, no slots give zero.
  Matrix slot_vector(const ParamStore& ps, const std::vector<Slot>& slots) const {
    Matrix v(1, cfg_.d_model);
    const Matrix& emb = ps[slot_emb_];
    for (const auto& s : slots) {
      const std::size_t id = vocabs_.slot_keys.id(s.key);
      for (std::size_t j = 0; j < cfg_.d_model; ++j) v[j] += emb(id, j);
    }
    return v;
  }

  /// Writes every block except the sentence block, which the caller fills.
  void fill_hypothesis(const ParamStore& ps, const Hypothesis& h, AmbiguityType tag,
                       std::span<double> out) const {
    const std::size_t d = cfg_.d_model;
    out[layout_.asr_conf()] = h.asr_conf;
    out[layout_.intent_conf()] = h.intent_conf;
    copy_row(ps[domain_emb_], vocabs_.domains.id(h.domain), out.subspan(layout_.domain(), d));
    copy_row(ps[intent_emb_], vocabs_.intents.id(h.intent), out.subspan(layout_.intent(), d));
    Matrix sv = slot_vector(ps, h.slots);
    std::copy_n(sv.values().data(), d, out.data() + layout_.slots());
    copy_row(ps[amb_emb_], index_of(tag), out.subspan(layout_.ambiguity(), d));
  }

  /// Placeholder rows: <unk> for every element, zero scalars, the real type tag.
  void fill_placeholder(const ParamStore& ps, AmbiguityType tag, std::span<double> out) const {
    const std::size_t d = cfg_.d_model;
    copy_row(ps[sentence_unk_], 0, out.subspan(layout_.sentence(), d));
    out[layout_.asr_conf()] = 0.0;
    out[layout_.intent_conf()] = 0.0;
    copy_row(ps[domain_emb_], Vocab::kUnk, out.subspan(layout_.domain(), d));
    copy_row(ps[intent_emb_], Vocab::kUnk, out.subspan(layout_.intent(), d));
    copy_row(ps[slot_emb_], Vocab::kUnk, out.subspan(layout_.slots(), d));
    copy_row(ps[amb_emb_], index_of(tag), out.subspan(layout_.ambiguity(), d));
  }

  /// Gradient of every non-sentence block of a real hypothesis row.
  void backward_hypothesis(const Hypothesis& h, AmbiguityType tag, std::span<const double> drow,
                           Gradients& g) const {
    const std::size_t d = cfg_.d_model;
    add_row(g[domain_emb_], vocabs_.domains.id(h.domain), drow.subspan(layout_.domain(), d));
    add_row(g[intent_emb_], vocabs_.intents.id(h.intent), drow.subspan(layout_.intent(), d));
    for (const auto& s : h.slots)
      add_row(g[slot_emb_], vocabs_.slot_keys.id(s.key), drow.subspan(layout_.slots(), d));
    add_row(g[amb_emb_], index_of(tag), drow.subspan(layout_.ambiguity(), d));
  }

  void backward_placeholder(AmbiguityType tag, std::span<const double> drow, Gradients& g) const {
    const std::size_t d = cfg_.d_model;
    add_row(g[sentence_unk_], 0, drow.subspan(layout_.sentence(), d));
    add_row(g[domain_emb_], Vocab::kUnk, drow.subspan(layout_.domain(), d));
    add_row(g[intent_emb_], Vocab::kUnk, drow.subspan(layout_.intent(), d));
    add_row(g[slot_emb_], Vocab::kUnk, drow.subspan(layout_.slots(), d));
    add_row(g[amb_emb_], index_of(tag), drow.subspan(layout_.ambiguity(), d));
  }

  /// Full hypothesis vector of width 5d+2.
  std::vector<double> featurize_hypothesis(const ParamStore& ps, const Hypothesis& h,
                                           AmbiguityType tag) const {
    std::vector<double> out(width());
    Matrix s = encode_sentence(ps, h.transcript);
    std::copy_n(s.values().data(), cfg_.d_model, out.data());
    fill_hypothesis(ps, h, tag, out);
    return out;
  }

  std::vector<double> featurize_placeholder(const ParamStore& ps, AmbiguityType tag) const {
    std::vector<double> out(width());
    fill_placeholder(ps, tag, out);
    return out;
  }

 private:
  static void copy_row(const Matrix& m, std::size_t r, std::span<double> out) {
    std::copy_n(&m(r, 0), out.size(), out.data());
  }
  static void add_row(Matrix& m, std::size_t r, std::span<const double> v) {
    for (std::size_t j = 0; j < v.size(); ++j) m(r, j) += v[j];
  }
  void add_positional(std::span<double> row, std::size_t pos) const {
    const double d = double(row.size());
    for (std::size_t j = 0; j < row.size(); ++j) {
      double angle = double(pos) / std::pow(10000.0, double(2 * (j / 2)) / d);
      row[j] += (j % 2 == 0) ? std::sin(angle) : std::cos(angle);
    }
  }

  FeaturizerConfig cfg_;
  Vocabularies vocabs_;
  HypothesisLayout layout_{0};
  ParamId word_emb_ = 0, sentence_unk_ = 0, domain_emb_ = 0, intent_emb_ = 0, slot_emb_ = 0,
          amb_emb_ = 0;
  EncoderStack sentence_;
};

/// Reads whitespace-separated "word v1 ... vd" lines (GloVe text format) into
/// the rows of known words. Returns the number of rows written.
inline std::size_t load_word_vectors(const std::string& path, const Vocab& vocab, Matrix& emb) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::Io, "cannot open embedding file " + path);
  std::size_t loaded = 0, line_no = 0;
  for (std::string line; std::getline(in, line);) {
    ++line_no;
    std::istringstream ss(line);
    std::string word;
    if (!(ss >> word)) continue;
    std::vector<double> v;
    for (double x; ss >> x;) v.push_back(x);
    if (v.size() != emb.cols())
      throw Error(ErrorCode::MalformedRecord, path + ":" + std::to_string(line_no) + ": expected " +
                                                  std::to_string(emb.cols()) + " values");
    if (!vocab.contains(word)) continue;
    std::copy(v.begin(), v.end(), &emb(vocab.id(word), 0));
    ++loaded;
  }
  return loaded;
}

}  // namespace clarigate
