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
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "clarigate/core_types.hpp"
#include "clarigate/featurizer.hpp"
#include "clarigate/layers.hpp"
#include "clarigate/params.hpp"

namespace clarigate {

enum class Variant { ALWAYS, NO_ALT, ALT_AVG, CRS_ATT, SELF_SUM, SELF_ATT, SELF_ATT2 };

inline constexpr std::array<Variant, 7> kAllVariants = {
    Variant::ALWAYS,   Variant::NO_ALT,   Variant::ALT_AVG,  Variant::CRS_ATT,
    Variant::SELF_SUM, Variant::SELF_ATT, Variant::SELF_ATT2};

inline constexpr std::array<Variant, 6> kTrainableVariants = {
    Variant::NO_ALT, Variant::ALT_AVG, Variant::CRS_ATT, Variant::SELF_SUM, Variant::SELF_ATT,
    Variant::SELF_ATT2};

constexpr std::string_view to_string(Variant v) {
  switch (v) {
    case Variant::ALWAYS: return "ALWAYS";
    case Variant::NO_ALT: return "NO_ALT";
    case Variant::ALT_AVG: return "ALT_AVG";
    case Variant::CRS_ATT: return "CRS_ATT";
    case Variant::SELF_SUM: return "SELF_SUM";
    case Variant::SELF_ATT: return "SELF_ATT";
    case Variant::SELF_ATT2: return "SELF_ATT2";
  }
  return "?";
}

inline Variant variant_from_string(std::string_view s) {
  std::string up;
  for (char c : s) up.push_back(c == '-' ? '_' : static_cast<char>(std::toupper(static_cast<unsigned char>(c))));
  for (auto v : kAllVariants)
    if (to_string(v) == up) return v;
  throw Error(ErrorCode::Config, "unknown variant '" + std::string(s) + "'");
}

constexpr bool uses_self_attention(Variant v) {
  return v == Variant::SELF_SUM || v == Variant::SELF_ATT || v == Variant::SELF_ATT2;
}

constexpr std::size_t self_attention_layers(Variant v) {
  return v == Variant::SELF_ATT2 ? 2 : (uses_self_attention(v) ? 1 : 0);
}

struct AblationFlags {
  bool no_hyp = false;    // keep only the sentence block of each hypothesis
  bool asr_only = false;  // keep the sentence block and asr_conf
  bool no_sent = false;   // drop the sentence block
  bool diff_att = false;  // separate attention for sentence and feature blocks
  bool no_rpt = false;    // drop the repetition context bit

  void validate() const {
    if (no_hyp && asr_only) throw Error(ErrorCode::Config, "no_hyp and asr_only are exclusive");
  }

  bool any() const { return no_hyp || asr_only || no_sent || diff_att || no_rpt; }

  /// Comma-separated names, "none" when empty.
  std::string to_string() const {
    std::string s;
    auto put = [&](bool on, const char* name) {
      if (!on) return;
      if (!s.empty()) s += ',';
      s += name;
    };
    put(no_hyp, "no_hyp");
    put(asr_only, "asr_only");
    put(no_sent, "no_sent");
    put(diff_att, "diff_att");
    put(no_rpt, "no_rpt");
    return s.empty() ? "none" : s;
  }

  static AblationFlags parse(std::string_view text) {
    AblationFlags f;
    std::string cur;
    auto apply = [&](std::string name) {
      for (auto& c : name) c = c == '-' ? '_' : static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
      if (name.empty() || name == "none") return;
      if (name == "no_hyp") f.no_hyp = true;
      else if (name == "asr_only" || name == "asr") f.asr_only = true;
      else if (name == "no_sent") f.no_sent = true;
      else if (name == "diff_att") f.diff_att = true;
      else if (name == "no_rpt") f.no_rpt = true;
      else throw Error(ErrorCode::Config, "unknown ablation flag '" + name + "'");
    };
    for (char c : text) {
      if (c == ',' || c == ' ') apply(std::exchange(cur, {}));
      else cur.push_back(c);
    }
    apply(cur);
    f.validate();
    return f;
  }

  bool operator==(const AblationFlags&) const = default;
};

inline constexpr std::array<std::pair<const char*, AblationFlags>, 5> kSingleAblations = {{
    {"no_hyp", AblationFlags{true, false, false, false, false}},
    {"asr_only", AblationFlags{false, true, false, false, false}},
    {"no_sent", AblationFlags{false, false, true, false, false}},
    {"diff_att", AblationFlags{false, false, false, true, false}},
    {"no_rpt", AblationFlags{false, false, false, false, true}},
}};

struct ModelConfig {
  FeaturizerConfig featurizer;
  Variant variant = Variant::SELF_ATT;
  AblationFlags flags;
  std::size_t hyp_heads = 2;     // hypothesis-level attention heads
  std::size_t hyp_ffn_mult = 4;  // hypothesis-level feed-forward width multiplier
  std::size_t head_hidden = 0;   // 0 means d_model
  double threshold = 0.5;
  double dropout = 0.0;          // on the output head's hidden layer, training only

  void validate() const {
    featurizer.validate();
    flags.validate();
    if (hyp_heads == 0 || hyp_ffn_mult == 0)
      throw Error(ErrorCode::Config, "hypothesis attention sizes must be positive");
    if (!(threshold > 0.0 && threshold < 1.0)) throw Error(ErrorCode::Config, "threshold must be in (0,1)");
    if (!(dropout >= 0.0 && dropout < 1.0)) throw Error(ErrorCode::Config, "dropout must be in [0,1)");
  }

  std::size_t hidden_width() const { return head_hidden ? head_hidden : featurizer.d_model; }
};

struct ModelOutput {
  double p_ask = 1.0;
  bool decision = true;
};

/// Top/alternative split produced by the aggregation step.
struct Aggregate {
  Matrix top;  // 1 x H
  Matrix alt;  // 1 x H
};

/// Variant-specific reduction of the (possibly contextualized) rows, row 0
/// being the top hypothesis. For SELF_SUM the caller adds the two halves.
/// ALT_AVG averages the raw rows it is given; NO_ALT ignores alternatives.
inline Aggregate aggregate(const Matrix& rows, Variant variant) {
  const std::size_t h = rows.cols();
  Aggregate a{Matrix(1, h), Matrix(1, h)};
  std::copy_n(&rows(0, 0), h, &a.top[0]);
  if (variant == Variant::NO_ALT || rows.rows() < 2) return a;
  for (std::size_t r = 1; r < rows.rows(); ++r)
    for (std::size_t j = 0; j < h; ++j) a.alt[j] += rows(r, j);
  if (variant == Variant::ALT_AVG)
    for (double& v : a.alt.values()) v /= double(rows.rows() - 1);
  return a;
}

/// The clarification decision model: featurizer, variant-specific
/// hypothesis aggregation, context concatenation and a one-hidden-layer
/// logistic head.
class ClarificationModel {
 public:
  /// Everything the backward pass needs from one forward pass.
  struct Trace {
    std::vector<int> sentence_of_row;  // -1 for placeholders
    std::vector<Featurizer::SentenceCache> sentences;
    Matrix x;  // masked hypothesis rows, n x H
    EncoderStack::Cache enc, enc_sent, enc_feat;
    CrossAttention::Cache cross, cross_sent, cross_feat;
    Matrix contextual;
    Matrix head_in, hidden;  // hidden is post-ReLU (and post-dropout)
    std::vector<double> dropout_mask;
    double logit = 0.0;
  };

  ClarificationModel() = default;

  ClarificationModel(const ModelConfig& cfg, const Vocabularies& vocabs, std::uint64_t seed)
      : cfg_(cfg), seed_(seed) {
    cfg.validate();
    vocabs_ = vocabs;
    if (cfg.variant == Variant::ALWAYS) return;
    Rng rng(derive_seed(seed, 0x4d4f44454cULL));
    featurizer_ = Featurizer(cfg.featurizer, vocabs_, params_, rng);
    const std::size_t d = cfg.featurizer.d_model;
    const std::size_t h = featurizer_.width();
    const double eps = cfg.featurizer.layer_norm_eps;
    const std::size_t layers = self_attention_layers(cfg.variant);
    if (layers > 0) {
      if (cfg.flags.diff_att) {
        enc_sent_ = EncoderStack::create(params_, "hyp.sent", layers, d, cfg.hyp_heads,
                                         cfg.hyp_ffn_mult * d, eps, rng);
        enc_feat_ = EncoderStack::create(params_, "hyp.feat", layers, h - d, cfg.hyp_heads,
                                         cfg.hyp_ffn_mult * (h - d), eps, rng);
      } else {
        enc_ = EncoderStack::create(params_, "hyp", layers, h, cfg.hyp_heads,
                                    cfg.hyp_ffn_mult * h, eps, rng);
      }
    }
    if (cfg.variant == Variant::CRS_ATT) {
      if (cfg.flags.diff_att) {
        cross_sent_ = CrossAttention::create(params_, "cross.sent", d, rng);
        cross_feat_ = CrossAttention::create(params_, "cross.feat", h - d, rng);
      } else {
        cross_ = CrossAttention::create(params_, "cross", h, rng);
      }
    }
    const std::size_t rep = cfg.variant == Variant::SELF_SUM ? h : 2 * h;
    head1_ = Linear::create(params_, "head.hidden", rep + kContextWidth, cfg.hidden_width(), rng);
    head2_ = Linear::create(params_, "head.out", cfg.hidden_width(), 1, rng);
    build_mask();
  }

  const ModelConfig& config() const { return cfg_; }
  Variant variant() const { return cfg_.variant; }
  std::uint64_t seed() const { return seed_; }
  const Vocabularies& vocabularies() const { return vocabs_; }
  const Featurizer& featurizer() const { return featurizer_; }
  ParamStore& params() { return params_; }
  const ParamStore& params() const { return params_; }
  bool trainable() const { return cfg_.variant != Variant::ALWAYS; }

  /// Width of the concatenated top/alt/context vector fed to the head.
  std::size_t head_input_width() const { return trainable() ? head1_.in : 0; }

  ModelOutput predict(const DecisionInput& in) const {
    if (!trainable()) return {1.0, true};
    Trace t;
    const double p = logistic(forward(in, t, nullptr));
    return {p, p >= cfg_.threshold};
  }

  double logit(const DecisionInput& in) const {
    Trace t;
    return forward(in, t, nullptr);
  }

  /// Forward pass recording a trace. `dropout_rng` enables dropout.
  double forward(const DecisionInput& in, Trace& t, Rng* dropout_rng) const {
    if (!trainable()) throw Error(ErrorCode::UntrainableVariant, "ALWAYS has no forward pass");
    const std::size_t d = cfg_.featurizer.d_model;
    const std::size_t h = featurizer_.width();
    const std::size_t n = 1 + in.alternatives.size();

    // Featurize rows; identical transcripts share one sentence encoding.
    t.x = Matrix(n, h);
    t.sentence_of_row.assign(n, -1);
    t.sentences.clear();
    std::vector<const Tokens*> seen;
    std::vector<Matrix> sentence_vecs;
    auto featurize_row = [&](std::size_t r, const Hypothesis& hyp, AmbiguityType tag) {
      int slot = -1;
      for (std::size_t s = 0; s < seen.size(); ++s)
        if (*seen[s] == hyp.transcript) slot = int(s);
      if (slot < 0) {
        slot = int(seen.size());
        seen.push_back(&hyp.transcript);
        t.sentences.emplace_back();
        sentence_vecs.push_back(featurizer_.encode_sentence(params_, hyp.transcript, t.sentences.back()));
      }
      t.sentence_of_row[r] = slot;
      auto row = t.x.row_span(r);
      std::copy_n(sentence_vecs[slot].values().data(), d, row.data());
      featurizer_.fill_hypothesis(params_, hyp, tag, row);
    };
    featurize_row(0, in.top, AmbiguityType::TOP);
    for (std::size_t a = 0; a < in.alternatives.size(); ++a) {
      const auto& alt = in.alternatives[a];
      if (alt.is_placeholder()) featurizer_.fill_placeholder(params_, alt.kind, t.x.row_span(a + 1));
      else featurize_row(a + 1, alt.hypothesis(), alt.kind);
    }
    for (std::size_t r = 0; r < n; ++r)
      for (std::size_t j = 0; j < h; ++j) t.x(r, j) *= mask_[j];

    Aggregate agg;
    switch (cfg_.variant) {
      case Variant::NO_ALT:
      case Variant::ALT_AVG:
        agg = aggregate(t.x, cfg_.variant);
        break;
      case Variant::CRS_ATT: {
        agg = aggregate(t.x, Variant::NO_ALT);
        Matrix top = slice_rows(t.x, 0, 1);
        Matrix alts = slice_rows(t.x, 1, n - 1);
        if (cfg_.flags.diff_att) {
          Matrix s = cross_sent_.forward(params_, slice_cols(top, 0, d), slice_cols(alts, 0, d), t.cross_sent);
          Matrix f = cross_feat_.forward(params_, slice_cols(top, d, h - d), slice_cols(alts, d, h - d), t.cross_feat);
          write_cols(agg.alt, 0, s);
          write_cols(agg.alt, d, f);
        } else {
          agg.alt = cross_.forward(params_, top, alts, t.cross);
        }
        break;
      }
      default:
        t.contextual = hypothesis_self_attention(t.x, t);
        agg = aggregate(t.contextual, cfg_.variant);
        break;
    }

    const auto ctx = context_values(in);
    if (cfg_.variant == Variant::SELF_SUM) {
      t.head_in = Matrix(1, h + kContextWidth);
      for (std::size_t j = 0; j < h; ++j) t.head_in[j] = agg.top[j] + agg.alt[j];
      std::copy(ctx.begin(), ctx.end(), &t.head_in[h]);
    } else {
      t.head_in = Matrix(1, 2 * h + kContextWidth);
      std::copy_n(agg.top.values().data(), h, &t.head_in[0]);
      std::copy_n(agg.alt.values().data(), h, &t.head_in[h]);
      std::copy(ctx.begin(), ctx.end(), &t.head_in[2 * h]);
    }

    t.hidden = head1_.forward(params_, t.head_in);
    relu_inplace(t.hidden);
    t.dropout_mask.clear();
    if (dropout_rng && cfg_.dropout > 0.0) {
      const double keep = 1.0 - cfg_.dropout;
      t.dropout_mask.resize(t.hidden.size());
      for (std::size_t j = 0; j < t.hidden.size(); ++j) {
        t.dropout_mask[j] = uniform(*dropout_rng, 0.0, 1.0) < keep ? 1.0 / keep : 0.0;
        t.hidden[j] *= t.dropout_mask[j];
      }
    }
    t.logit = head2_.forward(params_, t.hidden)[0];
    return t.logit;
  }

  /// Back-propagates dL/dlogit through a recorded trace.
  void backward(const DecisionInput& in, const Trace& t, double dlogit, Gradients& g) const {
    const std::size_t d = cfg_.featurizer.d_model;
    const std::size_t h = featurizer_.width();
    const std::size_t n = t.x.rows();

    Matrix dlog(1, 1, dlogit);
    Matrix dhidden = head2_.backward(params_, t.hidden, dlog, g);
    for (std::size_t j = 0; j < dhidden.size(); ++j) {
      if (t.hidden[j] <= 0.0) dhidden[j] = 0.0;
      else if (!t.dropout_mask.empty()) dhidden[j] *= t.dropout_mask[j];
    }
    Matrix dhead_in = head1_.backward(params_, t.head_in, dhidden, g);

    Matrix dtop(1, h), dalt(1, h);
    if (cfg_.variant == Variant::SELF_SUM) {
      for (std::size_t j = 0; j < h; ++j) dtop[j] = dalt[j] = dhead_in[j];
    } else {
      for (std::size_t j = 0; j < h; ++j) {
        dtop[j] = dhead_in[j];
        dalt[j] = dhead_in[h + j];
      }
    }

    Matrix dx(n, h);
    switch (cfg_.variant) {
      case Variant::NO_ALT:
        std::copy_n(dtop.values().data(), h, &dx(0, 0));
        break;
      case Variant::ALT_AVG:
        std::copy_n(dtop.values().data(), h, &dx(0, 0));
        for (std::size_t r = 1; r < n; ++r)
          for (std::size_t j = 0; j < h; ++j) dx(r, j) = dalt[j] / double(n - 1);
        break;
      case Variant::CRS_ATT: {
        Matrix dq(1, h), ditems(n - 1, h);
        if (cfg_.flags.diff_att) {
          Matrix dqs(1, d), dis(n - 1, d), dqf(1, h - d), dif(n - 1, h - d);
          cross_sent_.backward(params_, t.cross_sent, slice_cols(dalt, 0, d), dqs, dis, g);
          cross_feat_.backward(params_, t.cross_feat, slice_cols(dalt, d, h - d), dqf, dif, g);
          write_cols(dq, 0, dqs);
          write_cols(dq, d, dqf);
          write_cols(ditems, 0, dis);
          write_cols(ditems, d, dif);
        } else {
          cross_.backward(params_, t.cross, dalt, dq, ditems, g);
        }
        for (std::size_t j = 0; j < h; ++j) dx(0, j) = dtop[j] + dq[j];
        for (std::size_t r = 1; r < n; ++r)
          for (std::size_t j = 0; j < h; ++j) dx(r, j) = ditems(r - 1, j);
        break;
      }
      default: {
        Matrix dctx(n, h);
        for (std::size_t j = 0; j < h; ++j) dctx(0, j) = dtop[j];
        for (std::size_t r = 1; r < n; ++r)
          for (std::size_t j = 0; j < h; ++j) dctx(r, j) = dalt[j];
        dx = hypothesis_self_attention_backward(t, dctx, g);
        break;
      }
    }

    for (std::size_t r = 0; r < n; ++r)
      for (std::size_t j = 0; j < h; ++j) dx(r, j) *= mask_[j];

    // Route row gradients into the featurizer; shared sentences accumulate.
    std::vector<Matrix> dsent(t.sentences.size(), Matrix(1, d));
    for (std::size_t r = 0; r < n; ++r) {
      auto drow = dx.row_span(r);
      if (r == 0) {
        featurizer_.backward_hypothesis(in.top, AmbiguityType::TOP, drow, g);
      } else {
        const auto& alt = in.alternatives[r - 1];
        if (alt.is_placeholder()) {
          featurizer_.backward_placeholder(alt.kind, drow, g);
          continue;
        }
        featurizer_.backward_hypothesis(alt.hypothesis(), alt.kind, drow, g);
      }
      Matrix& ds = dsent[t.sentence_of_row[r]];
      for (std::size_t j = 0; j < d; ++j) ds[j] += drow[j];
    }
    for (std::size_t s = 0; s < t.sentences.size(); ++s)
      featurizer_.backward_sentence(params_, t.sentences[s], dsent[s].values(), g);
  }

  /// Binary cross-entropy of one example; accumulates weight * dL/dtheta.
  double accumulate_gradient(const LabeledExample& ex, double weight, Gradients& g,
                             double pos_weight = 1.0, Rng* dropout_rng = nullptr) const {
    Trace t;
    const double z = forward(ex.input, t, dropout_rng);
    const double p = logistic(z);
    const double y = ex.label ? 1.0 : 0.0;
    // L = w_pos*y*softplus(-z) + (1-y)*softplus(z)
    const double loss = pos_weight * y * softplus(-z) + (1.0 - y) * softplus(z);
    const double dz = pos_weight * y * (p - 1.0) + (1.0 - y) * p;
    backward(ex.input, t, weight * dz, g);
    return loss;
  }

  double example_loss(const LabeledExample& ex, double pos_weight = 1.0) const {
    const double z = logit(ex.input);
    const double y = ex.label ? 1.0 : 0.0;
    return pos_weight * y * softplus(-z) + (1.0 - y) * softplus(z);
  }

  /// Contextualized rows of the hypothesis sequence (self-attention variants).
  Matrix hypothesis_self_attention(const Matrix& x, Trace& t) const {
    if (!cfg_.flags.diff_att) return enc_.forward(params_, x, t.enc);
    const std::size_t d = cfg_.featurizer.d_model;
    const std::size_t h = x.cols();
    Matrix out(x.rows(), h);
    write_cols(out, 0, enc_sent_.forward(params_, slice_cols(x, 0, d), t.enc_sent));
    write_cols(out, d, enc_feat_.forward(params_, slice_cols(x, d, h - d), t.enc_feat));
    return out;
  }

  /// Ablation mask over hypothesis-vector columns (1 keeps, 0 zeroes).
  const std::vector<double>& column_mask() const { return mask_; }

  std::vector<double> context_values(const DecisionInput& in) const {
    auto c = context_vector(in);
    if (cfg_.flags.no_rpt) c.back() = 0.0;
    return c;
  }

 private:
  static Matrix slice_rows(const Matrix& a, std::size_t begin, std::size_t count) {
    Matrix out(count, a.cols());
    if (count) std::copy_n(&a(begin, 0), count * a.cols(), &out(0, 0));
    return out;
  }

  Matrix hypothesis_self_attention_backward(const Trace& t, const Matrix& dctx, Gradients& g) const {
    if (!cfg_.flags.diff_att) return enc_.backward(params_, t.enc, dctx, g);
    const std::size_t d = cfg_.featurizer.d_model;
    const std::size_t h = dctx.cols();
    Matrix dx(dctx.rows(), h);
    write_cols(dx, 0, enc_sent_.backward(params_, t.enc_sent, slice_cols(dctx, 0, d), g));
    write_cols(dx, d, enc_feat_.backward(params_, t.enc_feat, slice_cols(dctx, d, h - d), g));
    return dx;
  }

  void build_mask() {
    const auto& L = featurizer_.layout();
    mask_.assign(L.width(), 1.0);
    auto zero = [&](std::size_t from, std::size_t to) {
      for (std::size_t j = from; j < to; ++j) mask_[j] = 0.0;
    };
    if (cfg_.flags.no_hyp) zero(L.asr_conf(), L.width());
    if (cfg_.flags.asr_only) zero(L.intent_conf(), L.width());
    if (cfg_.flags.no_sent) zero(L.sentence(), L.asr_conf());
  }

  ModelConfig cfg_;
  std::uint64_t seed_ = 0;
  Vocabularies vocabs_;
  ParamStore params_;
  Featurizer featurizer_;
  EncoderStack enc_, enc_sent_, enc_feat_;
  CrossAttention cross_, cross_sent_, cross_feat_;
  Linear head1_, head2_;
  std::vector<double> mask_;
};

/// Single-query attention of `top` over `alternatives` using the given
/// projections; zero when there are no alternatives.
inline Matrix cross_attention(const ParamStore& ps, const CrossAttention& layer, const Matrix& top,
                              const Matrix& alternatives) {
  CrossAttention::Cache c;
  return layer.forward(ps, top, alternatives, c);
}

}  // namespace clarigate
