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
#include <cstdlib>
#include <functional>
#include <iomanip>
#include <numeric>
#include <ostream>
#include <span>
#include <string>
#include <thread>
#include <vector>

#include "clarigate/adam.hpp"
#include "clarigate/eval.hpp"
#include "clarigate/neural.hpp"

namespace clarigate {

/// Worker count: CLARIGATE_THREADS if set and positive, else the hardware
/// concurrency (at least 1).
inline std::size_t resolve_threads() {
  if (const char* env = std::getenv("CLARIGATE_THREADS")) {
    char* end = nullptr;
    long n = std::strtol(env, &end, 10);
    if (end != env && n > 0) return std::size_t(n);
  }
  return std::max<std::size_t>(1, std::thread::hardware_concurrency());
}

/// Runs fn(i) for i in [0, n) on up to `threads` workers. Each index runs
/// exactly once; callers keep results per index so order never matters.
inline void parallel_for(std::size_t n, std::size_t threads, const std::function<void(std::size_t)>& fn) {
  threads = std::min(threads, n);
  if (threads <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::vector<std::jthread> pool;
  for (std::size_t w = 0; w < threads; ++w)
    pool.emplace_back([&, w] {
      for (std::size_t i = w; i < n; i += threads) fn(i);
    });
}

inline std::vector<ModelOutput> predict_all(const ClarificationModel& model,
                                            const std::vector<LabeledExample>& examples,
                                            std::size_t threads = resolve_threads()) {
  std::vector<ModelOutput> out(examples.size());
  constexpr std::size_t kChunk = 256;
  const std::size_t chunks = (examples.size() + kChunk - 1) / kChunk;
  parallel_for(chunks, threads, [&](std::size_t c) {
    const std::size_t end = std::min(examples.size(), (c + 1) * kChunk);
    for (std::size_t i = c * kChunk; i < end; ++i) out[i] = model.predict(examples[i].input);
  });
  return out;
}

inline std::vector<bool> decisions(const std::vector<ModelOutput>& outputs) {
  std::vector<bool> d;
  d.reserve(outputs.size());
  for (const auto& o : outputs) d.push_back(o.decision);
  return d;
}

inline std::vector<bool> labels_of(const std::vector<LabeledExample>& examples) {
  std::vector<bool> y;
  y.reserve(examples.size());
  for (const auto& e : examples) y.push_back(e.label);
  return y;
}

inline PRF1 evaluate(const ClarificationModel& model, const std::vector<LabeledExample>& examples,
                     std::size_t threads = resolve_threads()) {
  return prf1(decisions(predict_all(model, examples, threads)), labels_of(examples));
}

struct TrainConfig {
  std::size_t epochs = 20;
  std::size_t batch_size = 64;
  AdamConfig adam;
  std::uint64_t seed = 1;
  double pos_weight = 1.0;       // weight of positive examples in the loss
  std::size_t grad_shards = 4;   // fixed reduction layout, independent of thread count
  std::size_t threads = 0;       // 0: resolve_threads()
  std::string word_vectors;      // optional GloVe-format file for the word embeddings

  void validate() const {
    if (epochs < 1) throw Error(ErrorCode::Config, "epochs must be >= 1");
    if (batch_size < 1) throw Error(ErrorCode::Config, "batch_size must be >= 1");
    if (!(adam.lr > 0.0)) throw Error(ErrorCode::Config, "lr must be > 0");
    if (grad_shards < 1) throw Error(ErrorCode::Config, "grad_shards must be >= 1");
    if (!(pos_weight > 0.0)) throw Error(ErrorCode::Config, "pos_weight must be > 0");
  }
};

struct EpochMetrics {
  std::size_t epoch = 0;
  double loss = 0.0;  // mean training loss over the epoch
  PRF1 valid;

  bool operator==(const EpochMetrics&) const = default;
};

struct TrainResult {
  ClarificationModel best;
  std::size_t best_epoch = 0;
  std::vector<EpochMetrics> history;
};

inline void write_metrics_csv(std::ostream& os, const std::vector<EpochMetrics>& history) {
  os << "epoch,loss,valid_P,valid_R,valid_F1\n";
  os << std::setprecision(17);
  for (const auto& m : history)
    os << m.epoch << ',' << m.loss << ',' << m.valid.precision << ',' << m.valid.recall << ','
       << m.valid.f1 << '\n';
}

/// Mean-loss gradient of `batch` (indices into `data`). The batch is cut
/// into `shards` contiguous pieces that accumulate independently and are
/// summed in shard order, so the result does not depend on thread count.
inline double batch_gradient(const ClarificationModel& model, const std::vector<LabeledExample>& data,
                             std::span<const std::size_t> batch, Gradients& total,
                             std::vector<Gradients>& shard_grads, double pos_weight,
                             std::size_t threads, std::uint64_t dropout_seed = 0) {
  const std::size_t b = batch.size();
  const std::size_t shards = std::min(shard_grads.size(), b);
  std::vector<double> shard_loss(shards, 0.0);
  const double w = 1.0 / double(b);
  parallel_for(shards, threads, [&](std::size_t s) {
    Gradients& g = shard_grads[s];
    g.zero();
    const std::size_t lo = s * b / shards, hi = (s + 1) * b / shards;
    for (std::size_t i = lo; i < hi; ++i) {
      Rng drop(derive_seed(dropout_seed, batch[i]));
      Rng* drop_ptr = model.config().dropout > 0.0 && dropout_seed ? &drop : nullptr;
      shard_loss[s] += model.accumulate_gradient(data[batch[i]], w, g, pos_weight, drop_ptr);
    }
  });
  total.zero();
  double loss = 0.0;
  for (std::size_t s = 0; s < shards; ++s) {
    total += shard_grads[s];
    loss += shard_loss[s];
  }
  return loss / double(b);
}

/// Adam training for a fixed number of epochs; keeps the parameters of the
/// epoch with the best validation F1 (earliest on ties).
inline TrainResult train(const std::vector<LabeledExample>& train_set,
                         const std::vector<LabeledExample>& valid_set, const ModelConfig& model_cfg,
                         const Vocabularies& vocabs, const TrainConfig& cfg,
                         const std::function<void(const EpochMetrics&)>& on_epoch = {}) {
  cfg.validate();
  if (train_set.empty() || valid_set.empty())
    throw Error(ErrorCode::EmptyDataset, "training and validation sets must be non-empty");
  if (model_cfg.variant == Variant::ALWAYS)
    throw Error(ErrorCode::UntrainableVariant, "ALWAYS has no parameters to train");
  const std::size_t threads = cfg.threads ? cfg.threads : resolve_threads();

  ClarificationModel model(model_cfg, vocabs, cfg.seed);
  if (!cfg.word_vectors.empty()) {
    const ParamId emb = model.featurizer().word_embedding();
    load_word_vectors(cfg.word_vectors, vocabs.words, model.params()[emb]);
  }
  AdamState state(model.params());
  Gradients total(model.params());
  std::vector<Gradients> shard_grads(cfg.grad_shards, Gradients(model.params()));

  TrainResult result;
  double best_f1 = -1.0;
  std::vector<std::size_t> order(train_set.size());
  std::iota(order.begin(), order.end(), 0);
  std::uint64_t step = 0;
  for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    Rng shuffle_rng(derive_seed(cfg.seed, 0x5348554646ULL + epoch));
    std::shuffle(order.begin(), order.end(), shuffle_rng);
    double loss_sum = 0.0;
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const std::size_t len = std::min(cfg.batch_size, order.size() - start);
      std::span<const std::size_t> batch(order.data() + start, len);
      ++step;
      const double loss = batch_gradient(model, train_set, batch, total, shard_grads,
                                         cfg.pos_weight, threads, derive_seed(cfg.seed, step));
      loss_sum += loss * double(len);
      adam_step(model.params(), total, state, cfg.adam);
    }
    EpochMetrics m{epoch, loss_sum / double(train_set.size()), evaluate(model, valid_set, threads)};
    result.history.push_back(m);
    if (on_epoch) on_epoch(m);
    if (m.valid.f1 > best_f1) {
      best_f1 = m.valid.f1;
      result.best_epoch = epoch;
      result.best = model;
    }
  }
  return result;
}

/// Mean binary cross-entropy over `examples`.
inline double mean_loss(const ClarificationModel& model, const std::vector<LabeledExample>& examples,
                        double pos_weight = 1.0) {
  double s = 0.0;
  for (const auto& e : examples) s += model.example_loss(e, pos_weight);
  return s / double(examples.size());
}

// ---------------------------------------------------------------------------
// Finite-difference verification

struct GradCheckGroup {
  std::string name;
  std::size_t checked = 0;
  std::size_t skipped_kinks = 0;  // entries whose +/- steps changed a ReLU pattern
  double max_rel_error = 0.0;
  double max_abs_error = 0.0;
};

struct GradCheckReport {
  Variant variant = Variant::SELF_ATT;
  AblationFlags flags;
  std::vector<GradCheckGroup> groups;
  double tolerance = 1e-4;

  std::size_t skipped_kinks() const {
    std::size_t n = 0;
    for (const auto& g : groups) n += g.skipped_kinks;
    return n;
  }
  double max_rel_error() const {
    double m = 0.0;
    for (const auto& g : groups) m = std::max(m, g.max_rel_error);
    return m;
  }
  bool passed() const { return max_rel_error() <= tolerance; }
};

struct GradCheckOptions {
  double epsilon = 1e-5;
  double tolerance = 1e-4;
  double denominator_floor = 1e-6;  // relative error uses max(|a|, |n|, floor)
  std::size_t per_group = 16;       // entries checked per parameter array
};

/// Relative error used by the gradient check.
inline double gradient_rel_error(double analytic, double numeric, double floor) {
  return std::abs(analytic - numeric) / std::max({std::abs(analytic), std::abs(numeric), floor});
}

/// A seeded micro-batch (6 examples) that covers every ambiguity type,
/// placeholders, shared transcripts, empty slots and a no-alternative input.
inline std::vector<LabeledExample> make_micro_batch(std::uint64_t seed) {
  Rng rng(derive_seed(seed, 0x4d4943524fULL));
  const std::vector<std::string> words = {"set", "a", "timer", "for", "fifteen", "fifty", "minutes",
                                          "play", "harry", "larry", "potter", "turn", "on", "the",
                                          "light", "get", "me", "ride"};
  auto sentence = [&](std::size_t len) {
    Tokens t;
    for (std::size_t i = 0; i < len; ++i)
      t.push_back(words[std::uniform_int_distribution<std::size_t>(0, words.size() - 1)(rng)]);
    return t;
  };
  const std::vector<std::string> domains = {"Timers", "Video", "Books", "SmartHome"};
  const std::vector<std::string> intents = {"SetTimer", "PlayVideo", "ReadBook", "TurnOn", "TurnOff"};
  const std::vector<std::string> keys = {"duration", "videotitle", "booktitle", "device"};
  auto pick = [&](const std::vector<std::string>& v) {
    return v[std::uniform_int_distribution<std::size_t>(0, v.size() - 1)(rng)];
  };
  auto hyp = [&](Tokens transcript, int rank) {
    Hypothesis h;
    h.transcript = std::move(transcript);
    h.asr_conf = uniform(rng, 0.3, 1.0);
    h.domain = pick(domains);
    h.intent = pick(intents);
    h.intent_conf = uniform(rng, 0.3, 1.0);
    const std::size_t n_slots = std::uniform_int_distribution<std::size_t>(0, 2)(rng);
    for (std::size_t s = 0; s < n_slots; ++s) h.slots.push_back({pick(keys), sentence(1)});
    h.rank = rank;
    return h;
  };
  std::vector<std::vector<AmbiguityType>> layouts = {
      {AmbiguityType::ASR, AmbiguityType::IC},
      {AmbiguityType::HC, AmbiguityType::SNR},
      {AmbiguityType::TRUNC},
      {},
      {AmbiguityType::IC, AmbiguityType::HC, AmbiguityType::SNR, AmbiguityType::TRUNC},
      {AmbiguityType::ASR}};
  std::vector<LabeledExample> batch;
  for (std::size_t e = 0; e < layouts.size(); ++e) {
    LabeledExample ex;
    ex.input.top = hyp(sentence(2 + e % 3), 1);
    int rank = 2;
    for (auto t : layouts[e]) {
      ex.input.occurrences[index_of(t)] = true;
      if (!has_alternative(t)) {
        ex.input.alternatives.push_back({t, Placeholder{}});
        continue;
      }
      // IC and HC alternatives share the top transcript.
      Tokens tr = t == AmbiguityType::ASR ? sentence(ex.input.top.transcript.size())
                                          : ex.input.top.transcript;
      ex.input.alternatives.push_back({t, hyp(std::move(tr), rank++)});
    }
    ex.input.snr_norm = uniform(rng, -1.0, 1.0);
    ex.input.repetition = e % 2 == 1;
    ex.label = e % 3 != 1;
    ex.type_tags = type_tags(ex.input.occurrences);
    batch.push_back(std::move(ex));
  }
  return batch;
}

inline Vocabularies vocabularies_of(const std::vector<LabeledExample>& examples) {
  Vocabularies v;
  for (const auto& e : examples) {
    v.observe(e.input.top);
    for (const auto& a : e.input.alternatives)
      if (!a.is_placeholder()) v.observe(a.hypothesis());
  }
  return v;
}

/// Compares analytic gradients of the mean loss over `batch` against
/// central differences, on a sample of entries from every parameter array.
inline GradCheckReport grad_check(ClarificationModel& model, const std::vector<LabeledExample>& batch,
                                  std::uint64_t seed, const GradCheckOptions& opt = {}) {
  GradCheckReport report;
  report.variant = model.variant();
  report.flags = model.config().flags;
  report.tolerance = opt.tolerance;
  if (!model.trainable()) return report;

  ParamStore& ps = model.params();
  Gradients g(ps);
  for (const auto& ex : batch) model.accumulate_gradient(ex, 1.0 / double(batch.size()), g);
  Rng rng(derive_seed(seed, 0x4752414443ULL));
  for (ParamId id = 0; id < ps.size(); ++id) {
    GradCheckGroup group{ps.name(id)};
    auto& values = ps[id].values();
    const auto& grad = g[id].values();
    std::vector<std::size_t> picks;
    if (values.size() <= opt.per_group) {
      picks.resize(values.size());
      std::iota(picks.begin(), picks.end(), 0);
    } else {
      // Mostly entries that actually receive gradient, plus a few arbitrary ones.
      std::vector<std::size_t> live;
      for (std::size_t i = 0; i < grad.size(); ++i)
        if (grad[i] != 0.0) live.push_back(i);
      std::shuffle(live.begin(), live.end(), rng);
      const std::size_t n_live = std::min(live.size(), opt.per_group * 3 / 4);
      picks.assign(live.begin(), live.begin() + std::ptrdiff_t(n_live));
      while (picks.size() < opt.per_group)
        picks.push_back(std::uniform_int_distribution<std::size_t>(0, values.size() - 1)(rng));
    }
    std::vector<bool> pattern_up, pattern_down;
    for (std::size_t i : picks) {
      const double saved = values[i];
      pattern_up.clear();
      pattern_down.clear();
      values[i] = saved + opt.epsilon;
      relu_pattern_log = &pattern_up;
      const double up = mean_loss(model, batch);
      values[i] = saved - opt.epsilon;
      relu_pattern_log = &pattern_down;
      const double down = mean_loss(model, batch);
      relu_pattern_log = nullptr;
      values[i] = saved;
      if (pattern_up != pattern_down) {
        ++group.skipped_kinks;
        continue;
      }
      const double numeric = (up - down) / (2.0 * opt.epsilon);
      group.max_rel_error = std::max(group.max_rel_error,
                                     gradient_rel_error(grad[i], numeric, opt.denominator_floor));
      group.max_abs_error = std::max(group.max_abs_error, std::abs(grad[i] - numeric));
      ++group.checked;
    }
    report.groups.push_back(group);
  }
  return report;
}

/// Small-width model configuration used by the gradient check.
inline ModelConfig grad_check_config(Variant variant, AblationFlags flags) {
  ModelConfig cfg;
  cfg.featurizer.d_model = 8;
  cfg.featurizer.n_heads_sentence = 2;
  cfg.featurizer.ffn_mult = 2;
  cfg.hyp_heads = 2;
  cfg.hyp_ffn_mult = 2;
  cfg.variant = variant;
  cfg.flags = flags;
  return cfg;
}

/// Seeded end-to-end gradient check of one variant/flag combination.
inline GradCheckReport grad_check(Variant variant, AblationFlags flags, std::uint64_t seed,
                                  const GradCheckOptions& opt = {}) {
  auto batch = make_micro_batch(seed);
  ClarificationModel model(grad_check_config(variant, flags), vocabularies_of(batch), seed);
  return grad_check(model, batch, seed, opt);
}

}  // namespace clarigate
