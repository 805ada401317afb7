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

// Binary model checkpoints. Layout (all integers u64, host byte order,
// doubles as raw IEEE-754 bits):
//   magic "CLARIGT1"
//   model config, seed
//   four vocabularies as token lists
//   parameter count, then per parameter: name, rows, cols, values

#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>

#include "clarigate/neural.hpp"

namespace clarigate {

namespace detail {

class BinaryWriter {
 public:
  explicit BinaryWriter(std::ostream& os) : os_(os) {}
  void u64(std::uint64_t v) { os_.write(reinterpret_cast<const char*>(&v), sizeof v); }
  void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }
  void str(const std::string& s) {
    u64(s.size());
    os_.write(s.data(), std::streamsize(s.size()));
  }

 private:
  std::ostream& os_;
};

class BinaryReader {
 public:
  explicit BinaryReader(std::istream& is) : is_(is) {}
  std::uint64_t u64() {
    std::uint64_t v = 0;
    if (!is_.read(reinterpret_cast<char*>(&v), sizeof v))
      throw Error(ErrorCode::MalformedRecord, "checkpoint truncated");
    return v;
  }
  double f64() { return std::bit_cast<double>(u64()); }
  std::string str() {
    const std::uint64_t n = u64();
    if (n > (1ULL << 32)) throw Error(ErrorCode::MalformedRecord, "checkpoint string too long");
    std::string s(n, '\0');
    if (n && !is_.read(s.data(), std::streamsize(n)))
      throw Error(ErrorCode::MalformedRecord, "checkpoint truncated");
    return s;
  }

 private:
  std::istream& is_;
};

inline constexpr char kCheckpointMagic[9] = "CLARIGT1";

}  // namespace detail

inline void save_checkpoint(std::ostream& os, const ClarificationModel& model) {
  detail::BinaryWriter w(os);
  os.write(detail::kCheckpointMagic, 8);
  const ModelConfig& c = model.config();
  w.u64(c.featurizer.d_model);
  w.u64(c.featurizer.n_heads_sentence);
  w.u64(c.featurizer.ffn_mult);
  w.f64(c.featurizer.layer_norm_eps);
  w.f64(c.featurizer.embedding_init);
  w.u64(c.featurizer.sentence_positional);
  w.str(std::string(to_string(c.variant)));
  w.str(c.flags.to_string());
  w.u64(c.hyp_heads);
  w.u64(c.hyp_ffn_mult);
  w.u64(c.head_hidden);
  w.f64(c.threshold);
  w.f64(c.dropout);
  w.u64(model.seed());
  const Vocabularies& v = model.vocabularies();
  for (const Vocab* voc : {&v.words, &v.domains, &v.intents, &v.slot_keys}) {
    w.u64(voc->size());
    for (const auto& t : voc->tokens()) w.str(t);
  }
  const ParamStore& ps = model.params();
  w.u64(ps.size());
  for (ParamId id = 0; id < ps.size(); ++id) {
    w.str(ps.name(id));
    w.u64(ps[id].rows());
    w.u64(ps[id].cols());
    for (double x : ps[id].values()) w.f64(x);
  }
  if (!os) throw Error(ErrorCode::Io, "checkpoint write failed");
}

inline ClarificationModel load_checkpoint(std::istream& is) {
  char magic[8];
  if (!is.read(magic, 8) || std::memcmp(magic, detail::kCheckpointMagic, 8) != 0)
    throw Error(ErrorCode::MalformedRecord, "not a checkpoint (bad magic)");
  detail::BinaryReader r(is);
  ModelConfig c;
  c.featurizer.d_model = r.u64();
  c.featurizer.n_heads_sentence = r.u64();
  c.featurizer.ffn_mult = r.u64();
  c.featurizer.layer_norm_eps = r.f64();
  c.featurizer.embedding_init = r.f64();
  c.featurizer.sentence_positional = r.u64() != 0;
  c.variant = variant_from_string(r.str());
  c.flags = AblationFlags::parse(r.str());
  c.hyp_heads = r.u64();
  c.hyp_ffn_mult = r.u64();
  c.head_hidden = r.u64();
  c.threshold = r.f64();
  c.dropout = r.f64();
  const std::uint64_t seed = r.u64();
  Vocabularies v;
  for (Vocab* voc : {&v.words, &v.domains, &v.intents, &v.slot_keys}) {
    const std::uint64_t n = r.u64();
    std::vector<std::string> tokens;
    for (std::uint64_t i = 0; i < n; ++i) tokens.push_back(r.str());
    *voc = Vocab::from_tokens(tokens);
  }
  ClarificationModel model(c, v, seed);
  ParamStore& ps = model.params();
  if (r.u64() != ps.size()) throw Error(ErrorCode::ShapeMismatch, "checkpoint parameter count differs");
  for (ParamId id = 0; id < ps.size(); ++id) {
    const std::string name = r.str();
    const std::uint64_t rows = r.u64(), cols = r.u64();
    if (name != ps.name(id) || rows != ps[id].rows() || cols != ps[id].cols())
      throw Error(ErrorCode::ShapeMismatch, "checkpoint parameter " + name + " does not match model");
    for (double& x : ps[id].values()) x = r.f64();
  }
  return model;
}

inline void save_checkpoint(const std::string& path, const ClarificationModel& model) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw Error(ErrorCode::Io, "cannot write " + path);
  save_checkpoint(os, model);
}

inline ClarificationModel load_checkpoint(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw Error(ErrorCode::Io, "cannot open " + path);
  return load_checkpoint(is);
}

/// Serialized bytes of a model; equal bytes mean bit-identical checkpoints.
inline std::string checkpoint_bytes(const ClarificationModel& model) {
  std::ostringstream os(std::ios::binary);
  save_checkpoint(os, model);
  return os.str();
}

}  // namespace clarigate
