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

// INI configuration with sections [detector], [featurizer], [model],
// [train] and [generator]. Every key is optional; unknown sections or keys
// are rejected so typos do not pass silently.

#pragma once

#include <array>
#include <fstream>
#include <set>
#include <sstream>
#include <string>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include "clarigate/datagen.hpp"
#include "clarigate/neural.hpp"
#include "clarigate/training.hpp"

namespace clarigate {

struct AppConfig {
  DetectorConfig detector;
  ModelConfig model;
  SnrBounds snr_bounds;
  TrainConfig train;
  GeneratorConfig generator;

  void validate() const {
    detector.validate();
    model.validate();
    train.validate();
    generator.validate();
    if (!(snr_bounds.lo < snr_bounds.hi)) throw Error(ErrorCode::Config, "snr bounds need lo < hi");
  }
};

namespace detail {

class IniReader {
 public:
  explicit IniReader(const boost::property_tree::ptree& tree) : tree_(tree) {}

  template <typename T>
  void get(const std::string& section, const std::string& key, T& out) {
    known_.insert(section + "." + key);
    auto sec = tree_.get_child_optional(section);
    if (!sec) return;
    auto v = sec->get_optional<std::string>(key);
    if (!v) return;
    try {
      out = parse<T>(*v);
    } catch (const std::exception&) {
      throw Error(ErrorCode::Config, "bad value for " + section + "." + key + ": '" + *v + "'");
    }
  }

  void reject_unknown() const {
    static const std::set<std::string> sections = {"detector", "featurizer", "model", "train",
                                                   "generator"};
    for (const auto& [sec, body] : tree_) {
      if (!sections.contains(sec)) throw Error(ErrorCode::Config, "unknown section [" + sec + "]");
      for (const auto& [key, _] : body)
        if (!known_.contains(sec + "." + key))
          throw Error(ErrorCode::Config, "unknown key " + sec + "." + key);
    }
  }

 private:
  template <typename T>
  static T parse(const std::string& s) {
    if constexpr (std::is_same_v<T, std::string>) {
      return s;
    } else if constexpr (std::is_same_v<T, bool>) {
      if (s == "true" || s == "1" || s == "yes") return true;
      if (s == "false" || s == "0" || s == "no") return false;
      throw std::invalid_argument(s);
    } else if constexpr (std::is_same_v<T, std::array<double, 5>>) {
      std::istringstream in(s);
      T a{};
      for (double& x : a)
        if (!(in >> x)) throw std::invalid_argument(s);
      std::string rest;
      if (in >> rest) throw std::invalid_argument(s);
      return a;
    } else if constexpr (std::is_same_v<T, std::set<std::string>>) {
      std::istringstream in(s);
      T words;
      for (std::string w; in >> w;) words.insert(w);
      return words;
    } else if constexpr (std::is_same_v<T, Variant>) {
      return variant_from_string(s);
    } else if constexpr (std::is_same_v<T, AblationFlags>) {
      return AblationFlags::parse(s);
    } else if constexpr (std::is_integral_v<T>) {
      std::size_t pos = 0;
      const long long v = std::stoll(s, &pos);
      if (pos != s.size() || v < 0) throw std::invalid_argument(s);
      return T(v);
    } else {
      std::size_t pos = 0;
      const double v = std::stod(s, &pos);
      if (pos != s.size()) throw std::invalid_argument(s);
      return T(v);
    }
  }

  const boost::property_tree::ptree& tree_;
  std::set<std::string> known_;
};

}  // namespace detail

inline AppConfig parse_config(std::istream& in) {
  boost::property_tree::ptree tree;
  try {
    boost::property_tree::ini_parser::read_ini(in, tree);
  } catch (const boost::property_tree::ini_parser_error& e) {
    throw Error(ErrorCode::Config, e.what());
  }
  AppConfig c;
  detail::IniReader r(tree);
  auto& d = c.detector;
  r.get("detector", "asr_conf_floor", d.asr_conf_floor);
  r.get("detector", "asr_conf_gap", d.asr_conf_gap);
  r.get("detector", "ic_conf_gap", d.ic_conf_gap);
  r.get("detector", "ic_conf_floor", d.ic_conf_floor);
  r.get("detector", "hc_conf_gap", d.hc_conf_gap);
  r.get("detector", "snr_threshold", d.snr_threshold);
  r.get("detector", "trunc_lexicon", d.trunc_lexicon);

  auto& f = c.model.featurizer;
  r.get("featurizer", "d_model", f.d_model);
  r.get("featurizer", "n_heads_sentence", f.n_heads_sentence);
  r.get("featurizer", "ffn_mult", f.ffn_mult);
  r.get("featurizer", "layer_norm_eps", f.layer_norm_eps);
  r.get("featurizer", "embedding_init", f.embedding_init);
  r.get("featurizer", "sentence_positional", f.sentence_positional);
  r.get("featurizer", "snr_lo", c.snr_bounds.lo);
  r.get("featurizer", "snr_hi", c.snr_bounds.hi);
  r.get("featurizer", "word_vectors", c.train.word_vectors);

  auto& m = c.model;
  r.get("model", "variant", m.variant);
  r.get("model", "flags", m.flags);
  r.get("model", "hyp_heads", m.hyp_heads);
  r.get("model", "hyp_ffn_mult", m.hyp_ffn_mult);
  r.get("model", "head_hidden", m.head_hidden);
  r.get("model", "threshold", m.threshold);
  r.get("model", "dropout", m.dropout);

  auto& t = c.train;
  r.get("train", "epochs", t.epochs);
  r.get("train", "batch_size", t.batch_size);
  r.get("train", "lr", t.adam.lr);
  r.get("train", "beta1", t.adam.beta1);
  r.get("train", "beta2", t.adam.beta2);
  r.get("train", "eps", t.adam.eps);
  r.get("train", "seed", t.seed);
  r.get("train", "pos_weight", t.pos_weight);
  r.get("train", "grad_shards", t.grad_shards);

  auto& g = c.generator;
  r.get("generator", "n_examples", g.n_examples);
  r.get("generator", "seed", g.seed);
  r.get("generator", "injection_rates", g.injection_rates);
  r.get("generator", "ask_rates", g.ask_rates);
  r.get("generator", "flip_rate", g.flip_rate);
  r.get("generator", "co_occurrence", g.co_occurrence);
  r.get("generator", "repeat_if_wrong", g.repeat_if_wrong);
  r.get("generator", "repeat_if_right", g.repeat_if_right);
  r.get("generator", "missing_hyp_conf", g.missing_hyp_conf);
  r.get("generator", "max_fillers", g.max_fillers);
  r.get("generator", "test_fraction", g.test_fraction);
  r.get("generator", "valid_fraction", g.valid_fraction);
  r.get("generator", "grammar_file", g.grammar_file);
  r.reject_unknown();

  g.detector = c.detector;
  g.snr_bounds = c.snr_bounds;
  c.validate();
  return c;
}

inline AppConfig parse_config_string(const std::string& text) {
  std::istringstream in(text);
  return parse_config(in);
}

inline AppConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::Config, "cannot open config " + path);
  return parse_config(in);
}

}  // namespace clarigate
