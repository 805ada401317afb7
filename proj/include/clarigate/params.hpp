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
#include <map>
#include <random>
#include <string>
#include <vector>

#include "clarigate/tensor.hpp"

namespace clarigate {

using Rng = std::mt19937_64;

/// splitmix64 finalizer; used to derive independent child seeds.
constexpr std::uint64_t mix_seed(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

constexpr std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
  return mix_seed(mix_seed(seed) ^ mix_seed(stream + 0x632be59bd9b4e019ULL));
}

inline double uniform(Rng& rng, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

using ParamId = std::size_t;

/// Named, densely stored learnable arrays. Order of registration is the
/// serialization order.
class ParamStore {
 public:
  ParamId add(const std::string& name, std::size_t rows, std::size_t cols) {
    if (index_.contains(name)) throw Error(ErrorCode::ShapeMismatch, "duplicate parameter " + name);
    index_[name] = values_.size();
    names_.push_back(name);
    values_.emplace_back(rows, cols);
    return values_.size() - 1;
  }

  ParamId add_uniform(const std::string& name, std::size_t rows, std::size_t cols, double limit,
                      Rng& rng) {
    ParamId id = add(name, rows, cols);
    for (double& v : values_[id].values()) v = uniform(rng, -limit, limit);
    return id;
  }

  /// Glorot-uniform weight matrix.
  ParamId add_glorot(const std::string& name, std::size_t rows, std::size_t cols, Rng& rng) {
    return add_uniform(name, rows, cols, std::sqrt(6.0 / double(rows + cols)), rng);
  }

  ParamId add_constant(const std::string& name, std::size_t rows, std::size_t cols, double v) {
    ParamId id = add(name, rows, cols);
    values_[id].fill(v);
    return id;
  }

  Matrix& operator[](ParamId id) { return values_[id]; }
  const Matrix& operator[](ParamId id) const { return values_[id]; }

  std::size_t size() const { return values_.size(); }
  const std::string& name(ParamId id) const { return names_[id]; }
  const std::vector<std::string>& names() const { return names_; }

  ParamId find(const std::string& name) const {
    auto it = index_.find(name);
    if (it == index_.end()) throw Error(ErrorCode::ShapeMismatch, "no parameter " + name);
    return it->second;
  }

  std::size_t scalar_count() const {
    std::size_t n = 0;
    for (const auto& m : values_) n += m.size();
    return n;
  }

  bool all_finite() const {
    for (const auto& m : values_)
      for (double v : m.values())
        if (!std::isfinite(v)) return false;
    return true;
  }

  bool operator==(const ParamStore& o) const { return names_ == o.names_ && values_ == o.values_; }

 private:
  std::vector<std::string> names_;
  std::vector<Matrix> values_;
  std::map<std::string, ParamId> index_;
};

/// Gradient buffers shaped like a ParamStore.
class Gradients {
 public:
  Gradients() = default;
  explicit Gradients(const ParamStore& ps) {
    grads_.reserve(ps.size());
    for (ParamId i = 0; i < ps.size(); ++i) grads_.emplace_back(ps[i].rows(), ps[i].cols());
  }

  Matrix& operator[](ParamId id) { return grads_[id]; }
  const Matrix& operator[](ParamId id) const { return grads_[id]; }
  std::size_t size() const { return grads_.size(); }

  void zero() {
    for (auto& g : grads_) g.fill(0.0);
  }

  Gradients& operator+=(const Gradients& o) {
    for (std::size_t i = 0; i < grads_.size(); ++i) grads_[i] += o.grads_[i];
    return *this;
  }

  void scale(double s) {
    for (auto& g : grads_)
      for (double& v : g.values()) v *= s;
  }

  double squared_norm() const {
    double s = 0.0;
    for (const auto& g : grads_)
      for (double v : g.values()) s += v * v;
    return s;
  }

 private:
  std::vector<Matrix> grads_;
};

}  // namespace clarigate
