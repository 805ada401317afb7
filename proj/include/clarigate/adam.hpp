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

#include "clarigate/params.hpp"

namespace clarigate {

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// First and second moment estimates plus the step counter.
struct AdamState {
  Gradients m, v;
  std::uint64_t step = 0;

  AdamState() = default;
  explicit AdamState(const ParamStore& ps) : m(ps), v(ps) {}
};

/// One bias-corrected Adam update. Throws before touching anything if a
/// gradient entry is NaN or infinite.
inline void adam_step(ParamStore& params, const Gradients& grads, AdamState& state,
                      const AdamConfig& cfg) {
  if (grads.size() != params.size() || state.m.size() != params.size())
    throw Error(ErrorCode::ShapeMismatch, "adam: gradient/state shapes do not match parameters");
  for (ParamId i = 0; i < grads.size(); ++i) {
    if (grads[i].rows() != params[i].rows() || grads[i].cols() != params[i].cols())
      throw Error(ErrorCode::ShapeMismatch, "adam: gradient shape differs for " + params.name(i));
    for (double g : grads[i].values())
      if (!std::isfinite(g))
        throw Error(ErrorCode::NonFiniteGradient, "non-finite gradient in " + params.name(i));
  }
  ++state.step;
  const double c1 = 1.0 - std::pow(cfg.beta1, double(state.step));
  const double c2 = 1.0 - std::pow(cfg.beta2, double(state.step));
  for (ParamId i = 0; i < params.size(); ++i) {
    auto& theta = params[i].values();
    auto& m = state.m[i].values();
    auto& v = state.v[i].values();
    const auto& g = grads[i].values();
    for (std::size_t j = 0; j < theta.size(); ++j) {
      m[j] = cfg.beta1 * m[j] + (1.0 - cfg.beta1) * g[j];
      v[j] = cfg.beta2 * v[j] + (1.0 - cfg.beta2) * g[j] * g[j];
      theta[j] -= cfg.lr * (m[j] / c1) / (std::sqrt(v[j] / c2) + cfg.eps);
    }
  }
}

}  // namespace clarigate
