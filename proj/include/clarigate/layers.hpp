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

// Transformer building blocks with hand-written backward passes. Every
// layer is a bundle of ParamIds; forward fills a cache, backward consumes
// it, accumulates parameter gradients and returns the input gradient.

#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "clarigate/params.hpp"
#include "clarigate/tensor.hpp"

namespace clarigate {

/// When set on the current thread, relu_inplace appends the sign of every
/// input it sees. Used to detect finite-difference steps that cross a kink.
inline thread_local std::vector<bool>* relu_pattern_log = nullptr;

inline void relu_inplace(Matrix& m) {
  for (double& v : m.values()) {
    if (relu_pattern_log) relu_pattern_log->push_back(v > 0.0);
    v = v > 0.0 ? v : 0.0;
  }
}

struct Linear {
  ParamId weight = 0;  // in x out
  ParamId bias = 0;    // 1 x out
  std::size_t in = 0;
  std::size_t out = 0;

  static Linear create(ParamStore& ps, const std::string& name, std::size_t in, std::size_t out,
                       Rng& rng) {
    Linear l;
    l.in = in;
    l.out = out;
    l.weight = ps.add_glorot(name + ".w", in, out, rng);
    l.bias = ps.add_constant(name + ".b", 1, out, 0.0);
    return l;
  }

  Matrix forward(const ParamStore& ps, const Matrix& x) const {
    Matrix y = matmul(x, ps[weight]);
    const Matrix& b = ps[bias];
    for (std::size_t i = 0; i < y.rows(); ++i)
      for (std::size_t j = 0; j < out; ++j) y(i, j) += b[j];
    return y;
  }

  Matrix backward(const ParamStore& ps, const Matrix& x, const Matrix& dy, Gradients& g) const {
    matmul_at_b_acc(x, dy, g[weight]);
    Matrix& db = g[bias];
    for (std::size_t i = 0; i < dy.rows(); ++i)
      for (std::size_t j = 0; j < out; ++j) db[j] += dy(i, j);
    return matmul_a_bt(dy, ps[weight]);
  }
};

struct LayerNorm {
  ParamId gamma = 0;
  ParamId beta = 0;
  std::size_t dim = 0;
  double eps = 1e-5;

  struct Cache {
    Matrix xhat;
    std::vector<double> inv_std;
  };

  static LayerNorm create(ParamStore& ps, const std::string& name, std::size_t dim, double eps) {
    LayerNorm ln;
    ln.dim = dim;
    ln.eps = eps;
    ln.gamma = ps.add_constant(name + ".gamma", 1, dim, 1.0);
    ln.beta = ps.add_constant(name + ".beta", 1, dim, 0.0);
    return ln;
  }

  Matrix forward(const ParamStore& ps, const Matrix& x, Cache& c) const {
    const Matrix& g = ps[gamma];
    const Matrix& b = ps[beta];
    c.xhat = Matrix(x.rows(), dim);
    c.inv_std.assign(x.rows(), 0.0);
    Matrix y(x.rows(), dim);
    for (std::size_t i = 0; i < x.rows(); ++i) {
      double mean = 0.0;
      for (std::size_t j = 0; j < dim; ++j) mean += x(i, j);
      mean /= double(dim);
      double var = 0.0;
      for (std::size_t j = 0; j < dim; ++j) var += (x(i, j) - mean) * (x(i, j) - mean);
      var /= double(dim);
      const double inv = 1.0 / std::sqrt(var + eps);
      c.inv_std[i] = inv;
      for (std::size_t j = 0; j < dim; ++j) {
        double xh = (x(i, j) - mean) * inv;
        c.xhat(i, j) = xh;
        y(i, j) = xh * g[j] + b[j];
      }
    }
    return y;
  }

  Matrix backward(const ParamStore& ps, const Cache& c, const Matrix& dy, Gradients& grads) const {
    const Matrix& g = ps[gamma];
    Matrix& dg = grads[gamma];
    Matrix& db = grads[beta];
    Matrix dx(dy.rows(), dim);
    std::vector<double> dxhat(dim);
    for (std::size_t i = 0; i < dy.rows(); ++i) {
      double sum = 0.0, sum_xh = 0.0;
      for (std::size_t j = 0; j < dim; ++j) {
        dg[j] += dy(i, j) * c.xhat(i, j);
        db[j] += dy(i, j);
        dxhat[j] = dy(i, j) * g[j];
        sum += dxhat[j];
        sum_xh += dxhat[j] * c.xhat(i, j);
      }
      const double k = c.inv_std[i] / double(dim);
      for (std::size_t j = 0; j < dim; ++j)
        dx(i, j) = k * (double(dim) * dxhat[j] - sum - c.xhat(i, j) * sum_xh);
    }
    return dx;
  }
};

/// Scaled dot-product attention with `heads` heads over the rows of x.
/// No positional information is added here.
struct MultiHeadAttention {
  Linear q, k, v, o;
  std::size_t dim = 0;
  std::size_t heads = 1;

  struct Cache {
    Matrix x, q, k, v, concat;
    std::vector<Matrix> attn;  // per head, n x n
  };

  static MultiHeadAttention create(ParamStore& ps, const std::string& name, std::size_t dim,
                                   std::size_t heads, Rng& rng) {
    if (heads == 0 || dim % heads != 0)
      throw Error(ErrorCode::Config, name + ": width " + std::to_string(dim) +
                                         " is not divisible by " + std::to_string(heads) + " heads");
    MultiHeadAttention m;
    m.dim = dim;
    m.heads = heads;
    m.q = Linear::create(ps, name + ".q", dim, dim, rng);
    m.k = Linear::create(ps, name + ".k", dim, dim, rng);
    m.v = Linear::create(ps, name + ".v", dim, dim, rng);
    m.o = Linear::create(ps, name + ".o", dim, dim, rng);
    return m;
  }

  Matrix forward(const ParamStore& ps, const Matrix& x, Cache& c) const {
    const std::size_t n = x.rows();
    const std::size_t dk = dim / heads;
    const double scale = 1.0 / std::sqrt(double(dk));
    c.x = x;
    c.q = q.forward(ps, x);
    c.k = k.forward(ps, x);
    c.v = v.forward(ps, x);
    c.concat = Matrix(n, dim);
    c.attn.assign(heads, Matrix(n, n));
    for (std::size_t h = 0; h < heads; ++h) {
      const std::size_t off = h * dk;
      Matrix& a = c.attn[h];
      for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
          double s = 0.0;
          for (std::size_t t = 0; t < dk; ++t) s += c.q(i, off + t) * c.k(j, off + t);
          a(i, j) = s * scale;
        }
        softmax_inplace(a.row_span(i));
        for (std::size_t j = 0; j < n; ++j) {
          const double w = a(i, j);
          for (std::size_t t = 0; t < dk; ++t) c.concat(i, off + t) += w * c.v(j, off + t);
        }
      }
    }
    return o.forward(ps, c.concat);
  }

  Matrix backward(const ParamStore& ps, const Cache& c, const Matrix& dy, Gradients& g) const {
    const std::size_t n = c.x.rows();
    const std::size_t dk = dim / heads;
    const double scale = 1.0 / std::sqrt(double(dk));
    Matrix dconcat = o.backward(ps, c.concat, dy, g);
    Matrix dq(n, dim), dk_m(n, dim), dv(n, dim);
    std::vector<double> da(n);
    for (std::size_t h = 0; h < heads; ++h) {
      const std::size_t off = h * dk;
      const Matrix& a = c.attn[h];
      for (std::size_t i = 0; i < n; ++i) {
        // dA(i,j) = dO_i . V_j ; dV_j += A(i,j) dO_i
        double dot = 0.0;
        for (std::size_t j = 0; j < n; ++j) {
          double s = 0.0;
          for (std::size_t t = 0; t < dk; ++t) {
            s += dconcat(i, off + t) * c.v(j, off + t);
            dv(j, off + t) += a(i, j) * dconcat(i, off + t);
          }
          da[j] = s;
          dot += s * a(i, j);
        }
        for (std::size_t j = 0; j < n; ++j) {
          const double ds = a(i, j) * (da[j] - dot) * scale;
          if (ds == 0.0) continue;
          for (std::size_t t = 0; t < dk; ++t) {
            dq(i, off + t) += ds * c.k(j, off + t);
            dk_m(j, off + t) += ds * c.q(i, off + t);
          }
        }
      }
    }
    Matrix dx = q.backward(ps, c.x, dq, g);
    dx += k.backward(ps, c.x, dk_m, g);
    dx += v.backward(ps, c.x, dv, g);
    return dx;
  }
};

/// Post-norm transformer encoder layer:
///   y = LN1(x + MHA(x));  out = LN2(y + W2 relu(W1 y + b1) + b2)
struct EncoderLayer {
  MultiHeadAttention attn;
  LayerNorm ln1, ln2;
  Linear ff1, ff2;

  struct Cache {
    MultiHeadAttention::Cache attn;
    LayerNorm::Cache ln1, ln2;
    Matrix y1, hidden;  // hidden is post-ReLU
  };

  static EncoderLayer create(ParamStore& ps, const std::string& name, std::size_t dim,
                             std::size_t heads, std::size_t ffn_width, double eps, Rng& rng) {
    EncoderLayer l;
    l.attn = MultiHeadAttention::create(ps, name + ".attn", dim, heads, rng);
    l.ln1 = LayerNorm::create(ps, name + ".ln1", dim, eps);
    l.ff1 = Linear::create(ps, name + ".ff1", dim, ffn_width, rng);
    l.ff2 = Linear::create(ps, name + ".ff2", ffn_width, dim, rng);
    l.ln2 = LayerNorm::create(ps, name + ".ln2", dim, eps);
    return l;
  }

  Matrix forward(const ParamStore& ps, const Matrix& x, Cache& c) const {
    Matrix r1 = attn.forward(ps, x, c.attn);
    r1 += x;
    c.y1 = ln1.forward(ps, r1, c.ln1);
    c.hidden = ff1.forward(ps, c.y1);
    relu_inplace(c.hidden);
    Matrix r2 = ff2.forward(ps, c.hidden);
    r2 += c.y1;
    return ln2.forward(ps, r2, c.ln2);
  }

  Matrix backward(const ParamStore& ps, const Cache& c, const Matrix& dout, Gradients& g) const {
    Matrix dr2 = ln2.backward(ps, c.ln2, dout, g);
    Matrix dhidden = ff2.backward(ps, c.hidden, dr2, g);
    for (std::size_t i = 0; i < dhidden.size(); ++i)
      if (c.hidden[i] <= 0.0) dhidden[i] = 0.0;
    Matrix dy1 = ff1.backward(ps, c.y1, dhidden, g);
    dy1 += dr2;
    Matrix dr1 = ln1.backward(ps, c.ln1, dy1, g);
    Matrix dx = attn.backward(ps, c.attn, dr1, g);
    dx += dr1;
    return dx;
  }
};

/// A stack of encoder layers, each with its own parameters.
struct EncoderStack {
  std::vector<EncoderLayer> layers;

  using Cache = std::vector<EncoderLayer::Cache>;

  static EncoderStack create(ParamStore& ps, const std::string& name, std::size_t n_layers,
                             std::size_t dim, std::size_t heads, std::size_t ffn_width,
                             double eps, Rng& rng) {
    EncoderStack s;
    for (std::size_t i = 0; i < n_layers; ++i)
      s.layers.push_back(EncoderLayer::create(ps, name + ".layer" + std::to_string(i), dim, heads,
                                              ffn_width, eps, rng));
    return s;
  }

  Matrix forward(const ParamStore& ps, const Matrix& x, Cache& c) const {
    c.resize(layers.size());
    Matrix h = x;
    for (std::size_t i = 0; i < layers.size(); ++i) h = layers[i].forward(ps, h, c[i]);
    return h;
  }

  Matrix backward(const ParamStore& ps, const Cache& c, const Matrix& dout, Gradients& g) const {
    Matrix d = dout;
    for (std::size_t i = layers.size(); i-- > 0;) d = layers[i].backward(ps, c[i], d, g);
    return d;
  }
};

/// Single-head attention with one query row over a set of key/value rows.
struct CrossAttention {
  Linear q, k, v;
  std::size_t dim = 0;

  struct Cache {
    Matrix query_in, items_in, q, k, v;
    std::vector<double> weights;
  };

  static CrossAttention create(ParamStore& ps, const std::string& name, std::size_t dim,
                               Rng& rng) {
    CrossAttention c;
    c.dim = dim;
    c.q = Linear::create(ps, name + ".q", dim, dim, rng);
    c.k = Linear::create(ps, name + ".k", dim, dim, rng);
    c.v = Linear::create(ps, name + ".v", dim, dim, rng);
    return c;
  }

  /// Returns a 1 x dim row; zero when there are no items.
  Matrix forward(const ParamStore& ps, const Matrix& query, const Matrix& items, Cache& c) const {
    c.query_in = query;
    c.items_in = items;
    c.weights.clear();
    Matrix out(1, dim);
    if (items.rows() == 0) return out;
    c.q = q.forward(ps, query);
    c.k = k.forward(ps, items);
    c.v = v.forward(ps, items);
    const double scale = 1.0 / std::sqrt(double(dim));
    Matrix s = matmul_a_bt(c.q, c.k);
    c.weights.assign(s.values().begin(), s.values().end());
    for (double& w : c.weights) w *= scale;
    softmax_inplace(c.weights);
    for (std::size_t j = 0; j < items.rows(); ++j)
      for (std::size_t t = 0; t < dim; ++t) out[t] += c.weights[j] * c.v(j, t);
    return out;
  }

  /// Accumulates into dquery (1 x dim) and ditems (m x dim).
  void backward(const ParamStore& ps, const Cache& c, const Matrix& dout, Matrix& dquery,
                Matrix& ditems, Gradients& g) const {
    const std::size_t m = c.items_in.rows();
    if (m == 0) return;
    const double scale = 1.0 / std::sqrt(double(dim));
    Matrix dv(m, dim), dk(m, dim), dq(1, dim);
    std::vector<double> dw(m);
    double dot = 0.0;
    for (std::size_t j = 0; j < m; ++j) {
      double s = 0.0;
      for (std::size_t t = 0; t < dim; ++t) {
        s += dout[t] * c.v(j, t);
        dv(j, t) = c.weights[j] * dout[t];
      }
      dw[j] = s;
      dot += s * c.weights[j];
    }
    for (std::size_t j = 0; j < m; ++j) {
      const double ds = c.weights[j] * (dw[j] - dot) * scale;
      for (std::size_t t = 0; t < dim; ++t) {
        dq[t] += ds * c.k(j, t);
        dk(j, t) = ds * c.q[t];
      }
    }
    dquery += q.backward(ps, c.query_in, dq, g);
    ditems += k.backward(ps, c.items_in, dk, g);
    ditems += v.backward(ps, c.items_in, dv, g);
  }
};

}  // namespace clarigate
