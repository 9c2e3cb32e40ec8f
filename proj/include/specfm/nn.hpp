/*
Copyright 2026, the specfm authors

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
*/
#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <cstddef>
#include <cstdlib>
#include <new>
#include <functional>
#include <limits>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "specfm/errors.hpp"
#include "specfm/rng.hpp"

// Small reverse-mode tape over row-major 2-D tensors, sized for the models in
// this toolkit (sequences of <=150 peaks, d_model <=512). Templated on the
// scalar type: training runs in float, gradient checks in double.
namespace specfm::nn {

// All tensor storage is 64-byte aligned so Eigen's vectorized kernels take
// the same code path for every allocation; otherwise results differ in the
// last bits from run to run with the buffer addresses.
template <class T, std::size_t Align = 64>
struct AlignedAllocator {
  using value_type = T;

  AlignedAllocator() noexcept = default;
  template <class U>
  AlignedAllocator(const AlignedAllocator<U, Align>&) noexcept {}

  T* allocate(std::size_t n) {
    const std::size_t bytes = ((n * sizeof(T) + Align - 1) / Align) * Align;
    void* p = std::aligned_alloc(Align, bytes == 0 ? Align : bytes);
    if (!p) throw std::bad_alloc();
    return static_cast<T*>(p);
  }
  void deallocate(T* p, std::size_t) noexcept { std::free(p); }

  template <class U>
  struct rebind {
    using other = AlignedAllocator<U, Align>;
  };
  bool operator==(const AlignedAllocator&) const { return true; }
  bool operator!=(const AlignedAllocator&) const { return false; }
};

template <class T>
using AlignedVec = std::vector<T, AlignedAllocator<T>>;

template <class T>
struct Tensor {
  std::size_t rows = 0;
  std::size_t cols = 0;
  AlignedVec<T> data;

  Tensor() = default;
  Tensor(std::size_t r, std::size_t c, T fill = T(0)) : rows(r), cols(c), data(r * c, fill) {}

  std::size_t size() const { return data.size(); }
  T& at(std::size_t r, std::size_t c) { return data[r * cols + c]; }
  const T& at(std::size_t r, std::size_t c) const { return data[r * cols + c]; }
};

template <class T>
using EMat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

template <class T>
Eigen::Map<EMat<T>> emap(Tensor<T>& t) {
  return {t.data.data(), static_cast<Eigen::Index>(t.rows), static_cast<Eigen::Index>(t.cols)};
}

template <class T>
Eigen::Map<const EMat<T>> emap(const Tensor<T>& t) {
  return {t.data.data(), static_cast<Eigen::Index>(t.rows), static_cast<Eigen::Index>(t.cols)};
}

struct Var {
  std::int32_t id = -1;
  bool valid() const { return id >= 0; }
};

template <class T>
class Graph {
 public:
  Graph() = default;
  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;
  Graph(Graph&&) = delete;
  Graph& operator=(Graph&&) = delete;

  Var leaf(Tensor<T> v, bool needs_grad = false) {
    Node n;
    n.value = std::move(v);
    n.needs_grad = needs_grad;
    nodes_.push_back(std::move(n));
    return {static_cast<std::int32_t>(nodes_.size() - 1)};
  }

  const Tensor<T>& value(Var v) const { return nodes_[static_cast<std::size_t>(v.id)].value; }

  // valid after backward(); zero tensor if the node never received gradient
  const Tensor<T>& grad(Var v) {
    Node& n = nodes_[static_cast<std::size_t>(v.id)];
    ensure_grad(n);
    return n.grad;
  }

  // ---- ops ----

  Var matmul(Var a, Var b) {
    const Tensor<T>& ta = value(a);
    const Tensor<T>& tb = value(b);
    Tensor<T> out(ta.rows, tb.cols);
    emap(out).noalias() = emap(ta) * emap(tb);
    return make(std::move(out), {a, b}, [this, a, b](Node& n) {
      if (wants(a)) emap(grad_ref(a)).noalias() += emap(n.grad) * emap(value(b)).transpose();
      if (wants(b)) emap(grad_ref(b)).noalias() += emap(value(a)).transpose() * emap(n.grad);
    });
  }

  Var add(Var a, Var b) {
    Tensor<T> out = value(a);
    emap(out) += emap(value(b));
    return make(std::move(out), {a, b}, [this, a, b](Node& n) {
      if (wants(a)) emap(grad_ref(a)) += emap(n.grad);
      if (wants(b)) emap(grad_ref(b)) += emap(n.grad);
    });
  }

  // bias is 1 x n, broadcast over rows
  Var add_rowwise(Var a, Var bias) {
    Tensor<T> out = value(a);
    emap(out).rowwise() += emap(value(bias)).row(0);
    return make(std::move(out), {a, bias}, [this, a, bias](Node& n) {
      if (wants(a)) emap(grad_ref(a)) += emap(n.grad);
      if (wants(bias)) emap(grad_ref(bias)).row(0) += emap(n.grad).colwise().sum();
    });
  }

  Var mul_scalar(Var a, T s) {
    Tensor<T> out = value(a);
    emap(out) *= s;
    return make(std::move(out), {a}, [this, a, s](Node& n) {
      if (wants(a)) emap(grad_ref(a)) += s * emap(n.grad);
    });
  }

  Var relu(Var a) {
    Tensor<T> out = value(a);
    for (T& x : out.data) x = x > T(0) ? x : T(0);
    return make(std::move(out), {a}, [this, a](Node& n) {
      if (!wants(a)) return;
      Tensor<T>& ga = grad_ref(a);
      const Tensor<T>& in = value(a);
      for (std::size_t i = 0; i < in.data.size(); ++i) {
        if (in.data[i] > T(0)) ga.data[i] += n.grad.data[i];
      }
    });
  }

  // Inverted dropout; identity when p == 0.
  Var dropout(Var a, double p, Rng& rng) {
    if (p <= 0.0) return a;
    const Tensor<T>& in = value(a);
    Tensor<T> mask(in.rows, in.cols);
    const T scale = static_cast<T>(1.0 / (1.0 - p));
    for (std::size_t i = 0; i < mask.data.size(); ++i) {
      mask.data[i] = rng.uniform() < p ? T(0) : scale;
    }
    Tensor<T> out = in;
    for (std::size_t i = 0; i < out.data.size(); ++i) out.data[i] *= mask.data[i];
    return make(std::move(out), {a}, [this, a, mask = std::move(mask)](Node& n) {
      if (!wants(a)) return;
      Tensor<T>& ga = grad_ref(a);
      for (std::size_t i = 0; i < ga.data.size(); ++i) ga.data[i] += n.grad.data[i] * mask.data[i];
    });
  }

  // Row-wise layer normalization with learned gain/bias (1 x n each).
  Var layer_norm(Var x, Var gamma, Var beta, T eps = static_cast<T>(1e-5)) {
    const Tensor<T>& in = value(x);
    const std::size_t m = in.rows, n = in.cols;
    Tensor<T> xhat(m, n);
    std::vector<T> inv_std(m);
    for (std::size_t i = 0; i < m; ++i) {
      const T* row = in.data.data() + i * n;
      T mu = T(0);
      for (std::size_t j = 0; j < n; ++j) mu += row[j];
      mu /= static_cast<T>(n);
      T var = T(0);
      for (std::size_t j = 0; j < n; ++j) {
        const T d = row[j] - mu;
        var += d * d;
      }
      var /= static_cast<T>(n);
      const T is = T(1) / std::sqrt(var + eps);
      inv_std[i] = is;
      for (std::size_t j = 0; j < n; ++j) xhat.at(i, j) = (row[j] - mu) * is;
    }
    Tensor<T> out(m, n);
    const Tensor<T>& g = value(gamma);
    const Tensor<T>& b = value(beta);
    for (std::size_t i = 0; i < m; ++i) {
      for (std::size_t j = 0; j < n; ++j) out.at(i, j) = xhat.at(i, j) * g.data[j] + b.data[j];
    }
    return make(std::move(out), {x, gamma, beta},
                [this, x, gamma, beta, xhat = std::move(xhat), inv_std = std::move(inv_std)](Node& nd) {
                  const std::size_t m = xhat.rows, n = xhat.cols;
                  const Tensor<T>& g = value(gamma);
                  if (wants(gamma)) {
                    Tensor<T>& gg = grad_ref(gamma);
                    for (std::size_t i = 0; i < m; ++i) {
                      for (std::size_t j = 0; j < n; ++j) gg.data[j] += nd.grad.at(i, j) * xhat.at(i, j);
                    }
                  }
                  if (wants(beta)) {
                    Tensor<T>& gb = grad_ref(beta);
                    for (std::size_t i = 0; i < m; ++i) {
                      for (std::size_t j = 0; j < n; ++j) gb.data[j] += nd.grad.at(i, j);
                    }
                  }
                  if (wants(x)) {
                    Tensor<T>& gx = grad_ref(x);
                    for (std::size_t i = 0; i < m; ++i) {
                      // dxhat = dy * gamma; dx = inv_std * (dxhat - mean(dxhat)
                      //         - xhat * mean(dxhat * xhat))
                      T mean_dxh = T(0), mean_dxh_xh = T(0);
                      for (std::size_t j = 0; j < n; ++j) {
                        const T dxh = nd.grad.at(i, j) * g.data[j];
                        mean_dxh += dxh;
                        mean_dxh_xh += dxh * xhat.at(i, j);
                      }
                      mean_dxh /= static_cast<T>(n);
                      mean_dxh_xh /= static_cast<T>(n);
                      for (std::size_t j = 0; j < n; ++j) {
                        const T dxh = nd.grad.at(i, j) * g.data[j];
                        gx.at(i, j) += inv_std[i] * (dxh - mean_dxh - xhat.at(i, j) * mean_dxh_xh);
                      }
                    }
                  }
                });
  }

  // Multi-head scaled dot-product attention over already-projected q/k/v.
  // q: Lq x d, k/v: Lk x d with d divisible by n_heads. With `causal`,
  // position i attends to positions <= i (requires Lq == Lk).
  Var attention(Var q, Var k, Var v, std::size_t n_heads, bool causal) {
    const Tensor<T>& tq = value(q);
    const Tensor<T>& tk = value(k);
    const Tensor<T>& tv = value(v);
    const std::size_t lq = tq.rows, lk = tk.rows, d = tq.cols;
    const std::size_t dh = d / n_heads;
    const T scale = static_cast<T>(1.0 / std::sqrt(static_cast<double>(dh)));

    Tensor<T> probs(n_heads * lq, lk);
    Tensor<T> out(lq, d);
    for (std::size_t h = 0; h < n_heads; ++h) {
      auto qh = emap(tq).middleCols(static_cast<Eigen::Index>(h * dh), static_cast<Eigen::Index>(dh));
      auto kh = emap(tk).middleCols(static_cast<Eigen::Index>(h * dh), static_cast<Eigen::Index>(dh));
      auto vh = emap(tv).middleCols(static_cast<Eigen::Index>(h * dh), static_cast<Eigen::Index>(dh));
      auto ph = emap(probs).middleRows(static_cast<Eigen::Index>(h * lq), static_cast<Eigen::Index>(lq));
      ph.noalias() = qh * kh.transpose() * scale;
      for (std::size_t i = 0; i < lq; ++i) {
        const std::size_t limit = causal ? std::min(i + 1, lk) : lk;
        T mx = -std::numeric_limits<T>::infinity();
        for (std::size_t j = 0; j < limit; ++j) mx = std::max(mx, ph(i, j));
        T sum = T(0);
        for (std::size_t j = 0; j < limit; ++j) {
          const T e = std::exp(ph(i, j) - mx);
          ph(i, j) = e;
          sum += e;
        }
        for (std::size_t j = 0; j < limit; ++j) ph(i, j) /= sum;
        for (std::size_t j = limit; j < lk; ++j) ph(i, j) = T(0);
      }
      emap(out)
          .middleCols(static_cast<Eigen::Index>(h * dh), static_cast<Eigen::Index>(dh))
          .noalias() = ph * vh;
    }
    return make(std::move(out), {q, k, v},
                [this, q, k, v, n_heads, dh, scale, probs = std::move(probs)](Node& nd) {
                  const std::size_t lq = nd.value.rows;
                  const std::size_t lk = value(k).rows;
                  EMat<T> dp(static_cast<Eigen::Index>(lq), static_cast<Eigen::Index>(lk));
                  EMat<T> ds(static_cast<Eigen::Index>(lq), static_cast<Eigen::Index>(lk));
                  for (std::size_t h = 0; h < n_heads; ++h) {
                    auto qh = emap(value(q)).middleCols(static_cast<Eigen::Index>(h * dh),
                                                        static_cast<Eigen::Index>(dh));
                    auto kh = emap(value(k)).middleCols(static_cast<Eigen::Index>(h * dh),
                                                        static_cast<Eigen::Index>(dh));
                    auto vh = emap(value(v)).middleCols(static_cast<Eigen::Index>(h * dh),
                                                        static_cast<Eigen::Index>(dh));
                    auto ph = emap(probs).middleRows(static_cast<Eigen::Index>(h * lq),
                                                     static_cast<Eigen::Index>(lq));
                    auto dctx = emap(nd.grad).middleCols(static_cast<Eigen::Index>(h * dh),
                                                         static_cast<Eigen::Index>(dh));
                    dp.noalias() = dctx * vh.transpose();
                    // softmax backward: ds = p .* (dp - rowsum(dp .* p))
                    for (std::size_t i = 0; i < lq; ++i) {
                      T acc = T(0);
                      for (std::size_t j = 0; j < lk; ++j) acc += dp(i, j) * ph(i, j);
                      for (std::size_t j = 0; j < lk; ++j) ds(i, j) = ph(i, j) * (dp(i, j) - acc);
                    }
                    if (wants(v)) {
                      emap(grad_ref(v))
                          .middleCols(static_cast<Eigen::Index>(h * dh), static_cast<Eigen::Index>(dh))
                          .noalias() += ph.transpose() * dctx;
                    }
                    if (wants(q)) {
                      emap(grad_ref(q))
                          .middleCols(static_cast<Eigen::Index>(h * dh), static_cast<Eigen::Index>(dh))
                          .noalias() += ds * kh * scale;
                    }
                    if (wants(k)) {
                      emap(grad_ref(k))
                          .middleCols(static_cast<Eigen::Index>(h * dh), static_cast<Eigen::Index>(dh))
                          .noalias() += ds.transpose() * qh * scale;
                    }
                  }
                });
  }

  // Arithmetic mean over rows -> 1 x n.
  Var mean_rows(Var a) {
    const Tensor<T>& in = value(a);
    Tensor<T> out(1, in.cols);
    emap(out).row(0) = emap(in).colwise().mean();
    return make(std::move(out), {a}, [this, a](Node& n) {
      if (!wants(a)) return;
      const T inv = T(1) / static_cast<T>(value(a).rows);
      emap(grad_ref(a)).rowwise() += emap(n.grad).row(0) * inv;
    });
  }

  // Gather rows of an embedding table.
  Var embed_rows(Var table, std::vector<int> ids) {
    const Tensor<T>& tab = value(table);
    Tensor<T> out(ids.size(), tab.cols);
    for (std::size_t i = 0; i < ids.size(); ++i) {
      emap(out).row(static_cast<Eigen::Index>(i)) = emap(tab).row(ids[i]);
    }
    return make(std::move(out), {table}, [this, table, ids = std::move(ids)](Node& n) {
      if (!wants(table)) return;
      Tensor<T>& gt = grad_ref(table);
      for (std::size_t i = 0; i < ids.size(); ++i) {
        emap(gt).row(ids[i]) += emap(n.grad).row(static_cast<Eigen::Index>(i));
      }
    });
  }

  Var vstack(Var a, Var b) {
    const Tensor<T>& ta = value(a);
    const Tensor<T>& tb = value(b);
    Tensor<T> out(ta.rows + tb.rows, ta.cols);
    emap(out).topRows(static_cast<Eigen::Index>(ta.rows)) = emap(ta);
    emap(out).bottomRows(static_cast<Eigen::Index>(tb.rows)) = emap(tb);
    return make(std::move(out), {a, b}, [this, a, b](Node& n) {
      const std::size_t ra = value(a).rows;
      const std::size_t rb = value(b).rows;
      if (wants(a)) emap(grad_ref(a)) += emap(n.grad).topRows(static_cast<Eigen::Index>(ra));
      if (wants(b)) emap(grad_ref(b)) += emap(n.grad).bottomRows(static_cast<Eigen::Index>(rb));
    });
  }

  // Per-row categorical cross entropy of logits (m x V) against target ids;
  // returns m x 1 losses.
  Var softmax_ce_rows(Var logits, std::vector<int> targets) {
    const Tensor<T>& in = value(logits);
    const std::size_t m = in.rows, vsz = in.cols;
    Tensor<T> probs(m, vsz);
    Tensor<T> out(m, 1);
    for (std::size_t i = 0; i < m; ++i) {
      const T* row = in.data.data() + i * vsz;
      T mx = row[0];
      for (std::size_t j = 1; j < vsz; ++j) mx = std::max(mx, row[j]);
      T sum = T(0);
      for (std::size_t j = 0; j < vsz; ++j) {
        const T e = std::exp(row[j] - mx);
        probs.at(i, j) = e;
        sum += e;
      }
      for (std::size_t j = 0; j < vsz; ++j) probs.at(i, j) /= sum;
      out.at(i, 0) = std::log(sum) + mx - row[static_cast<std::size_t>(targets[i])];
    }
    return make(std::move(out), {logits},
                [this, logits, targets = std::move(targets), probs = std::move(probs)](Node& n) {
                  if (!wants(logits)) return;
                  Tensor<T>& gl = grad_ref(logits);
                  const std::size_t m = probs.rows, vsz = probs.cols;
                  for (std::size_t i = 0; i < m; ++i) {
                    const T gi = n.grad.at(i, 0);
                    for (std::size_t j = 0; j < vsz; ++j) gl.at(i, j) += gi * probs.at(i, j);
                    gl.at(i, static_cast<std::size_t>(targets[i])) -= gi;
                  }
                });
  }

  // Numerically stable binary cross entropy with (already smoothed) targets;
  // logits m x 1 -> losses m x 1.
  Var bce_rows(Var logits, std::vector<T> targets) {
    const Tensor<T>& in = value(logits);
    const std::size_t m = in.rows;
    Tensor<T> out(m, 1);
    for (std::size_t i = 0; i < m; ++i) {
      const T x = in.at(i, 0);
      const T y = targets[i];
      out.at(i, 0) = std::max(x, T(0)) - x * y + std::log1p(std::exp(-std::abs(x)));
    }
    return make(std::move(out), {logits}, [this, logits, targets = std::move(targets)](Node& n) {
      if (!wants(logits)) return;
      Tensor<T>& gl = grad_ref(logits);
      const Tensor<T>& in = value(logits);
      for (std::size_t i = 0; i < in.rows; ++i) {
        const T x = in.at(i, 0);
        const T sig = T(1) / (T(1) + std::exp(-x));
        gl.at(i, 0) += n.grad.at(i, 0) * (sig - targets[i]);
      }
    });
  }

  // Mean of all entries -> 1 x 1.
  Var mean_all(Var a) {
    const Tensor<T>& in = value(a);
    Tensor<T> out(1, 1);
    T acc = T(0);
    for (const T& x : in.data) acc += x;
    out.at(0, 0) = acc / static_cast<T>(in.size());
    return make(std::move(out), {a}, [this, a](Node& n) {
      if (!wants(a)) return;
      Tensor<T>& ga = grad_ref(a);
      const T g = n.grad.at(0, 0) / static_cast<T>(ga.size());
      for (T& x : ga.data) x += g;
    });
  }

  // Reverse sweep from a scalar loss.
  void backward(Var loss) {
    Node& ln = nodes_[static_cast<std::size_t>(loss.id)];
    if (ln.value.size() != 1) throw NumericError("backward: loss must be scalar");
    ensure_grad(ln);
    ln.grad.at(0, 0) = T(1);
    for (std::size_t i = nodes_.size(); i-- > 0;) {
      Node& n = nodes_[i];
      if (n.backward && n.needs_grad && n.grad.size() > 0) n.backward(n);
    }
  }

  std::size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    Tensor<T> value;
    Tensor<T> grad;
    bool needs_grad = false;
    std::function<void(Node&)> backward;
  };

  bool wants(Var v) const { return nodes_[static_cast<std::size_t>(v.id)].needs_grad; }

  Tensor<T>& grad_ref(Var v) {
    Node& n = nodes_[static_cast<std::size_t>(v.id)];
    ensure_grad(n);
    return n.grad;
  }

  void ensure_grad(Node& n) {
    if (n.grad.size() != n.value.size()) {
      n.grad = Tensor<T>(n.value.rows, n.value.cols, T(0));
    }
  }

  Var make(Tensor<T> value, std::initializer_list<Var> parents, std::function<void(Node&)> bwd) {
    Node n;
    n.value = std::move(value);
    for (Var p : parents) {
      if (nodes_[static_cast<std::size_t>(p.id)].needs_grad) {
        n.needs_grad = true;
        break;
      }
    }
    if (n.needs_grad) n.backward = std::move(bwd);
    nodes_.push_back(std::move(n));
    return {static_cast<std::int32_t>(nodes_.size() - 1)};
  }

  std::vector<Node> nodes_;
};

// ---- named parameter sets -------------------------------------------------------

template <class T>
struct ParamSet {
  std::vector<std::pair<std::string, Tensor<T>>> items;

  Tensor<T>& add(const std::string& name, Tensor<T> t) {
    items.emplace_back(name, std::move(t));
    return items.back().second;
  }

  Tensor<T>* find(const std::string& name) {
    for (auto& [n, t] : items) {
      if (n == name) return &t;
    }
    return nullptr;
  }

  const Tensor<T>* find(const std::string& name) const {
    for (const auto& [n, t] : items) {
      if (n == name) return &t;
    }
    return nullptr;
  }

  Tensor<T>& get(const std::string& name) {
    Tensor<T>* t = find(name);
    if (!t) throw FormatError("missing parameter tensor '" + name + "'");
    return *t;
  }

  const Tensor<T>& get(const std::string& name) const {
    const Tensor<T>* t = find(name);
    if (!t) throw FormatError("missing parameter tensor '" + name + "'");
    return *t;
  }

  std::size_t total_size() const {
    std::size_t n = 0;
    for (const auto& [name, t] : items) n += t.size();
    return n;
  }
};

template <class A, class B>
ParamSet<B> cast_params(const ParamSet<A>& in) {
  ParamSet<B> out;
  for (const auto& [name, t] : in.items) {
    Tensor<B> c(t.rows, t.cols);
    for (std::size_t i = 0; i < t.data.size(); ++i) c.data[i] = static_cast<B>(t.data[i]);
    out.add(name, std::move(c));
  }
  return out;
}

// Parameters bound into one graph; grads are read back per name after
// backward().
template <class T>
struct BoundParams {
  std::vector<std::pair<std::string, Var>> vars;

  Var get(const std::string& name) const {
    for (const auto& [n, v] : vars) {
      if (n == name) return v;
    }
    throw FormatError("parameter '" + name + "' not bound in graph");
  }
};

template <class T>
BoundParams<T> bind_params(Graph<T>& g, const ParamSet<T>& params, bool trainable = true) {
  BoundParams<T> bound;
  for (const auto& [name, t] : params.items) {
    bound.vars.emplace_back(name, g.leaf(t, /*needs_grad=*/trainable));
  }
  return bound;
}

// Throws NumericError naming the first parameter with a non-finite gradient.
template <class T>
void check_finite_grads(Graph<T>& g, const BoundParams<T>& bound) {
  for (const auto& [name, var] : bound.vars) {
    const Tensor<T>& gr = g.grad(var);
    for (const T& x : gr.data) {
      if (!std::isfinite(static_cast<double>(x))) {
        throw NumericError("non-finite gradient in parameter '" + name + "'");
      }
    }
  }
}

}  // namespace specfm::nn
