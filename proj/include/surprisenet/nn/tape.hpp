#pragma once

#include <cmath>
#include <functional>
#include <memory>
#include <random>
#include <string>
#include <vector>

#include "surprisenet/nn/tensor.hpp"

namespace surprisenet::nn {

template <typename T>
struct Parameter {
  std::string name;
  Tensor<T> value;
};

/// Flat, ordered parameter store. Indices are stable for the life of the set.
template <typename T>
class ParameterSet {
 public:
  int add(std::string name, Tensor<T> value) {
    params_.push_back({std::move(name), std::move(value)});
    return static_cast<int>(params_.size()) - 1;
  }
  int size() const { return static_cast<int>(params_.size()); }
  Parameter<T>& operator[](int i) { return params_[static_cast<std::size_t>(i)]; }
  const Parameter<T>& operator[](int i) const { return params_[static_cast<std::size_t>(i)]; }
  auto begin() { return params_.begin(); }
  auto end() { return params_.end(); }
  auto begin() const { return params_.begin(); }
  auto end() const { return params_.end(); }

  std::size_t total_size() const {
    std::size_t n = 0;
    for (const auto& p : params_) n += p.value.size();
    return n;
  }

  /// Zero-filled gradient buffers with the parameters' shapes.
  std::vector<Tensor<T>> zero_grads() const {
    std::vector<Tensor<T>> g;
    g.reserve(params_.size());
    for (const auto& p : params_) g.emplace_back(p.value.shape());
    return g;
  }

  template <typename U>
  ParameterSet<U> cast() const {
    ParameterSet<U> out;
    for (const auto& p : params_) out.add(p.name, p.value.template cast<U>());
    return out;
  }

 private:
  std::vector<Parameter<T>> params_;
};

class GraphError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

struct Var {
  int id = -1;
  bool valid() const { return id >= 0; }
};

/// Records forward operations and replays their adjoints in reverse.
///
/// Parameter leaves read from a ParameterSet and accumulate gradients into an
/// external buffer list, so several tapes may share one parameter set.
template <typename T>
class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var constant(Tensor<T> value) { return push(std::move(value), -1); }

  Var param(const ParameterSet<T>& params, int index) {
    params_ = &params;
    return push(params[index].value, index);
  }

  const Tensor<T>& value(Var v) const { return node(v).value; }
  const Tensor<T>& grad(Var v) const { return node(v).grad; }
  std::size_t node_count() const { return nodes_.size(); }

  // ---- operations -------------------------------------------------------

  Var linear(Var x, Var w, Var b) {
    const auto& X = value(x);
    const auto& W = value(w);
    const auto& B = value(b);
    if (W.shape().size() != 2 || X.cols() != W.cols() || static_cast<int>(B.size()) != W.rows()) {
      throw ShapeError("linear: input " + shape_str(X.shape()) + " weight " + shape_str(W.shape()));
    }
    const int rows = X.rows();
    const int in = W.cols();
    const int out = W.rows();
    Tensor<T> Y = Tensor<T>::matrix(rows, out);
    affine_rows(X.data(), rows, in, W.data(), B.data(), out, Y.data());
    Var y = push(std::move(Y), -1);
    record([this, x, w, b, y, rows, in, out] {
      const auto& dY = nodes_[y.id]->grad;
      const auto& Xv = nodes_[x.id]->value;
      const auto& Wv = nodes_[w.id]->value;
      auto& dX = grad_of(x);
      auto& dW = grad_of(w);
      auto& dB = grad_of(b);
      for (int r = 0; r < rows; ++r) {
        const T* dy = dY.row(r);
        const T* xr = Xv.row(r);
        T* dx = dX.row(r);
        for (int o = 0; o < out; ++o) {
          const T g = dy[o];
          if (g == T(0)) continue;
          dB[static_cast<std::size_t>(o)] += g;
          const T* wo = Wv.row(o);
          T* dwo = dW.row(o);
          for (int i = 0; i < in; ++i) {
            dx[i] += g * wo[i];
            dwo[i] += g * xr[i];
          }
        }
      }
    });
    return y;
  }

  /// One direction of a gated recurrent layer over the rows of x.
  /// wx: 3H x in, wh: 3H x H, bx/bh: 3H; gate order (reset, update, candidate).
  Var gru(Var x, Var wx, Var wh, Var bx, Var bh, bool reverse) {
    const auto& X = value(x);
    const auto& Wx = value(wx);
    const auto& Wh = value(wh);
    const int H = Wh.cols();
    const int in = Wx.cols();
    const int steps = X.rows();
    if (Wx.rows() != 3 * H || Wh.rows() != 3 * H || X.cols() != in || static_cast<int>(value(bx).size()) != 3 * H ||
        static_cast<int>(value(bh).size()) != 3 * H) {
      throw ShapeError("gru: input " + shape_str(X.shape()) + " Wx " + shape_str(Wx.shape()) + " Wh " +
                       shape_str(Wh.shape()));
    }
    auto cache = std::make_shared<GruCache>();
    cache->gx = Tensor<T>::matrix(steps, 3 * H);
    affine_rows(X.data(), steps, in, Wx.data(), value(bx).data(), 3 * H, cache->gx.data());
    cache->hprev = Tensor<T>::matrix(steps, H);
    cache->r = Tensor<T>::matrix(steps, H);
    cache->u = Tensor<T>::matrix(steps, H);
    cache->n = Tensor<T>::matrix(steps, H);
    cache->an = Tensor<T>::matrix(steps, H);
    Tensor<T> Hout = Tensor<T>::matrix(steps, H);
    std::vector<T> h(static_cast<std::size_t>(H), T(0));
    std::vector<T> gh(static_cast<std::size_t>(3 * H));
    for (int s = 0; s < steps; ++s) {
      const int t = reverse ? steps - 1 - s : s;
      std::copy(h.begin(), h.end(), cache->hprev.row(t));
      affine_rows(h.data(), 1, H, Wh.data(), value(bh).data(), 3 * H, gh.data());
      const T* gx = cache->gx.row(t);
      for (int k = 0; k < H; ++k) {
        const T r = sigmoid(gx[k] + gh[static_cast<std::size_t>(k)]);
        const T u = sigmoid(gx[H + k] + gh[static_cast<std::size_t>(H + k)]);
        const T an = gh[static_cast<std::size_t>(2 * H + k)];
        const T n = std::tanh(gx[2 * H + k] + r * an);
        cache->r(t, k) = r;
        cache->u(t, k) = u;
        cache->n(t, k) = n;
        cache->an(t, k) = an;
        h[static_cast<std::size_t>(k)] = (T(1) - u) * n + u * h[static_cast<std::size_t>(k)];
      }
      std::copy(h.begin(), h.end(), Hout.row(t));
    }
    Var y = push(std::move(Hout), -1);
    record([this, x, wx, wh, bx, bh, y, cache, reverse, H, in, steps] {
      const auto& dY = nodes_[y.id]->grad;
      const auto& Xv = nodes_[x.id]->value;
      const auto& Wxv = nodes_[wx.id]->value;
      const auto& Whv = nodes_[wh.id]->value;
      auto& dX = grad_of(x);
      auto& dWx = grad_of(wx);
      auto& dWh = grad_of(wh);
      auto& dBx = grad_of(bx);
      auto& dBh = grad_of(bh);
      std::vector<T> dh_next(static_cast<std::size_t>(H), T(0));
      std::vector<T> gxs(static_cast<std::size_t>(3 * H));
      std::vector<T> ghs(static_cast<std::size_t>(3 * H));
      for (int s = steps - 1; s >= 0; --s) {
        const int t = reverse ? steps - 1 - s : s;
        const T* hp = cache->hprev.row(t);
        std::vector<T> dh_prev(static_cast<std::size_t>(H), T(0));
        for (int k = 0; k < H; ++k) {
          const T dh = dY(t, k) + dh_next[static_cast<std::size_t>(k)];
          const T r = cache->r(t, k);
          const T u = cache->u(t, k);
          const T n = cache->n(t, k);
          const T an = cache->an(t, k);
          const T dn = dh * (T(1) - u);
          const T du = dh * (hp[k] - n);
          dh_prev[static_cast<std::size_t>(k)] = dh * u;
          const T dn_pre = dn * (T(1) - n * n);
          const T dr_pre = dn_pre * an * r * (T(1) - r);
          const T du_pre = du * u * (T(1) - u);
          gxs[static_cast<std::size_t>(k)] = dr_pre;
          gxs[static_cast<std::size_t>(H + k)] = du_pre;
          gxs[static_cast<std::size_t>(2 * H + k)] = dn_pre;
          ghs[static_cast<std::size_t>(k)] = dr_pre;
          ghs[static_cast<std::size_t>(H + k)] = du_pre;
          ghs[static_cast<std::size_t>(2 * H + k)] = dn_pre * r;
        }
        const T* xr = Xv.row(t);
        T* dx = dX.row(t);
        for (int g = 0; g < 3 * H; ++g) {
          const T a = gxs[static_cast<std::size_t>(g)];
          const T b = ghs[static_cast<std::size_t>(g)];
          dBx[static_cast<std::size_t>(g)] += a;
          dBh[static_cast<std::size_t>(g)] += b;
          if (a != T(0)) {
            const T* w = Wxv.row(g);
            T* dw = dWx.row(g);
            for (int i = 0; i < in; ++i) {
              dx[i] += a * w[i];
              dw[i] += a * xr[i];
            }
          }
          if (b != T(0)) {
            const T* w = Whv.row(g);
            T* dw = dWh.row(g);
            for (int k = 0; k < H; ++k) {
              dh_prev[static_cast<std::size_t>(k)] += b * w[k];
              dw[k] += b * hp[k];
            }
          }
        }
        dh_next.swap(dh_prev);
      }
    });
    return y;
  }

  /// Column-wise concatenation of equal-row matrices.
  Var concat_cols(const std::vector<Var>& parts) {
    if (parts.empty()) throw ShapeError("concat_cols: no inputs");
    const int rows = value(parts.front()).rows();
    std::vector<int> widths;
    int total = 0;
    for (Var p : parts) {
      if (value(p).rows() != rows) throw ShapeError("concat_cols: row count mismatch");
      widths.push_back(value(p).cols());
      total += widths.back();
    }
    Tensor<T> Y = Tensor<T>::matrix(rows, total);
    int offset = 0;
    for (std::size_t i = 0; i < parts.size(); ++i) {
      const auto& P = value(parts[i]);
      for (int r = 0; r < rows; ++r) std::copy(P.row(r), P.row(r) + widths[i], Y.row(r) + offset);
      offset += widths[i];
    }
    Var y = push(std::move(Y), -1);
    record([this, parts, widths, rows, y] {
      const auto& dY = nodes_[y.id]->grad;
      int off = 0;
      for (std::size_t i = 0; i < parts.size(); ++i) {
        auto& dP = grad_of(parts[i]);
        for (int r = 0; r < rows; ++r) {
          const T* src = dY.row(r) + off;
          T* dst = dP.row(r);
          for (int c = 0; c < widths[i]; ++c) dst[c] += src[c];
        }
        off += widths[i];
      }
    });
    return y;
  }

  /// Inverted dropout: zeroes with probability `rate`, scales survivors by 1/(1-rate).
  Var dropout(Var x, double rate, std::mt19937_64& rng) {
    if (rate <= 0.0) return x;
    if (rate >= 1.0) throw std::invalid_argument("dropout rate must be < 1");
    const auto& X = value(x);
    auto mask = std::make_shared<std::vector<T>>(X.size());
    std::bernoulli_distribution keep(1.0 - rate);
    const T scale = static_cast<T>(1.0 / (1.0 - rate));
    Tensor<T> Y(X.shape());
    for (std::size_t i = 0; i < X.size(); ++i) {
      (*mask)[i] = keep(rng) ? scale : T(0);
      Y[i] = X[i] * (*mask)[i];
    }
    Var y = push(std::move(Y), -1);
    record([this, x, y, mask] {
      const auto& dY = nodes_[y.id]->grad;
      auto& dX = grad_of(x);
      for (std::size_t i = 0; i < dY.size(); ++i) dX[i] += dY[i] * (*mask)[i];
    });
    return y;
  }

  /// z = mu + exp(log_var / 2) * eps, with eps held constant.
  Var reparameterize(Var mu, Var log_var, const Tensor<T>& eps) {
    const auto& M = value(mu);
    const auto& L = value(log_var);
    if (!M.same_shape(L) || !M.same_shape(eps)) throw ShapeError("reparameterize: shape mismatch");
    Tensor<T> Z(M.shape());
    for (std::size_t i = 0; i < Z.size(); ++i) Z[i] = M[i] + std::exp(L[i] / T(2)) * eps[i];
    Var z = push(std::move(Z), -1);
    record([this, mu, log_var, z, eps] {
      const auto& dZ = nodes_[z.id]->grad;
      const auto& Lv = nodes_[log_var.id]->value;
      auto& dM = grad_of(mu);
      auto& dL = grad_of(log_var);
      for (std::size_t i = 0; i < dZ.size(); ++i) {
        dM[i] += dZ[i];
        dL[i] += dZ[i] * T(0.5) * std::exp(Lv[i] / T(2)) * eps[i];
      }
    });
    return z;
  }

  /// scale * sum_t w[y_t] * (-log softmax(logits_t)[y_t]).
  Var softmax_cross_entropy(Var logits, const std::vector<int>& targets, const std::vector<T>* class_weights,
                            T scale) {
    const auto& Lg = value(logits);
    const int rows = Lg.rows();
    const int classes = Lg.cols();
    if (static_cast<int>(targets.size()) != rows) throw ShapeError("cross entropy: target count mismatch");
    if (class_weights && static_cast<int>(class_weights->size()) != classes) {
      throw ShapeError("cross entropy: class weight count mismatch");
    }
    auto probs = std::make_shared<Tensor<T>>(Lg.shape());
    T total = 0;
    for (int r = 0; r < rows; ++r) {
      const int y = targets[static_cast<std::size_t>(r)];
      if (y < 0 || y >= classes) throw std::out_of_range("cross entropy: target outside class range");
      const T* l = Lg.row(r);
      T mx = l[0];
      for (int c = 1; c < classes; ++c) mx = std::max(mx, l[c]);
      T sum = 0;
      for (int c = 0; c < classes; ++c) sum += std::exp(l[c] - mx);
      const T lse = mx + std::log(sum);
      for (int c = 0; c < classes; ++c) (*probs)(r, c) = std::exp(l[c] - lse);
      const T w = class_weights ? (*class_weights)[static_cast<std::size_t>(y)] : T(1);
      total += w * (lse - l[y]);
    }
    Var out = push(Tensor<T>({1}, total * scale), -1);
    std::vector<T> weights = class_weights ? *class_weights : std::vector<T>();
    record([this, logits, targets, weights, probs, out, rows, classes, scale] {
      const T g = nodes_[out.id]->grad[0] * scale;
      auto& dL = grad_of(logits);
      for (int r = 0; r < rows; ++r) {
        const int y = targets[static_cast<std::size_t>(r)];
        const T w = weights.empty() ? T(1) : weights[static_cast<std::size_t>(y)];
        T* d = dL.row(r);
        for (int c = 0; c < classes; ++c) d[c] += g * w * ((*probs)(r, c) - (c == y ? T(1) : T(0)));
      }
    });
    return out;
  }

  /// scale * sum 0.5 * (exp(lv) + mu^2 - 1 - lv): KL to a standard normal.
  Var gaussian_kl(Var mu, Var log_var, T scale) {
    const auto& M = value(mu);
    const auto& L = value(log_var);
    if (!M.same_shape(L)) throw ShapeError("kl: shape mismatch");
    T total = 0;
    // expm1 keeps the near-prior terms from cancelling below zero
    for (std::size_t i = 0; i < M.size(); ++i) total += T(0.5) * ((std::expm1(L[i]) - L[i]) + M[i] * M[i]);
    Var out = push(Tensor<T>({1}, total * scale), -1);
    record([this, mu, log_var, out, scale] {
      const T g = nodes_[out.id]->grad[0] * scale;
      const auto& Mv = nodes_[mu.id]->value;
      const auto& Lv = nodes_[log_var.id]->value;
      auto& dM = grad_of(mu);
      auto& dL = grad_of(log_var);
      for (std::size_t i = 0; i < Mv.size(); ++i) {
        dM[i] += g * Mv[i];
        dL[i] += g * T(0.5) * std::expm1(Lv[i]);
      }
    });
    return out;
  }

  /// Sum of all elements, as a scalar.
  Var sum(Var x) {
    const auto& X = value(x);
    T total = 0;
    for (std::size_t i = 0; i < X.size(); ++i) total += X[i];
    Var out = push(Tensor<T>({1}, total), -1);
    record([this, x, out] {
      const T g = nodes_[out.id]->grad[0];
      auto& dX = grad_of(x);
      for (std::size_t i = 0; i < dX.size(); ++i) dX[i] += g;
    });
    return out;
  }

  /// sum_i coeffs[i] * terms[i] over same-shaped inputs.
  Var weighted_sum(const std::vector<Var>& terms, const std::vector<T>& coeffs) {
    if (terms.empty() || terms.size() != coeffs.size()) throw ShapeError("weighted_sum: bad arguments");
    Tensor<T> Y(value(terms.front()).shape());
    for (std::size_t k = 0; k < terms.size(); ++k) {
      const auto& X = value(terms[k]);
      if (!X.same_shape(Y)) throw ShapeError("weighted_sum: shape mismatch");
      for (std::size_t i = 0; i < Y.size(); ++i) Y[i] += coeffs[k] * X[i];
    }
    Var out = push(std::move(Y), -1);
    record([this, terms, coeffs, out] {
      const auto& dY = nodes_[out.id]->grad;
      for (std::size_t k = 0; k < terms.size(); ++k) {
        auto& dX = grad_of(terms[k]);
        for (std::size_t i = 0; i < dY.size(); ++i) dX[i] += coeffs[k] * dY[i];
      }
    });
    return out;
  }

  /// Propagates d(loss)/d(node) back to every recorded node and adds the
  /// parameter-leaf gradients into `param_grads` (indexed like the ParameterSet).
  void backward(Var loss, std::vector<Tensor<T>>& param_grads) {
    if (nodes_.empty() || !loss.valid() || loss.id >= static_cast<int>(nodes_.size())) {
      throw GraphError("backward called before any forward computation");
    }
    if (value(loss).size() != 1) throw GraphError("backward needs a scalar loss");
    if (backward_done_) throw GraphError("backward already run on this tape");
    backward_done_ = true;
    grad_of(loss)[0] = T(1);
    for (auto it = backward_fns_.rbegin(); it != backward_fns_.rend(); ++it) {
      if (it->output <= loss.id && nodes_[static_cast<std::size_t>(it->output)]->has_grad) it->fn();
    }
    for (const auto& n : nodes_) {
      if (n->param_index < 0 || !n->has_grad) continue;
      auto& g = param_grads.at(static_cast<std::size_t>(n->param_index));
      if (!g.same_shape(n->grad)) throw ShapeError("parameter gradient buffer has the wrong shape");
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += n->grad[i];
    }
  }

 private:
  struct Node {
    Tensor<T> value;
    Tensor<T> grad;
    int param_index = -1;
    bool has_grad = false;
  };

  struct Backward {
    int output;
    std::function<void()> fn;
  };

  struct GruCache {
    Tensor<T> gx, hprev, r, u, n, an;
  };

  static T sigmoid(T v) { return T(1) / (T(1) + std::exp(-v)); }

  Var push(Tensor<T> value, int param_index) {
    auto n = std::make_unique<Node>();
    n->value = std::move(value);
    n->param_index = param_index;
    nodes_.push_back(std::move(n));
    return Var{static_cast<int>(nodes_.size()) - 1};
  }

  const Node& node(Var v) const {
    if (!v.valid() || v.id >= static_cast<int>(nodes_.size())) throw GraphError("invalid variable");
    return *nodes_[static_cast<std::size_t>(v.id)];
  }

  Tensor<T>& grad_of(Var v) {
    Node& n = *nodes_[static_cast<std::size_t>(v.id)];
    if (!n.has_grad) {
      n.grad = Tensor<T>(n.value.shape());
      n.has_grad = true;
    }
    return n.grad;
  }

  void record(std::function<void()> fn) {
    backward_fns_.push_back({static_cast<int>(nodes_.size()) - 1, std::move(fn)});
  }

  std::vector<std::unique_ptr<Node>> nodes_;
  std::vector<Backward> backward_fns_;
  const ParameterSet<T>* params_ = nullptr;
  bool backward_done_ = false;
};

}  // namespace surprisenet::nn
