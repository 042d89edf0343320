#pragma once

#include <cmath>
#include <random>
#include <string>

#include "surprisenet/nn/tape.hpp"

namespace surprisenet::nn {

/// Uniform in +-1/sqrt(fan_in) where fan_in is the column count.
template <typename T>
Tensor<T> uniform_init(int rows, int cols, std::mt19937_64& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(cols));
  std::uniform_real_distribution<double> dist(-bound, bound);
  Tensor<T> w = Tensor<T>::matrix(rows, cols);
  for (std::size_t i = 0; i < w.size(); ++i) w[i] = static_cast<T>(dist(rng));
  return w;
}

struct LinearLayer {
  int in = 0;
  int out = 0;
  int weight = -1;  // out x in
  int bias = -1;    // out

  template <typename T>
  static LinearLayer create(ParameterSet<T>& params, const std::string& name, int in, int out,
                            std::mt19937_64& rng) {
    LinearLayer l;
    l.in = in;
    l.out = out;
    l.weight = params.add(name + ".weight", uniform_init<T>(out, in, rng));
    l.bias = params.add(name + ".bias", Tensor<T>({out}));
    return l;
  }

  template <typename T>
  Var forward(Tape<T>& tape, const ParameterSet<T>& params, Var x) const {
    return tape.linear(x, tape.param(params, weight), tape.param(params, bias));
  }
};

/// Bidirectional gated recurrent layer; output is [forward state | backward state].
struct RecurrentLayer {
  struct Direction {
    int wx = -1;  // 3H x in
    int wh = -1;  // 3H x H
    int bx = -1;  // 3H
    int bh = -1;  // 3H
  };

  static constexpr const char* kCellType = "gru";

  int in = 0;
  int hidden = 0;
  Direction fwd;
  Direction bwd;

  int out_dim() const { return 2 * hidden; }

  template <typename T>
  static RecurrentLayer create(ParameterSet<T>& params, const std::string& name, int in, int hidden,
                               std::mt19937_64& rng) {
    RecurrentLayer l;
    l.in = in;
    l.hidden = hidden;
    auto make = [&](const std::string& dir) {
      Direction d;
      d.wx = params.add(name + "." + dir + ".wx", uniform_init<T>(3 * hidden, in, rng));
      d.wh = params.add(name + "." + dir + ".wh", uniform_init<T>(3 * hidden, hidden, rng));
      d.bx = params.add(name + "." + dir + ".bx", Tensor<T>({3 * hidden}));
      d.bh = params.add(name + "." + dir + ".bh", Tensor<T>({3 * hidden}));
      return d;
    };
    l.fwd = make("fwd");
    l.bwd = make("bwd");
    return l;
  }

  template <typename T>
  Var forward(Tape<T>& tape, const ParameterSet<T>& params, Var x) const {
    if (tape.value(x).cols() != in) {
      throw ShapeError("recurrent layer expects " + std::to_string(in) + " input columns, got " +
                       std::to_string(tape.value(x).cols()));
    }
    auto run = [&](const Direction& d, bool reverse) {
      return tape.gru(x, tape.param(params, d.wx), tape.param(params, d.wh), tape.param(params, d.bx),
                      tape.param(params, d.bh), reverse);
    };
    Var f = run(fwd, false);
    Var b = run(bwd, true);
    return tape.concat_cols({f, b});
  }
};

/// Adaptive-moment optimiser over a ParameterSet.
template <typename T>
class Adam {
 public:
  explicit Adam(const ParameterSet<T>& params, double lr = 1e-3, double beta1 = 0.9, double beta2 = 0.999,
                double eps = 1e-8)
      : lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps), m_(params.zero_grads()), v_(params.zero_grads()) {}

  void step(ParameterSet<T>& params, const std::vector<Tensor<T>>& grads) {
    ++t_;
    const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
    for (int p = 0; p < params.size(); ++p) {
      auto& w = params[p].value;
      const auto& g = grads[static_cast<std::size_t>(p)];
      auto& m = m_[static_cast<std::size_t>(p)];
      auto& v = v_[static_cast<std::size_t>(p)];
      for (std::size_t i = 0; i < w.size(); ++i) {
        const double gi = static_cast<double>(g[i]);
        m[i] = static_cast<T>(beta1_ * static_cast<double>(m[i]) + (1.0 - beta1_) * gi);
        v[i] = static_cast<T>(beta2_ * static_cast<double>(v[i]) + (1.0 - beta2_) * gi * gi);
        const double mhat = static_cast<double>(m[i]) / c1;
        const double vhat = static_cast<double>(v[i]) / c2;
        w[i] = static_cast<T>(static_cast<double>(w[i]) - lr_ * mhat / (std::sqrt(vhat) + eps_));
      }
    }
  }

  long steps() const { return t_; }

 private:
  double lr_, beta1_, beta2_, eps_;
  long t_ = 0;
  std::vector<Tensor<T>> m_, v_;
};

}  // namespace surprisenet::nn
