#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <random>
#include <stdexcept>

#include "surprisenet/nn/tape.hpp"

namespace surprisenet::nn {

class NondeterministicClosure : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct GradCheckResult {
  double max_rel_error = 0.0;
  std::size_t coords_checked = 0;
  std::string worst_param;
};

/// Loss closure: evaluates the loss at the current parameter values. When
/// `grads` is non-null it must also accumulate the analytic gradient there.
template <typename T>
using LossClosure = std::function<T(std::vector<Tensor<T>>* grads)>;

/// Relative error |a - n| / max(|a|, |n|, floor). The floor keeps coordinates
/// with vanishing gradients from dividing finite-difference noise by ~0.
inline double relative_error(double analytic, double numeric, double floor) {
  const double denom = std::max({std::abs(analytic), std::abs(numeric), floor});
  return denom == 0.0 ? 0.0 : std::abs(analytic - numeric) / denom;
}

/// Compares analytic gradients against central differences
/// (f(w+eps) - f(w-eps)) / 2eps on a seeded random subsample of coordinates.
template <typename T>
GradCheckResult grad_check(const LossClosure<T>& loss, ParameterSet<T>& params, double eps,
                           std::size_t min_coords = 200, std::uint64_t seed = 1, double floor = 1e-6) {
  GradCheckResult result;
  if (params.total_size() == 0) return result;

  auto grads = params.zero_grads();
  const T base = loss(&grads);
  const T again = loss(nullptr);
  if (base != again) throw NondeterministicClosure("two forward passes of the loss disagree");

  std::vector<std::pair<int, std::size_t>> coords;
  for (int p = 0; p < params.size(); ++p) {
    for (std::size_t i = 0; i < params[p].value.size(); ++i) coords.emplace_back(p, i);
  }
  if (coords.size() > min_coords) {
    std::mt19937_64 rng(seed);
    std::shuffle(coords.begin(), coords.end(), rng);
    coords.resize(min_coords);
  }

  for (auto [p, i] : coords) {
    T& w = params[p].value[i];
    const T saved = w;
    w = static_cast<T>(saved + eps);
    const double plus = static_cast<double>(loss(nullptr));
    w = static_cast<T>(saved - eps);
    const double minus = static_cast<double>(loss(nullptr));
    w = saved;
    const double numeric = (plus - minus) / (2.0 * eps);
    const double analytic = static_cast<double>(grads[static_cast<std::size_t>(p)][i]);
    const double err = relative_error(analytic, numeric, floor);
    if (err > result.max_rel_error) {
      result.max_rel_error = err;
      result.worst_param = params[p].name + "[" + std::to_string(i) + "]";
    }
    ++result.coords_checked;
  }
  return result;
}

}  // namespace surprisenet::nn
