#pragma once

#include <cstddef>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

namespace surprisenet::nn {

class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

inline std::string shape_str(const std::vector<int>& shape) {
  std::string s = "[";
  for (std::size_t i = 0; i < shape.size(); ++i) s += (i ? "," : "") + std::to_string(shape[i]);
  return s + "]";
}

/// Dense row-major tensor. Training uses float; gradient checks use double.
template <typename T>
class Tensor {
 public:
  using value_type = T;

  Tensor() = default;
  explicit Tensor(std::vector<int> shape, T fill = T(0)) : shape_(std::move(shape)) {
    for (int d : shape_) {
      if (d < 0) throw ShapeError("negative dimension in " + shape_str(shape_));
    }
    data_.assign(numel(shape_), fill);
  }
  Tensor(std::vector<int> shape, std::vector<T> data) : shape_(std::move(shape)), data_(std::move(data)) {
    if (data_.size() != numel(shape_)) throw ShapeError("data size does not match shape " + shape_str(shape_));
  }

  static Tensor matrix(int rows, int cols, T fill = T(0)) { return Tensor({rows, cols}, fill); }

  const std::vector<int>& shape() const { return shape_; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }
  int rows() const { return shape_.empty() ? 1 : shape_[0]; }
  int cols() const { return shape_.size() < 2 ? 1 : shape_[1]; }

  T* data() { return data_.data(); }
  const T* data() const { return data_.data(); }
  std::vector<T>& values() { return data_; }
  const std::vector<T>& values() const { return data_; }

  T& operator[](std::size_t i) { return data_[i]; }
  const T& operator[](std::size_t i) const { return data_[i]; }
  T& operator()(int r, int c) { return data_[static_cast<std::size_t>(r) * static_cast<std::size_t>(cols()) + static_cast<std::size_t>(c)]; }
  const T& operator()(int r, int c) const {
    return data_[static_cast<std::size_t>(r) * static_cast<std::size_t>(cols()) + static_cast<std::size_t>(c)];
  }
  T* row(int r) { return data_.data() + static_cast<std::size_t>(r) * static_cast<std::size_t>(cols()); }
  const T* row(int r) const { return data_.data() + static_cast<std::size_t>(r) * static_cast<std::size_t>(cols()); }

  void fill(T v) { std::fill(data_.begin(), data_.end(), v); }
  bool same_shape(const Tensor& o) const { return shape_ == o.shape_; }

  template <typename U>
  Tensor<U> cast() const {
    return Tensor<U>(shape_, std::vector<U>(data_.begin(), data_.end()));
  }

  bool operator==(const Tensor&) const = default;

 private:
  static std::size_t numel(const std::vector<int>& shape) {
    return std::accumulate(shape.begin(), shape.end(), std::size_t{1},
                           [](std::size_t a, int d) { return a * static_cast<std::size_t>(d); });
  }

  std::vector<int> shape_;
  std::vector<T> data_;
};

// Y[r] = X[r] * W^T + b, with X: R x in, W: out x in, b: out.
template <typename T>
void affine_rows(const T* x, int rows, int in, const T* w, const T* b, int out, T* y) {
  for (int r = 0; r < rows; ++r) {
    const T* xr = x + static_cast<std::size_t>(r) * in;
    T* yr = y + static_cast<std::size_t>(r) * out;
    for (int o = 0; o < out; ++o) {
      const T* wo = w + static_cast<std::size_t>(o) * in;
      T acc = b ? b[o] : T(0);
      for (int i = 0; i < in; ++i) acc += wo[i] * xr[i];
      yr[o] = acc;
    }
  }
}

}  // namespace surprisenet::nn
