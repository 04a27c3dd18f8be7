#pragma once

#include <cmath>
#include <cstddef>
#include <initializer_list>
#include <sstream>
#include <string>
#include <vector>

#include "oam/errors.hpp"

namespace oam {

// Dense row-major tensor. Carrier for activations, parameters and gradients.
// Storage precision is the template parameter: float for normal operation,
// double for gradient-check mode.
template <typename T>
class Tensor {
 public:
  Tensor() = default;

  static Tensor zeros(std::vector<std::size_t> shape) {
    Tensor t;
    t.shape_ = std::move(shape);
    t.data_.assign(product(t.shape_), T(0));
    return t;
  }

  static Tensor full(std::vector<std::size_t> shape, T value) {
    Tensor t = zeros(std::move(shape));
    for (auto& x : t.data_) x = value;
    return t;
  }

  static Tensor scalar(T value) { return full({1}, value); }

  // 1-D tensor [n].
  static Tensor vec(std::vector<T> values) {
    Tensor t;
    t.shape_ = {values.size()};
    t.data_ = std::move(values);
    return t;
  }

  // Single-row matrix [1 x n].
  static Tensor row(std::vector<T> values) {
    Tensor t;
    t.shape_ = {1, values.size()};
    t.data_ = std::move(values);
    return t;
  }

  static Tensor matrix(std::size_t rows, std::size_t cols, std::vector<T> values) {
    Tensor t;
    t.shape_ = {rows, cols};
    t.data_ = std::move(values);
    if (t.data_.size() != rows * cols)
      throw DimensionError("matrix literal: " + std::to_string(t.data_.size()) +
                           " values for shape " + shape_str({rows, cols}));
    return t;
  }

  static Tensor identity(std::size_t n) {
    Tensor t = zeros({n, n});
    for (std::size_t i = 0; i < n; ++i) t.data_[i * n + i] = T(1);
    return t;
  }

  const std::vector<std::size_t>& shape() const { return shape_; }
  std::size_t rank() const { return shape_.size(); }
  std::size_t numel() const { return data_.size(); }

  std::size_t rows() const {
    require_rank2("rows()");
    return shape_[0];
  }
  std::size_t cols() const {
    require_rank2("cols()");
    return shape_[1];
  }

  T& operator[](std::size_t i) { return data_[i]; }
  const T& operator[](std::size_t i) const { return data_[i]; }

  T& at(std::size_t i, std::size_t j) { return data_[i * shape_[1] + j]; }
  const T& at(std::size_t i, std::size_t j) const { return data_[i * shape_[1] + j]; }

  T* data() { return data_.data(); }
  const T* data() const { return data_.data(); }

  bool same_shape(const Tensor& other) const { return shape_ == other.shape_; }

  bool all_finite() const {
    for (const T& x : data_)
      if (!std::isfinite(static_cast<double>(x))) return false;
    return true;
  }

  bool operator==(const Tensor& other) const {
    return shape_ == other.shape_ && data_ == other.data_;
  }

  std::string shape_str() const { return shape_str(shape_); }

  static std::string shape_str(const std::vector<std::size_t>& s) {
    std::ostringstream os;
    os << '[';
    for (std::size_t i = 0; i < s.size(); ++i) {
      if (i) os << 'x';
      os << s[i];
    }
    os << ']';
    return os.str();
  }

 private:
  static std::size_t product(const std::vector<std::size_t>& s) {
    std::size_t n = 1;
    for (std::size_t d : s) n *= d;
    return n;
  }

  void require_rank2(const char* what) const {
    if (shape_.size() != 2)
      throw DimensionError(std::string(what) + " on tensor of shape " + shape_str());
  }

  std::vector<std::size_t> shape_;
  std::vector<T> data_;
};

}  // namespace oam
