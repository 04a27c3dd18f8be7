#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>

#include "oam/errors.hpp"
#include "oam/tensor.hpp"

namespace oam {

// Forward-only numeric primitives. The autodiff tape reuses these for its
// forward pass and adds the matching adjoints; tests compare them against
// scalar oracles directly. All reductions accumulate in index-ascending
// order so results are reproducible bit for bit under a fixed seed.

template <typename T>
Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b) {
  if (a.rank() != 2 || b.rank() != 2 || a.cols() != b.rows())
    throw DimensionError("matmul: incompatible shapes " + a.shape_str() + " and " +
                         b.shape_str());
  const std::size_t m = a.rows(), k = a.cols(), n = b.cols();
  Tensor<T> c = Tensor<T>::zeros({m, n});
  for (std::size_t i = 0; i < m; ++i) {
    const T* arow = a.data() + i * k;
    T* crow = c.data() + i * n;
    for (std::size_t p = 0; p < k; ++p) {
      const T aip = arow[p];
      const T* brow = b.data() + p * n;
      for (std::size_t j = 0; j < n; ++j) crow[j] += aip * brow[j];
    }
  }
  return c;
}

template <typename T>
Tensor<T> transpose(const Tensor<T>& a) {
  if (a.rank() != 2)
    throw DimensionError("transpose: expected rank-2 tensor, got " + a.shape_str());
  Tensor<T> t = Tensor<T>::zeros({a.cols(), a.rows()});
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < a.cols(); ++j) t.at(j, i) = a.at(i, j);
  return t;
}

// Row-wise softmax with per-row max subtraction for overflow safety.
template <typename T>
Tensor<T> softmax_rows(const Tensor<T>& x) {
  if (x.rank() != 2)
    throw DimensionError("softmax_rows: expected rank-2 tensor, got " + x.shape_str());
  const std::size_t m = x.rows(), n = x.cols();
  Tensor<T> y = Tensor<T>::zeros({m, n});
  for (std::size_t i = 0; i < m; ++i) {
    const T* in = x.data() + i * n;
    T* out = y.data() + i * n;
    T mx = in[0];
    for (std::size_t j = 1; j < n; ++j) mx = std::max(mx, in[j]);
    T sum = T(0);
    for (std::size_t j = 0; j < n; ++j) {
      out[j] = std::exp(in[j] - mx);
      sum += out[j];
    }
    for (std::size_t j = 0; j < n; ++j) out[j] /= sum;
  }
  return y;
}

// Normalizes each slice along the last axis using the population variance:
// (x - mean) / sqrt(var + eps) * gamma + beta.
template <typename T>
Tensor<T> layer_norm(const Tensor<T>& x, const Tensor<T>& gamma, const Tensor<T>& beta,
                     T eps) {
  if (x.rank() < 1) throw DimensionError("layer_norm: scalar input");
  const std::size_t d = x.shape().back();
  if (gamma.numel() != d || beta.numel() != d)
    throw DimensionError("layer_norm: gamma " + gamma.shape_str() + " / beta " +
                         beta.shape_str() + " do not match last axis of " + x.shape_str());
  Tensor<T> y = Tensor<T>::zeros(x.shape());
  const std::size_t slices = x.numel() / d;
  for (std::size_t s = 0; s < slices; ++s) {
    const T* in = x.data() + s * d;
    T* out = y.data() + s * d;
    T mean = T(0);
    for (std::size_t j = 0; j < d; ++j) mean += in[j];
    mean /= T(d);
    T var = T(0);
    for (std::size_t j = 0; j < d; ++j) {
      const T c = in[j] - mean;
      var += c * c;
    }
    var /= T(d);
    const T inv = T(1) / std::sqrt(var + eps);
    for (std::size_t j = 0; j < d; ++j)
      out[j] = (in[j] - mean) * inv * gamma[j] + beta[j];
  }
  return y;
}

// softmax_rows(q k^T / sqrt(d)) v. The kernel both attention layers build on.
template <typename T>
Tensor<T> scaled_dot_attention(const Tensor<T>& q, const Tensor<T>& k, const Tensor<T>& v) {
  if (q.rank() != 2 || k.rank() != 2 || v.rank() != 2)
    throw DimensionError("scaled_dot_attention: expected rank-2 inputs");
  if (k.rows() == 0) throw EmptyContextError("scaled_dot_attention: empty context (nk = 0)");
  if (q.cols() != k.cols())
    throw DimensionError("scaled_dot_attention: q " + q.shape_str() + " vs k " +
                         k.shape_str());
  if (k.rows() != v.rows())
    throw DimensionError("scaled_dot_attention: k " + k.shape_str() + " vs v " +
                         v.shape_str());
  Tensor<T> scores = matmul(q, transpose(k));
  const T scale = T(1) / std::sqrt(static_cast<T>(q.cols()));
  for (std::size_t i = 0; i < scores.numel(); ++i) scores[i] *= scale;
  return matmul(softmax_rows(scores), v);
}

template <typename T>
T sigmoid_scalar(T x) {
  return T(1) / (T(1) + std::exp(-x));
}

// Exact GELU, x/2 * (1 + erf(x / sqrt 2)).
template <typename T>
T gelu_scalar(T x) {
  return T(0.5) * x * (T(1) + std::erf(x * T(0.7071067811865475244)));
}

template <typename T>
T gelu_grad_scalar(T x) {
  const T cdf = T(0.5) * (T(1) + std::erf(x * T(0.7071067811865475244)));
  const T pdf = T(0.3989422804014326779) * std::exp(T(-0.5) * x * x);
  return cdf + x * pdf;
}

}  // namespace oam
