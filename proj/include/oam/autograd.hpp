#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "oam/errors.hpp"
#include "oam/ops.hpp"
#include "oam/tensor.hpp"

namespace oam {

// Learnable weight: value plus an accumulated gradient of identical shape.
template <typename T>
struct Parameter {
  Parameter() = default;
  Parameter(std::string name_, Tensor<T> value_)
      : name(std::move(name_)), value(std::move(value_)),
        grad(Tensor<T>::zeros(value.shape())) {}

  void zero_grad() { grad = Tensor<T>::zeros(value.shape()); }

  std::string name;
  Tensor<T> value;
  Tensor<T> grad;
};

// Handle to a node on the tape.
struct Val {
  std::uint32_t idx = UINT32_MAX;
};

// Reverse-mode gradients via a dynamically recorded tape, rebuilt on every
// forward pass. Nodes are appended in evaluation order, which is already a
// topological order, so backward() is a single reverse sweep. Gradient
// accumulation walks inputs in index-ascending order for reproducibility.
template <typename T>
class Tape {
 public:
  // Leaf holding a constant or an input; gradients reaching it are dropped.
  Val leaf(Tensor<T> v) { return push(std::move(v), nullptr, {}); }

  // Leaf bound to a parameter; backward() adds the node gradient to p.grad.
  Val param(Parameter<T>& p) {
    Val out = push(p.value, nullptr, {});
    nodes_[out.idx].bound = &p;
    return out;
  }

  const Tensor<T>& value(Val v) const { return nodes_[v.idx].value; }
  const Tensor<T>& grad(Val v) const { return nodes_[v.idx].grad; }
  std::size_t size() const { return nodes_.size(); }

  Val matmul(Val a, Val b) {
    Tensor<T> out = oam::matmul(value(a), value(b));
    return push(std::move(out), [](Tape& t, Node& n) {
      const Tensor<T>& go = n.grad;
      const Tensor<T>& av = t.nodes_[n.in[0]].value;
      const Tensor<T>& bv = t.nodes_[n.in[1]].value;
      Tensor<T>& ga = t.nodes_[n.in[0]].grad;
      Tensor<T>& gb = t.nodes_[n.in[1]].grad;
      const std::size_t m = av.rows(), k = av.cols(), c = bv.cols();
      // dA += dC B^T
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t p = 0; p < k; ++p) {
          T acc = T(0);
          const T* grow = go.data() + i * c;
          const T* brow = bv.data() + p * c;
          for (std::size_t j = 0; j < c; ++j) acc += grow[j] * brow[j];
          ga.data()[i * k + p] += acc;
        }
      // dB += A^T dC
      for (std::size_t i = 0; i < m; ++i) {
        const T* arow = av.data() + i * k;
        const T* grow = go.data() + i * c;
        for (std::size_t p = 0; p < k; ++p) {
          const T aip = arow[p];
          T* brow = gb.data() + p * c;
          for (std::size_t j = 0; j < c; ++j) brow[j] += aip * grow[j];
        }
      }
    }, {a, b});
  }

  Val transpose(Val a) {
    return push(oam::transpose(value(a)), [](Tape& t, Node& n) {
      Tensor<T>& ga = t.nodes_[n.in[0]].grad;
      const Tensor<T>& go = n.grad;
      for (std::size_t i = 0; i < go.rows(); ++i)
        for (std::size_t j = 0; j < go.cols(); ++j) ga.at(j, i) += go.at(i, j);
    }, {a});
  }

  Val add(Val a, Val b) {
    const Tensor<T>& av = value(a);
    const Tensor<T>& bv = value(b);
    if (!av.same_shape(bv))
      throw DimensionError("add: shape mismatch " + av.shape_str() + " vs " + bv.shape_str());
    Tensor<T> out = av;
    for (std::size_t i = 0; i < out.numel(); ++i) out[i] += bv[i];
    return push(std::move(out), [](Tape& t, Node& n) {
      for (int s = 0; s < 2; ++s) {
        Tensor<T>& g = t.nodes_[n.in[s]].grad;
        for (std::size_t i = 0; i < n.grad.numel(); ++i) g[i] += n.grad[i];
      }
    }, {a, b});
  }

  // m [r x d] plus bias [d] broadcast over rows.
  Val add_bias(Val m, Val bias) {
    const Tensor<T>& mv = value(m);
    const Tensor<T>& bv = value(bias);
    if (mv.rank() != 2 || bv.numel() != mv.cols())
      throw DimensionError("add_bias: " + mv.shape_str() + " vs bias " + bv.shape_str());
    Tensor<T> out = mv;
    for (std::size_t i = 0; i < mv.rows(); ++i)
      for (std::size_t j = 0; j < mv.cols(); ++j) out.at(i, j) += bv[j];
    return push(std::move(out), [](Tape& t, Node& n) {
      Tensor<T>& gm = t.nodes_[n.in[0]].grad;
      Tensor<T>& gb = t.nodes_[n.in[1]].grad;
      const Tensor<T>& go = n.grad;
      for (std::size_t i = 0; i < go.numel(); ++i) gm[i] += go[i];
      for (std::size_t i = 0; i < go.rows(); ++i)
        for (std::size_t j = 0; j < go.cols(); ++j) gb[j] += go.at(i, j);
    }, {m, bias});
  }

  // Elementwise a*x + b with scalar coefficients.
  Val affine(Val x, T a, T b) {
    Tensor<T> out = value(x);
    for (std::size_t i = 0; i < out.numel(); ++i) out[i] = a * out[i] + b;
    Val r = push(std::move(out), [a](Tape& t, Node& n) {
      Tensor<T>& g = t.nodes_[n.in[0]].grad;
      for (std::size_t i = 0; i < n.grad.numel(); ++i) g[i] += a * n.grad[i];
    }, {x});
    return r;
  }

  Val scale(Val x, T a) { return affine(x, a, T(0)); }

  Val hadamard(Val a, Val b) {
    const Tensor<T>& av = value(a);
    const Tensor<T>& bv = value(b);
    if (!av.same_shape(bv))
      throw DimensionError("hadamard: shape mismatch " + av.shape_str() + " vs " +
                           bv.shape_str());
    Tensor<T> out = av;
    for (std::size_t i = 0; i < out.numel(); ++i) out[i] *= bv[i];
    return push(std::move(out), [](Tape& t, Node& n) {
      const Tensor<T>& av = t.nodes_[n.in[0]].value;
      const Tensor<T>& bv = t.nodes_[n.in[1]].value;
      Tensor<T>& ga = t.nodes_[n.in[0]].grad;
      Tensor<T>& gb = t.nodes_[n.in[1]].grad;
      for (std::size_t i = 0; i < n.grad.numel(); ++i) {
        ga[i] += n.grad[i] * bv[i];
        gb[i] += n.grad[i] * av[i];
      }
    }, {a, b});
  }

  Val sigmoid(Val x) {
    Tensor<T> out = value(x);
    for (std::size_t i = 0; i < out.numel(); ++i) out[i] = sigmoid_scalar(out[i]);
    return push(std::move(out), [](Tape& t, Node& n) {
      Tensor<T>& g = t.nodes_[n.in[0]].grad;
      for (std::size_t i = 0; i < n.grad.numel(); ++i) {
        const T s = n.value[i];
        g[i] += n.grad[i] * s * (T(1) - s);
      }
    }, {x});
  }

  Val tanh(Val x) {
    Tensor<T> out = value(x);
    for (std::size_t i = 0; i < out.numel(); ++i) out[i] = std::tanh(out[i]);
    return push(std::move(out), [](Tape& t, Node& n) {
      Tensor<T>& g = t.nodes_[n.in[0]].grad;
      for (std::size_t i = 0; i < n.grad.numel(); ++i) {
        const T y = n.value[i];
        g[i] += n.grad[i] * (T(1) - y * y);
      }
    }, {x});
  }

  Val gelu(Val x) {
    Tensor<T> out = value(x);
    for (std::size_t i = 0; i < out.numel(); ++i) out[i] = gelu_scalar(out[i]);
    return push(std::move(out), [](Tape& t, Node& n) {
      const Tensor<T>& xv = t.nodes_[n.in[0]].value;
      Tensor<T>& g = t.nodes_[n.in[0]].grad;
      for (std::size_t i = 0; i < n.grad.numel(); ++i)
        g[i] += n.grad[i] * gelu_grad_scalar(xv[i]);
    }, {x});
  }

  Val softmax_rows(Val x) {
    return push(oam::softmax_rows(value(x)), [](Tape& t, Node& n) {
      const Tensor<T>& y = n.value;
      const Tensor<T>& go = n.grad;
      Tensor<T>& gx = t.nodes_[n.in[0]].grad;
      for (std::size_t i = 0; i < y.rows(); ++i) {
        T dot = T(0);
        for (std::size_t j = 0; j < y.cols(); ++j) dot += go.at(i, j) * y.at(i, j);
        for (std::size_t j = 0; j < y.cols(); ++j)
          gx.at(i, j) += y.at(i, j) * (go.at(i, j) - dot);
      }
    }, {x});
  }

  Val layer_norm(Val x, Val gamma, Val beta, T eps) {
    Tensor<T> out = oam::layer_norm(value(x), value(gamma), value(beta), eps);
    return push(std::move(out), [eps](Tape& t, Node& n) {
      const Tensor<T>& xv = t.nodes_[n.in[0]].value;
      const Tensor<T>& gammav = t.nodes_[n.in[1]].value;
      Tensor<T>& gx = t.nodes_[n.in[0]].grad;
      Tensor<T>& ggamma = t.nodes_[n.in[1]].grad;
      Tensor<T>& gbeta = t.nodes_[n.in[2]].grad;
      const std::size_t d = xv.shape().back();
      const std::size_t slices = xv.numel() / d;
      for (std::size_t s = 0; s < slices; ++s) {
        const T* in = xv.data() + s * d;
        const T* go = n.grad.data() + s * d;
        T* dx = gx.data() + s * d;
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
        // xhat_j = (x_j - mean) * inv;  g_j = go_j * gamma_j
        T gmean = T(0), gxhat_dot = T(0);
        for (std::size_t j = 0; j < d; ++j) {
          const T xhat = (in[j] - mean) * inv;
          const T g = go[j] * gammav[j];
          gmean += g;
          gxhat_dot += g * xhat;
          ggamma[j] += go[j] * xhat;
          gbeta[j] += go[j];
        }
        gmean /= T(d);
        gxhat_dot /= T(d);
        for (std::size_t j = 0; j < d; ++j) {
          const T xhat = (in[j] - mean) * inv;
          const T g = go[j] * gammav[j];
          dx[j] += inv * (g - gmean - xhat * gxhat_dot);
        }
      }
    }, {x, gamma, beta});
  }

  Val slice_cols(Val x, std::size_t start, std::size_t len) {
    const Tensor<T>& xv = value(x);
    if (xv.rank() != 2 || start + len > xv.cols())
      throw DimensionError("slice_cols: [" + std::to_string(start) + ", " +
                           std::to_string(start + len) + ") out of " + xv.shape_str());
    Tensor<T> out = Tensor<T>::zeros({xv.rows(), len});
    for (std::size_t i = 0; i < xv.rows(); ++i)
      for (std::size_t j = 0; j < len; ++j) out.at(i, j) = xv.at(i, start + j);
    return push(std::move(out), [start, len](Tape& t, Node& n) {
      Tensor<T>& gx = t.nodes_[n.in[0]].grad;
      for (std::size_t i = 0; i < n.grad.rows(); ++i)
        for (std::size_t j = 0; j < len; ++j) gx.at(i, start + j) += n.grad.at(i, j);
    }, {x});
  }

  Val concat_cols(const std::vector<Val>& parts) {
    if (parts.empty()) throw DimensionError("concat_cols: no inputs");
    const std::size_t r = value(parts[0]).rows();
    std::size_t total = 0;
    for (Val p : parts) {
      if (value(p).rank() != 2 || value(p).rows() != r)
        throw DimensionError("concat_cols: row mismatch");
      total += value(p).cols();
    }
    Tensor<T> out = Tensor<T>::zeros({r, total});
    std::size_t off = 0;
    for (Val p : parts) {
      const Tensor<T>& pv = value(p);
      for (std::size_t i = 0; i < r; ++i)
        for (std::size_t j = 0; j < pv.cols(); ++j) out.at(i, off + j) = pv.at(i, j);
      off += pv.cols();
    }
    return push(std::move(out), [](Tape& t, Node& n) {
      std::size_t off = 0;
      for (std::uint32_t src : n.in) {
        Tensor<T>& g = t.nodes_[src].grad;
        for (std::size_t i = 0; i < g.rows(); ++i)
          for (std::size_t j = 0; j < g.cols(); ++j) g.at(i, j) += n.grad.at(i, off + j);
        off += g.cols();
      }
    }, parts);
  }

  Val concat_rows(const std::vector<Val>& parts) {
    if (parts.empty()) throw EmptyContextError("concat_rows: no inputs");
    const std::size_t c = value(parts[0]).cols();
    std::size_t total = 0;
    for (Val p : parts) {
      if (value(p).rank() != 2 || value(p).cols() != c)
        throw DimensionError("concat_rows: column mismatch");
      total += value(p).rows();
    }
    Tensor<T> out = Tensor<T>::zeros({total, c});
    std::size_t off = 0;
    for (Val p : parts) {
      const Tensor<T>& pv = value(p);
      for (std::size_t i = 0; i < pv.rows(); ++i)
        for (std::size_t j = 0; j < c; ++j) out.at(off + i, j) = pv.at(i, j);
      off += pv.rows();
    }
    return push(std::move(out), [](Tape& t, Node& n) {
      std::size_t off = 0;
      for (std::uint32_t src : n.in) {
        Tensor<T>& g = t.nodes_[src].grad;
        for (std::size_t i = 0; i < g.rows(); ++i)
          for (std::size_t j = 0; j < g.cols(); ++j) g.at(i, j) += n.grad.at(off + i, j);
        off += g.rows();
      }
    }, parts);
  }

  // Column-wise max over rows, [N x d] -> [1 x d]. The gradient flows to the
  // argmax element per column; ties resolve to the lowest row index.
  Val max_pool_rows(Val x) {
    const Tensor<T>& xv = value(x);
    if (xv.rank() != 2 || xv.rows() == 0)
      throw DimensionError("max_pool_rows: need a nonempty rank-2 tensor, got " +
                           xv.shape_str());
    Tensor<T> out = Tensor<T>::zeros({1, xv.cols()});
    auto argmax = std::make_shared<std::vector<std::size_t>>(xv.cols(), 0);
    for (std::size_t j = 0; j < xv.cols(); ++j) {
      T best = xv.at(0, j);
      std::size_t bi = 0;
      for (std::size_t i = 1; i < xv.rows(); ++i)
        if (xv.at(i, j) > best) {
          best = xv.at(i, j);
          bi = i;
        }
      out.at(0, j) = best;
      (*argmax)[j] = bi;
    }
    return push(std::move(out), [argmax](Tape& t, Node& n) {
      Tensor<T>& gx = t.nodes_[n.in[0]].grad;
      for (std::size_t j = 0; j < n.grad.cols(); ++j)
        gx.at((*argmax)[j], j) += n.grad.at(0, j);
    }, {x});
  }

  // Negative log likelihood of class `target` under softmax of a single-row
  // logits tensor. Stable logsumexp forward, (softmax - onehot) backward.
  Val cross_entropy(Val logits, std::size_t target) {
    const Tensor<T>& lv = value(logits);
    if (lv.rank() != 2 || lv.rows() != 1)
      throw DimensionError("cross_entropy: want [1 x C] logits, got " + lv.shape_str());
    if (target >= lv.cols())
      throw DataError("cross_entropy: label " + std::to_string(target) +
                      " out of range for " + std::to_string(lv.cols()) + " classes");
    T mx = lv[0];
    for (std::size_t j = 1; j < lv.cols(); ++j) mx = std::max(mx, lv[j]);
    T sum = T(0);
    for (std::size_t j = 0; j < lv.cols(); ++j) sum += std::exp(lv[j] - mx);
    const T loss = mx + std::log(sum) - lv[target];
    return push(Tensor<T>::scalar(loss), [target](Tape& t, Node& n) {
      const Tensor<T>& lv = t.nodes_[n.in[0]].value;
      Tensor<T>& gl = t.nodes_[n.in[0]].grad;
      const T go = n.grad[0];
      T mx = lv[0];
      for (std::size_t j = 1; j < lv.cols(); ++j) mx = std::max(mx, lv[j]);
      T sum = T(0);
      for (std::size_t j = 0; j < lv.cols(); ++j) sum += std::exp(lv[j] - mx);
      for (std::size_t j = 0; j < lv.cols(); ++j) {
        const T p = std::exp(lv[j] - mx) / sum;
        gl[j] += go * (p - (j == target ? T(1) : T(0)));
      }
    }, {logits});
  }

  Val sum(Val x) {
    const Tensor<T>& xv = value(x);
    T s = T(0);
    for (std::size_t i = 0; i < xv.numel(); ++i) s += xv[i];
    return push(Tensor<T>::scalar(s), [](Tape& t, Node& n) {
      Tensor<T>& g = t.nodes_[n.in[0]].grad;
      for (std::size_t i = 0; i < g.numel(); ++i) g[i] += n.grad[0];
    }, {x});
  }

  // Seeds d(loss)/d(loss) = 1 and sweeps the tape once in reverse. Gradients
  // of parameter leaves are added into Parameter::grad; gradients reaching
  // plain leaves are discarded.
  void backward(Val loss) {
    if (value(loss).numel() != 1)
      throw DimensionError("backward: loss must be a scalar, got shape " +
                           value(loss).shape_str());
    nodes_[loss.idx].grad[0] = T(1);
    for (std::size_t i = nodes_.size(); i-- > 0;) {
      Node& n = nodes_[i];
      if (n.pull) n.pull(*this, n);
      if (n.bound) {
        Tensor<T>& pg = n.bound->grad;
        for (std::size_t k = 0; k < pg.numel(); ++k) pg[k] += n.grad[k];
      }
    }
  }

 private:
  struct Node {
    Tensor<T> value;
    Tensor<T> grad;
    std::function<void(Tape&, Node&)> pull;
    std::vector<std::uint32_t> in;
    Parameter<T>* bound = nullptr;
  };

  Val push(Tensor<T> v, std::function<void(Tape&, Node&)> pull, const std::vector<Val>& in) {
    Node n;
    n.grad = Tensor<T>::zeros(v.shape());
    n.value = std::move(v);
    n.pull = std::move(pull);
    n.in.reserve(in.size());
    for (Val x : in) n.in.push_back(x.idx);
    nodes_.push_back(std::move(n));
    return Val{static_cast<std::uint32_t>(nodes_.size() - 1)};
  }

  std::vector<Node> nodes_;
};

}  // namespace oam
