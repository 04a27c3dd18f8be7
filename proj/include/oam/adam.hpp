#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include "oam/autograd.hpp"
#include "oam/errors.hpp"
#include "oam/tensor.hpp"

namespace oam {

template <typename T>
struct AdamConfig {
  T lr = T(1e-3);
  T beta1 = T(0.9);
  T beta2 = T(0.999);
  T eps = T(1e-8);
};

// Adam with bias correction. Moment buffers are keyed by parameter position,
// so the parameter list must stay stable across calls.
template <typename T>
class Adam {
 public:
  explicit Adam(AdamConfig<T> cfg) : cfg_(cfg) {}

  std::int64_t steps_taken() const { return t_; }

  void step(const std::vector<Parameter<T>*>& params) {
    if (slots_.empty()) {
      slots_.reserve(params.size());
      for (const Parameter<T>* p : params)
        slots_.push_back({Tensor<T>::zeros(p->value.shape()),
                          Tensor<T>::zeros(p->value.shape())});
    }
    ++t_;
    const T bc1 = T(1) - std::pow(cfg_.beta1, static_cast<T>(t_));
    const T bc2 = T(1) - std::pow(cfg_.beta2, static_cast<T>(t_));
    for (std::size_t i = 0; i < params.size(); ++i) {
      Parameter<T>& p = *params[i];
      if (!p.grad.all_finite())
        throw DivergenceError("non-finite gradient in parameter '" + p.name + "'");
      Tensor<T>& m = slots_[i].m;
      Tensor<T>& v = slots_[i].v;
      for (std::size_t k = 0; k < p.value.numel(); ++k) {
        const T g = p.grad[k];
        m[k] = cfg_.beta1 * m[k] + (T(1) - cfg_.beta1) * g;
        v[k] = cfg_.beta2 * v[k] + (T(1) - cfg_.beta2) * g * g;
        const T mhat = m[k] / bc1;
        const T vhat = v[k] / bc2;
        p.value[k] -= cfg_.lr * mhat / (std::sqrt(vhat) + cfg_.eps);
      }
    }
  }

 private:
  struct Slot {
    Tensor<T> m;
    Tensor<T> v;
  };

  AdamConfig<T> cfg_;
  std::vector<Slot> slots_;
  std::int64_t t_ = 0;
};

}  // namespace oam
