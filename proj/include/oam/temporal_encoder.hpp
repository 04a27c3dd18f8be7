#pragma once

#include <cstddef>
#include <deque>
#include <string>
#include <vector>

#include "oam/autograd.hpp"
#include "oam/errors.hpp"
#include "oam/rng.hpp"
#include "oam/tensor.hpp"

namespace oam {

// Minimal gated recurrent encoder over per-snippet features. Its hidden-state
// sequence is the temporal context the attention module consumes. One gate:
//
//   z  = sigmoid(x Wz + h Uz + bz)
//   ht = tanh(x Wh + (z .* h) Uh + bh)
//   h' = (1 - z) .* h + z .* ht
//
// Vectors are rows; weight matrices map input dim -> hidden dim on the right.
// Strictly causal: a step sees only the current input and the carried state.
template <typename T>
struct GatedEncoder {
  GatedEncoder() = default;

  GatedEncoder(std::size_t input_dim, std::size_t hidden_dim, Rng& rng)
      : in_dim(input_dim), hidden(hidden_dim) {
    auto init = [&](const std::string& name, std::size_t r, std::size_t c) {
      Tensor<T> w = Tensor<T>::zeros({r, c});
      const T s = T(1) / std::sqrt(static_cast<T>(r));
      for (std::size_t i = 0; i < w.numel(); ++i) w[i] = static_cast<T>(rng.normal()) * s;
      return Parameter<T>(name, std::move(w));
    };
    wz = init("encoder.wz", input_dim, hidden_dim);
    uz = init("encoder.uz", hidden_dim, hidden_dim);
    bz = Parameter<T>("encoder.bz", Tensor<T>::zeros({hidden_dim}));
    wh = init("encoder.wh", input_dim, hidden_dim);
    uh = init("encoder.uh", hidden_dim, hidden_dim);
    bh = Parameter<T>("encoder.bh", Tensor<T>::zeros({hidden_dim}));
  }

  // One recurrent update on the tape. x is [1 x in_dim], h is [1 x hidden].
  Val step(Tape<T>& tape, Val x, Val h) {
    if (tape.value(x).cols() != in_dim)
      throw DimensionError("encoder step: feature length " +
                           std::to_string(tape.value(x).cols()) +
                           " does not match input dim " + std::to_string(in_dim));
    Val z = tape.sigmoid(tape.add_bias(
        tape.add(tape.matmul(x, tape.param(wz)), tape.matmul(h, tape.param(uz))),
        tape.param(bz)));
    Val gated = tape.hadamard(z, h);
    Val cand = tape.tanh(tape.add_bias(
        tape.add(tape.matmul(x, tape.param(wh)), tape.matmul(gated, tape.param(uh))),
        tape.param(bh)));
    Val keep = tape.hadamard(tape.affine(z, T(-1), T(1)), h);
    return tape.add(keep, tape.hadamard(z, cand));
  }

  Tensor<T> initial_state() const { return Tensor<T>::zeros({1, hidden}); }

  std::vector<Parameter<T>*> params() { return {&wz, &uz, &bz, &wh, &uh, &bh}; }

  std::size_t in_dim = 0;
  std::size_t hidden = 0;
  Parameter<T> wz, uz, bz, wh, uh, bh;
};

// Sliding window over the most recent hidden states. Oldest first.
template <typename T>
class CueRing {
 public:
  explicit CueRing(std::size_t capacity) : capacity_(capacity) {}

  void push(Tensor<T> cue) {
    ring_.push_back(std::move(cue));
    if (ring_.size() > capacity_) ring_.pop_front();
  }

  void clear() { ring_.clear(); }
  std::size_t size() const { return ring_.size(); }
  std::size_t capacity() const { return capacity_; }

  // Stacks the retained cues into [len x H].
  Tensor<T> stacked() const {
    if (ring_.empty()) throw EmptyContextError("cue ring is empty");
    const std::size_t h = ring_.front().numel();
    Tensor<T> out = Tensor<T>::zeros({ring_.size(), h});
    std::size_t r = 0;
    for (const Tensor<T>& cue : ring_) {
      for (std::size_t j = 0; j < h; ++j) out.at(r, j) = cue[j];
      ++r;
    }
    return out;
  }

 private:
  std::size_t capacity_;
  std::deque<Tensor<T>> ring_;
};

// Runs the encoder over a time-ordered feature sequence [T x D] and returns
// the last min(T, window) hidden states as [len x H], oldest first. Row t of
// the full-window result is the state after consuming features[0..t].
template <typename T>
Tensor<T> encode_window(GatedEncoder<T>& enc, const Tensor<T>& features,
                        std::size_t window) {
  if (features.rank() != 2 || features.rows() == 0)
    throw EmptyContextError("encode_window: empty feature sequence");
  if (window == 0) throw DimensionError("encode_window: window must be >= 1");
  CueRing<T> ring(window);
  Tensor<T> h = enc.initial_state();
  for (std::size_t t = 0; t < features.rows(); ++t) {
    Tape<T> tape;
    Val xv = tape.leaf(Tensor<T>::row(
        std::vector<T>(features.data() + t * features.cols(),
                       features.data() + (t + 1) * features.cols())));
    Val hv = tape.leaf(h);
    Val hn = enc.step(tape, xv, hv);
    h = tape.value(hn);
    ring.push(h);
  }
  return ring.stacked();
}

}  // namespace oam
