#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "oam/autograd.hpp"
#include "oam/errors.hpp"
#include "oam/metrics.hpp"
#include "oam/oa_module.hpp"
#include "oam/rng.hpp"

namespace oam {

// Logit sizes of the three classifiers, background slot included at index 0.
struct HeadSizes {
  std::size_t verbs = 0;
  std::size_t nouns = 0;
  std::size_t actions = 0;
};

template <typename T>
struct HeadLogits {
  Val verb, noun, action;
};

// Three independent affine classifiers over the pooled representation.
template <typename T>
struct ClassifierHeads {
  ClassifierHeads() = default;

  ClassifierHeads(std::size_t in_dim_, HeadSizes sizes_, Rng& rng)
      : in_dim(in_dim_), sizes(sizes_),
        verb("heads.verb", in_dim_, sizes_.verbs, rng),
        noun("heads.noun", in_dim_, sizes_.nouns, rng),
        action("heads.action", in_dim_, sizes_.actions, rng) {}

  HeadLogits<T> apply(Tape<T>& tape, Val pooled) {
    if (tape.value(pooled).cols() != in_dim)
      throw DimensionError("heads: pooled width " +
                           std::to_string(tape.value(pooled).cols()) +
                           " does not match head input dim " + std::to_string(in_dim));
    return {verb.apply(tape, pooled), noun.apply(tape, pooled),
            action.apply(tape, pooled)};
  }

  // Sum of the three cross-entropies, equal weights.
  Val loss(Tape<T>& tape, const HeadLogits<T>& logits, const LabelTriple& label) {
    check_label(label);
    Val l = tape.add(tape.cross_entropy(logits.verb, static_cast<std::size_t>(label.verb)),
                     tape.cross_entropy(logits.noun, static_cast<std::size_t>(label.noun)));
    return tape.add(
        l, tape.cross_entropy(logits.action, static_cast<std::size_t>(label.action)));
  }

  void check_label(const LabelTriple& label) const {
    auto in_range = [](int v, std::size_t n) {
      return v >= 0 && static_cast<std::size_t>(v) < n;
    };
    if (!in_range(label.verb, sizes.verbs) || !in_range(label.noun, sizes.nouns) ||
        !in_range(label.action, sizes.actions))
      throw DataError("label (" + std::to_string(label.verb) + ", " +
                      std::to_string(label.noun) + ", " + std::to_string(label.action) +
                      ") out of range for heads " + std::to_string(sizes.verbs) + "/" +
                      std::to_string(sizes.nouns) + "/" + std::to_string(sizes.actions));
  }

  std::vector<Parameter<T>*> params() {
    std::vector<Parameter<T>*> out;
    for (auto* l : {&verb, &noun, &action})
      for (auto* p : l->params()) out.push_back(p);
    return out;
  }

  std::size_t in_dim = 0;
  HeadSizes sizes;
  LinearP<T> verb, noun, action;
};

}  // namespace oam
