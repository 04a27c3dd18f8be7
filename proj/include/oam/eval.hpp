#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "oam/metrics.hpp"
#include "oam/model.hpp"
#include "oam/train.hpp"

namespace oam {

// Causal pass over every video: the runner consumes snippets in stream order
// and logs top-5 predictions for each one. Videos are processed in sorted id
// order so the log (and the report built from it) is deterministic.
template <typename T>
PredictionLog evaluate_model(OadModel<T>& model, const std::vector<PreparedEpisode<T>>& eps) {
  validate_dataset_against_model(eps, model.config());
  if (model.config().head_sizes.verbs < 6 || model.config().head_sizes.nouns < 6 ||
      model.config().head_sizes.actions < 6)
    throw ConfigError("top-5 evaluation needs at least 5 non-background classes per head");
  PredictionLog log;
  for (const PreparedEpisode<T>& ep : eps) {
    StreamRunner<T> runner(model);
    const std::size_t d = ep.features.cols();
    const std::size_t c = ep.scores.cols();
    for (std::size_t t = 0; t < ep.features.rows(); ++t) {
      Tensor<T> x = Tensor<T>::row(std::vector<T>(ep.features.data() + t * d,
                                                  ep.features.data() + (t + 1) * d));
      Tensor<T> f = Tensor<T>::row(std::vector<T>(ep.scores.data() + t * c,
                                                  ep.scores.data() + (t + 1) * c));
      auto out = runner.step(x, f);
      PredictionEntry e;
      e.video_id = ep.video_id;
      e.snippet_index = static_cast<int>(t);
      e.top5 = {out.verb_top5, out.noun_top5, out.action_top5};
      e.label = ep.labels[t];
      log.entries.push_back(std::move(e));
    }
  }
  log.sort();
  return log;
}

}  // namespace oam
