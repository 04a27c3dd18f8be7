#pragma once

#include <functional>
#include <ostream>
#include <string>

#include <json.hpp>

#include "oam/model.hpp"
#include "oam/object_scores.hpp"
#include "oam/tensor.hpp"

namespace oam {

// Streaming inference over one video. Emits one JSON line per snippet as soon
// as its inputs are consumed:
//   {"snippet_index": t, "verb_top5": [...], "noun_top5": [...], "action_top5": [...]}
// A snippet with no detection entry still produces a prediction (zero object
// vector); `warn` is invoked once per such snippet. Strictly causal: the line
// for snippet t depends only on inputs with index <= t.
template <typename T>
std::size_t stream_video(OadModel<T>& model, const std::string& video_id,
                         const Tensor<float>& features, const DetectionMap& detections,
                         std::ostream& out,
                         const std::function<void(const std::string&)>& warn = {}) {
  StreamRunner<T> runner(model);
  const ModelConfig& cfg = model.config();
  const std::size_t d = features.cols();
  if (features.rows() > 0 && d != cfg.feature_dim)
    throw ConfigError("feature dim " + std::to_string(d) +
                      " does not match model feature_dim " + std::to_string(cfg.feature_dim));
  std::size_t emitted = 0;
  for (std::size_t t = 0; t < features.rows(); ++t) {
    Tensor<T> x = Tensor<T>::zeros({1, d});
    for (std::size_t j = 0; j < d; ++j) x[j] = static_cast<T>(features.at(t, j));
    Tensor<T> f = Tensor<T>::zeros({1, cfg.categories});
    auto it = detections.find({video_id, static_cast<int>(t)});
    if (it != detections.end()) {
      f = aggregate_scores<T>(it->second, cfg.categories, cfg.aggregation);
    } else if (warn) {
      warn("no detections for video '" + video_id + "' snippet " + std::to_string(t) +
           "; using a zero object vector");
    }
    auto res = runner.step(x, f);
    nlohmann::ordered_json line;
    line["snippet_index"] = t;
    line["verb_top5"] = res.verb_top5;
    line["noun_top5"] = res.noun_top5;
    line["action_top5"] = res.action_top5;
    out << line.dump() << '\n';
    out.flush();
    ++emitted;
  }
  return emitted;
}

}  // namespace oam
