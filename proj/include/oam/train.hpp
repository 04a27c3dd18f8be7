#pragma once

#include <cmath>
#include <cstdint>
#include <deque>
#include <functional>
#include <string>
#include <vector>

#include "oam/adam.hpp"
#include "oam/config.hpp"
#include "oam/errors.hpp"
#include "oam/model.hpp"
#include "oam/synth_data.hpp"

namespace oam {

// Episode with object scores pre-aggregated into [T x C] rows, so training
// steps do not re-walk the detection lists.
template <typename T>
struct PreparedEpisode {
  std::string video_id;
  Tensor<T> features;  // [T x D]
  Tensor<T> scores;    // [T x C]
  std::vector<LabelTriple> labels;
};

template <typename T>
std::vector<PreparedEpisode<T>> prepare_episodes(const std::vector<EpisodeRecord>& records,
                                                 const ModelConfig& cfg) {
  std::vector<PreparedEpisode<T>> out;
  out.reserve(records.size());
  for (const EpisodeRecord& ep : records) {
    PreparedEpisode<T> p;
    p.video_id = ep.video_id;
    const std::size_t t_total = ep.features.rows();
    const std::size_t d = ep.features.cols();
    p.features = Tensor<T>::zeros({t_total, d});
    for (std::size_t i = 0; i < ep.features.numel(); ++i)
      p.features[i] = static_cast<T>(ep.features[i]);
    p.scores = Tensor<T>::zeros({t_total, cfg.categories});
    for (std::size_t t = 0; t < t_total; ++t) {
      Tensor<T> row = aggregate_scores<T>(ep.detections[t], cfg.categories, cfg.aggregation);
      for (std::size_t c = 0; c < cfg.categories; ++c) p.scores.at(t, c) = row[c];
    }
    p.labels = ep.labels;
    out.push_back(std::move(p));
  }
  return out;
}

// Validates dataset/model agreement before the first step.
template <typename T>
void validate_dataset_against_model(const std::vector<PreparedEpisode<T>>& eps,
                                    const ModelConfig& cfg) {
  if (eps.empty()) throw DataError("dataset holds no episodes");
  for (const auto& ep : eps) {
    if (ep.features.cols() != cfg.feature_dim)
      throw ConfigError("dataset feature dim " + std::to_string(ep.features.cols()) +
                        " does not match configured feature_dim " +
                        std::to_string(cfg.feature_dim) + " (video '" + ep.video_id + "')");
    for (const LabelTriple& l : ep.labels) {
      if (l.verb < 0 || static_cast<std::size_t>(l.verb) >= cfg.head_sizes.verbs ||
          l.noun < 0 || static_cast<std::size_t>(l.noun) >= cfg.head_sizes.nouns ||
          l.action < 0 || static_cast<std::size_t>(l.action) >= cfg.head_sizes.actions)
        throw ConfigError("dataset label out of range for configured heads (video '" +
                          ep.video_id + "')");
    }
  }
}

// Loss over one causal window: mean per-snippet sum of the three
// cross-entropies. The hidden state starts at zero at the window start.
template <typename T>
Val window_loss(OadModel<T>& model, Tape<T>& tape, const PreparedEpisode<T>& ep,
                std::size_t start, std::size_t len) {
  const std::size_t d = ep.features.cols();
  const std::size_t c = ep.scores.cols();
  Val h = tape.leaf(model.initial_state());
  std::deque<Val> ring;
  Val total;
  bool first = true;
  for (std::size_t k = 0; k < len; ++k) {
    const std::size_t t = start + k;
    Val x = tape.leaf(Tensor<T>::row(std::vector<T>(
        ep.features.data() + t * d, ep.features.data() + (t + 1) * d)));
    Val f = tape.leaf(Tensor<T>::row(std::vector<T>(
        ep.scores.data() + t * c, ep.scores.data() + (t + 1) * c)));
    auto out = model.forward_snippet(tape, x, f, h, ring);
    h = out.h;
    Val l = model.heads().loss(tape, out.logits, ep.labels[t]);
    total = first ? l : tape.add(total, l);
    first = false;
  }
  return tape.scale(total, T(1) / static_cast<T>(len));
}

struct TrainStats {
  std::int64_t steps = 0;
  double first_logged_loss = 0.0;
  double final_loss = 0.0;
};

// Sequence training, one window of one video per step, Adam updates with
// optional gradient accumulation. log_line is called with pre-formatted
// JSONL records.
template <typename T>
TrainStats train_model(OadModel<T>& model, const std::vector<PreparedEpisode<T>>& eps,
                       const TrainConfig& tc,
                       const std::function<void(const std::string&)>& log_line = {}) {
  validate_dataset_against_model(eps, model.config());
  Adam<T> opt(AdamConfig<T>{static_cast<T>(tc.lr), static_cast<T>(tc.beta1),
                            static_cast<T>(tc.beta2), static_cast<T>(tc.eps)});
  Rng rng = Rng(tc.seed).derive(streams::kTrain);
  TrainStats stats;
  model.zero_grads();
  std::size_t accumulated = 0;
  for (std::int64_t step = 1; step <= tc.steps; ++step) {
    const PreparedEpisode<T>& ep = eps[rng.below(eps.size())];
    const std::size_t t_total = ep.features.rows();
    const std::size_t len = std::min<std::size_t>(tc.window_snippets, t_total);
    const std::size_t start = t_total > len ? rng.below(t_total - len + 1) : 0;

    Tape<T> tape;
    Val loss = window_loss(model, tape, ep, start, len);
    const double loss_value = static_cast<double>(tape.value(loss)[0]);
    if (!std::isfinite(loss_value))
      throw DivergenceError("training diverged: non-finite loss at step " +
                            std::to_string(step));
    tape.backward(loss);
    if (++accumulated == tc.grad_accum) {
      if (tc.grad_accum > 1)
        for (Parameter<T>* p : model.params())
          for (std::size_t i = 0; i < p->grad.numel(); ++i)
            p->grad[i] /= static_cast<T>(tc.grad_accum);
      opt.step(model.params());
      model.zero_grads();
      accumulated = 0;
    }

    if (log_line && (step % tc.log_every == 0 || step == tc.steps)) {
      nlohmann::ordered_json rec;
      rec["step"] = step;
      rec["loss"] = loss_value;
      log_line(rec.dump());
      if (stats.first_logged_loss == 0.0 && stats.steps == 0)
        stats.first_logged_loss = loss_value;
    }
    if (stats.first_logged_loss == 0.0) stats.first_logged_loss = loss_value;
    stats.final_loss = loss_value;
    stats.steps = step;
  }
  return stats;
}

}  // namespace oam
