#pragma once

#include <cstdint>
#include <deque>
#include <string>
#include <vector>

#include "oam/autograd.hpp"
#include "oam/errors.hpp"
#include "oam/heads.hpp"
#include "oam/metrics.hpp"
#include "oam/oa_module.hpp"
#include "oam/object_scores.hpp"
#include "oam/rng.hpp"
#include "oam/temporal_encoder.hpp"
#include "oam/tensor.hpp"

namespace oam {

// Where the object scores enter the pipeline. None is the detection-blind
// baseline; InputConcat projects the scores and concatenates them with the
// visual feature before the encoder; OaModule routes them through the
// query-attention module.
enum class Integration { None, InputConcat, OaModule };

inline Integration integration_from_string(const std::string& s) {
  if (s == "none") return Integration::None;
  if (s == "input_concat") return Integration::InputConcat;
  if (s == "oa_module") return Integration::OaModule;
  throw ConfigError("unknown integration mode '" + s + "' (none|input_concat|oa_module)");
}

inline const char* to_string(Integration i) {
  switch (i) {
    case Integration::None: return "none";
    case Integration::InputConcat: return "input_concat";
    default: return "oa_module";
  }
}

// Which hidden states form the temporal context: the last cue_window states,
// or only the current one.
enum class CueMode { LastK, Final };

inline CueMode cue_mode_from_string(const std::string& s) {
  if (s == "last_k") return CueMode::LastK;
  if (s == "final") return CueMode::Final;
  throw ConfigError("unknown cue mode '" + s + "' (last_k|final)");
}

inline const char* to_string(CueMode m) { return m == CueMode::LastK ? "last_k" : "final"; }

struct ModelConfig {
  OaConfig oa;
  std::size_t feature_dim = 32;
  std::size_t hidden_dim = 32;
  std::size_t categories = 12;
  HeadSizes head_sizes{9, 13, 97};
  Integration integration = Integration::OaModule;
  CueMode cue_mode = CueMode::LastK;
  std::size_t cue_window = 16;
  ScoreAggregation aggregation = ScoreAggregation::Max;
  std::size_t object_proj_dim = 32;  // InputConcat projection width

  std::size_t effective_cue_window() const {
    return cue_mode == CueMode::Final ? 1 : cue_window;
  }
  std::size_t encoder_input_dim() const {
    return integration == Integration::InputConcat ? feature_dim + object_proj_dim
                                                   : feature_dim;
  }
  std::size_t pooled_dim() const {
    return integration == Integration::OaModule ? oa.embed_dim : hidden_dim;
  }

  void validate() const {
    oa.validate();
    if (feature_dim < 1 || hidden_dim < 1 || categories < 1)
      throw ConfigError("model: feature_dim, hidden_dim and categories must be >= 1");
    if (head_sizes.verbs < 2 || head_sizes.nouns < 2 || head_sizes.actions < 2)
      throw ConfigError("model: every head needs at least one non-background class");
    if (cue_window < 1) throw ConfigError("model: cue_window must be >= 1");
    if (integration == Integration::OaModule && hidden_dim != oa.embed_dim)
      throw ConfigError("model: hidden_dim " + std::to_string(hidden_dim) +
                        " must equal embed_dim " + std::to_string(oa.embed_dim) +
                        " when the attention module consumes the cues");
    if (integration == Integration::InputConcat && object_proj_dim < 1)
      throw ConfigError("model: object_proj_dim must be >= 1");
  }
};

namespace streams {
constexpr std::uint64_t kModelInit = 0x6D6F64656C;  // "model"
constexpr std::uint64_t kTrain = 0x747261696E;      // "train"
}  // namespace streams

// The full online pipeline: gated recurrent encoder over features, object
// scores entering at the configured point, max-pooled queries (or the hidden
// state) classified by the three heads.
template <typename T>
class OadModel {
 public:
  OadModel(const ModelConfig& cfg, std::uint64_t seed) : cfg_(cfg) {
    cfg_.validate();
    Rng rng = Rng(seed).derive(streams::kModelInit);
    encoder_ = GatedEncoder<T>(cfg_.encoder_input_dim(), cfg_.hidden_dim, rng);
    if (cfg_.integration == Integration::InputConcat)
      obj_in_ = LinearP<T>("obj_in", cfg_.categories, cfg_.object_proj_dim, rng);
    if (cfg_.integration == Integration::OaModule)
      oam_ = ObjectAwareModule<T>(cfg_.oa, cfg_.categories, rng);
    heads_ = ClassifierHeads<T>(cfg_.pooled_dim(), cfg_.head_sizes, rng);

    for (auto* p : encoder_.params()) params_.push_back(p);
    if (cfg_.integration == Integration::InputConcat)
      for (auto* p : obj_in_.params()) params_.push_back(p);
    if (cfg_.integration == Integration::OaModule)
      for (auto* p : oam_.params()) params_.push_back(p);
    for (auto* p : heads_.params()) params_.push_back(p);
  }

  const ModelConfig& config() const { return cfg_; }
  const std::vector<Parameter<T>*>& params() const { return params_; }
  GatedEncoder<T>& encoder() { return encoder_; }
  ObjectAwareModule<T>& attention_module() { return oam_; }
  ClassifierHeads<T>& heads() { return heads_; }

  void zero_grads() {
    for (Parameter<T>* p : params_) p->zero_grad();
  }

  Tensor<T> initial_state() const { return encoder_.initial_state(); }

  struct SnippetForward {
    Val h;
    HeadLogits<T> logits;
  };

  // One causal step. x is the feature row [1 x D], scores the aggregated
  // object vector [1 x C], h_prev the carried state; cue_ring is the caller's
  // window of past hidden states (tape handles), updated in place.
  SnippetForward forward_snippet(Tape<T>& tape, Val x, Val scores, Val h_prev,
                                 std::deque<Val>& cue_ring) {
    Val xin = x;
    if (cfg_.integration == Integration::InputConcat)
      xin = tape.concat_cols({x, obj_in_.apply(tape, scores)});
    Val h = encoder_.step(tape, xin, h_prev);
    Val pooled = h;
    if (cfg_.integration == Integration::OaModule) {
      cue_ring.push_back(h);
      if (cue_ring.size() > cfg_.effective_cue_window()) cue_ring.pop_front();
      Val cues = cue_ring.size() == 1
                     ? cue_ring.front()
                     : tape.concat_rows(std::vector<Val>(cue_ring.begin(), cue_ring.end()));
      pooled = tape.max_pool_rows(oam_.forward(tape, scores, cues));
    }
    return {h, heads_.apply(tape, pooled)};
  }

 private:
  ModelConfig cfg_;
  GatedEncoder<T> encoder_;
  LinearP<T> obj_in_;
  ObjectAwareModule<T> oam_;
  ClassifierHeads<T> heads_;
  std::vector<Parameter<T>*> params_;
};

// Causal inference driver shared by evaluation and the streaming CLI. Carries
// the hidden state and the cue window as plain tensors and rebuilds a fresh
// tape per snippet.
template <typename T>
class StreamRunner {
 public:
  explicit StreamRunner(OadModel<T>& model) : model_(model), h_(model.initial_state()) {}

  struct StepResult {
    std::vector<int> verb_top5, noun_top5, action_top5;
  };

  // feature [1 x D], scores [1 x C]; advances the stream by one snippet.
  StepResult step(const Tensor<T>& feature, const Tensor<T>& scores) {
    Tape<T> tape;
    Val x = tape.leaf(feature);
    Val f = tape.leaf(scores);
    Val h = tape.leaf(h_);
    // Past cues only; forward_snippet appends the current state itself.
    std::deque<Val> cue_vals;
    for (const Tensor<T>& cue : ring_) cue_vals.push_back(tape.leaf(cue));
    auto out = model_.forward_snippet(tape, x, f, h, cue_vals);
    h_ = tape.value(out.h);
    ring_.push_back(h_);
    if (ring_.size() > model_.config().effective_cue_window()) ring_.pop_front();
    return {top5_ids(tape.value(out.logits.verb)), top5_ids(tape.value(out.logits.noun)),
            top5_ids(tape.value(out.logits.action))};
  }

  void reset() {
    h_ = model_.initial_state();
    ring_.clear();
  }

 private:
  OadModel<T>& model_;
  Tensor<T> h_;
  std::deque<Tensor<T>> ring_;
};

}  // namespace oam
