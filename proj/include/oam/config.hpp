#pragma once

#include <cstdint>
#include <fstream>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "oam/errors.hpp"
#include "oam/model.hpp"
#include "oam/synth_data.hpp"

namespace oam {

struct TrainConfig {
  double lr = 2e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  std::int64_t steps = 2000;
  std::size_t window_snippets = 32;  // snippets consumed per training step
  std::size_t grad_accum = 1;
  std::int64_t log_every = 50;
  std::uint64_t seed = 7;
};

struct DataConfig {
  std::string dir;  // dataset directory for train/eval
  SynthConfig synth;
  std::size_t val_videos = 50;
};

struct EvalConfig {
  std::string report = "report.json";
};

// Complete run configuration. JSON file plus --set overrides; unknown keys
// are rejected and every run writes its resolved form next to its outputs.
struct RunConfig {
  ModelConfig model;
  std::size_t num_verbs = 8;  // real classes; head sizes add the background slot
  std::size_t num_nouns = 12;
  TrainConfig train;
  DataConfig data;
  EvalConfig eval;
};

namespace detail {

inline void reject_unknown_keys(const nlohmann::json& j, const std::set<std::string>& known,
                                const std::string& scope) {
  for (auto it = j.begin(); it != j.end(); ++it)
    if (!known.count(it.key()))
      throw ConfigError("unknown config key '" + (scope.empty() ? "" : scope + ".") +
                        it.key() + "'");
}

template <typename V>
void maybe(const nlohmann::json& j, const char* key, V& out) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<V>();
  } catch (const nlohmann::json::exception&) {
    throw ConfigError(std::string("config key '") + key + "' has the wrong type");
  }
}

}  // namespace detail

inline RunConfig parse_run_config(const nlohmann::json& j) {
  RunConfig cfg;
  // Desk-scale defaults for the runnable pipeline; the module itself defaults
  // to the full embedding width when constructed directly.
  cfg.model.oa.embed_dim = 32;
  detail::reject_unknown_keys(j, {"model", "train", "data", "eval"}, "");

  if (j.contains("model")) {
    const auto& m = j.at("model");
    detail::reject_unknown_keys(
        m,
        {"num_queries", "embed_dim", "num_heads", "ffn_mult", "num_blocks",
         "self_attention", "positional_encoding", "feature_dim", "hidden_dim",
         "num_categories", "num_verbs", "num_nouns", "cues", "cue_window", "integration",
         "object_aggregation", "object_proj_dim"},
        "model");
    detail::maybe(m, "num_queries", cfg.model.oa.num_queries);
    detail::maybe(m, "embed_dim", cfg.model.oa.embed_dim);
    detail::maybe(m, "num_heads", cfg.model.oa.num_heads);
    detail::maybe(m, "ffn_mult", cfg.model.oa.ffn_mult);
    detail::maybe(m, "num_blocks", cfg.model.oa.num_blocks);
    detail::maybe(m, "self_attention", cfg.model.oa.self_attention);
    detail::maybe(m, "positional_encoding", cfg.model.oa.positional_encoding);
    detail::maybe(m, "feature_dim", cfg.model.feature_dim);
    bool hidden_given = m.contains("hidden_dim");
    detail::maybe(m, "hidden_dim", cfg.model.hidden_dim);
    if (!hidden_given) cfg.model.hidden_dim = cfg.model.oa.embed_dim;
    detail::maybe(m, "num_categories", cfg.model.categories);
    detail::maybe(m, "num_verbs", cfg.num_verbs);
    detail::maybe(m, "num_nouns", cfg.num_nouns);
    if (m.contains("cues")) cfg.model.cue_mode = cue_mode_from_string(m.at("cues"));
    detail::maybe(m, "cue_window", cfg.model.cue_window);
    if (m.contains("integration"))
      cfg.model.integration = integration_from_string(m.at("integration"));
    if (m.contains("object_aggregation"))
      cfg.model.aggregation = score_aggregation_from_string(m.at("object_aggregation"));
    detail::maybe(m, "object_proj_dim", cfg.model.object_proj_dim);
  } else {
    cfg.model.hidden_dim = cfg.model.oa.embed_dim;
  }
  cfg.model.head_sizes = HeadSizes{cfg.num_verbs + 1, cfg.num_nouns + 1,
                                   cfg.num_verbs * cfg.num_nouns + 1};

  if (j.contains("train")) {
    const auto& t = j.at("train");
    detail::reject_unknown_keys(t,
                                {"lr", "beta1", "beta2", "eps", "steps", "window_snippets",
                                 "grad_accum", "log_every", "seed"},
                                "train");
    detail::maybe(t, "lr", cfg.train.lr);
    detail::maybe(t, "beta1", cfg.train.beta1);
    detail::maybe(t, "beta2", cfg.train.beta2);
    detail::maybe(t, "eps", cfg.train.eps);
    detail::maybe(t, "steps", cfg.train.steps);
    detail::maybe(t, "window_snippets", cfg.train.window_snippets);
    detail::maybe(t, "grad_accum", cfg.train.grad_accum);
    detail::maybe(t, "log_every", cfg.train.log_every);
    detail::maybe(t, "seed", cfg.train.seed);
  }

  if (j.contains("data")) {
    const auto& d = j.at("data");
    detail::reject_unknown_keys(d, {"dir", "val_videos", "synth"}, "data");
    detail::maybe(d, "dir", cfg.data.dir);
    detail::maybe(d, "val_videos", cfg.data.val_videos);
    if (d.contains("synth")) {
      const auto& s = d.at("synth");
      detail::reject_unknown_keys(s,
                                  {"num_videos", "snippets_per_video", "feature_dim",
                                   "num_verbs", "num_nouns", "object_categories",
                                   "detection_noise", "feature_noise_sigma", "seed"},
                                  "data.synth");
      detail::maybe(s, "num_videos", cfg.data.synth.num_videos);
      detail::maybe(s, "snippets_per_video", cfg.data.synth.snippets_per_video);
      detail::maybe(s, "feature_dim", cfg.data.synth.feature_dim);
      detail::maybe(s, "num_verbs", cfg.data.synth.num_verbs);
      detail::maybe(s, "num_nouns", cfg.data.synth.num_nouns);
      detail::maybe(s, "object_categories", cfg.data.synth.object_categories);
      detail::maybe(s, "detection_noise", cfg.data.synth.detection_noise);
      detail::maybe(s, "feature_noise_sigma", cfg.data.synth.feature_noise_sigma);
      detail::maybe(s, "seed", cfg.data.synth.seed);
    }
  }

  if (j.contains("eval")) {
    const auto& e = j.at("eval");
    detail::reject_unknown_keys(e, {"report"}, "eval");
    detail::maybe(e, "report", cfg.eval.report);
  }

  if (cfg.train.steps < 0) throw ConfigError("train.steps must be >= 0");
  if (cfg.train.window_snippets < 1) throw ConfigError("train.window_snippets must be >= 1");
  if (cfg.train.grad_accum < 1) throw ConfigError("train.grad_accum must be >= 1");
  if (cfg.train.lr <= 0) throw ConfigError("train.lr must be > 0");
  if (cfg.num_verbs < 1 || cfg.num_nouns < 1)
    throw ConfigError("model.num_verbs and model.num_nouns must be >= 1");
  cfg.model.validate();
  return cfg;
}

inline nlohmann::ordered_json to_json(const RunConfig& cfg) {
  nlohmann::ordered_json j;
  auto& m = j["model"];
  m["num_queries"] = cfg.model.oa.num_queries;
  m["embed_dim"] = cfg.model.oa.embed_dim;
  m["num_heads"] = cfg.model.oa.num_heads;
  m["ffn_mult"] = cfg.model.oa.ffn_mult;
  m["num_blocks"] = cfg.model.oa.num_blocks;
  m["self_attention"] = cfg.model.oa.self_attention;
  m["positional_encoding"] = cfg.model.oa.positional_encoding;
  m["feature_dim"] = cfg.model.feature_dim;
  m["hidden_dim"] = cfg.model.hidden_dim;
  m["num_categories"] = cfg.model.categories;
  m["num_verbs"] = cfg.num_verbs;
  m["num_nouns"] = cfg.num_nouns;
  m["cues"] = to_string(cfg.model.cue_mode);
  m["cue_window"] = cfg.model.cue_window;
  m["integration"] = to_string(cfg.model.integration);
  m["object_aggregation"] = cfg.model.aggregation == ScoreAggregation::Max    ? "max"
                            : cfg.model.aggregation == ScoreAggregation::Sum ? "sum"
                                                                             : "mean";
  m["object_proj_dim"] = cfg.model.object_proj_dim;
  auto& t = j["train"];
  t["lr"] = cfg.train.lr;
  t["beta1"] = cfg.train.beta1;
  t["beta2"] = cfg.train.beta2;
  t["eps"] = cfg.train.eps;
  t["steps"] = cfg.train.steps;
  t["window_snippets"] = cfg.train.window_snippets;
  t["grad_accum"] = cfg.train.grad_accum;
  t["log_every"] = cfg.train.log_every;
  t["seed"] = cfg.train.seed;
  auto& d = j["data"];
  d["dir"] = cfg.data.dir;
  d["val_videos"] = cfg.data.val_videos;
  auto& s = d["synth"];
  s["num_videos"] = cfg.data.synth.num_videos;
  s["snippets_per_video"] = cfg.data.synth.snippets_per_video;
  s["feature_dim"] = cfg.data.synth.feature_dim;
  s["num_verbs"] = cfg.data.synth.num_verbs;
  s["num_nouns"] = cfg.data.synth.num_nouns;
  s["object_categories"] = cfg.data.synth.object_categories;
  s["detection_noise"] = cfg.data.synth.detection_noise;
  s["feature_noise_sigma"] = cfg.data.synth.feature_noise_sigma;
  s["seed"] = cfg.data.synth.seed;
  j["eval"]["report"] = cfg.eval.report;
  return j;
}

// Applies one "--set path.to.key=value" override onto the raw config JSON.
// The value is parsed as JSON when possible, otherwise taken as a string.
inline void apply_override(nlohmann::json& j, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0)
    throw ConfigError("--set expects key=value, got '" + assignment + "'");
  const std::string path = assignment.substr(0, eq);
  const std::string raw = assignment.substr(eq + 1);
  nlohmann::json value = nlohmann::json::parse(raw, nullptr, false);
  if (value.is_discarded()) value = raw;

  nlohmann::json* node = &j;
  std::size_t start = 0;
  while (true) {
    const auto dot = path.find('.', start);
    const std::string key = path.substr(start, dot == std::string::npos ? dot : dot - start);
    if (key.empty()) throw ConfigError("--set path '" + path + "' has an empty segment");
    if (dot == std::string::npos) {
      (*node)[key] = value;
      break;
    }
    node = &(*node)[key];
    start = dot + 1;
  }
}

inline nlohmann::json load_config_file(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw ConfigError("cannot open config file '" + path + "'");
  nlohmann::json j = nlohmann::json::parse(is, nullptr, false);
  if (j.is_discarded()) throw ConfigError("config file '" + path + "' is not valid JSON");
  if (!j.is_object()) throw ConfigError("config file '" + path + "' must hold a JSON object");
  return j;
}

}  // namespace oam
