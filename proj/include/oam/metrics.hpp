#pragma once

#include <algorithm>
#include <array>
#include <cstddef>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "oam/errors.hpp"
#include "oam/tensor.hpp"

namespace oam {

constexpr int kBackgroundClass = 0;

// Verb, noun and action ids for one snippet. Background snippets carry the
// reserved index 0 in all three slots.
struct LabelTriple {
  int verb = 0;
  int noun = 0;
  int action = 0;
  bool background = true;

  bool operator==(const LabelTriple& o) const {
    return verb == o.verb && noun == o.noun && action == o.action &&
           background == o.background;
  }
};

enum class Head { Verb, Noun, Action };

inline const char* head_name(Head h) {
  switch (h) {
    case Head::Verb: return "verb";
    case Head::Noun: return "noun";
    default: return "action";
  }
}

// The five highest-logit class ids, descending, ties broken by ascending id.
// The background id is excluded before selection, so at least five
// non-background classes must exist.
template <typename T>
std::vector<int> top5_ids(const Tensor<T>& logits) {
  const std::size_t c = logits.numel();
  if (c < 6)
    throw ConfigError("top5_ids: need at least 5 non-background classes, got " +
                      std::to_string(c) + " total");
  std::vector<int> ids;
  ids.reserve(c - 1);
  for (std::size_t i = 0; i < c; ++i)
    if (static_cast<int>(i) != kBackgroundClass) ids.push_back(static_cast<int>(i));
  std::partial_sort(ids.begin(), ids.begin() + 5, ids.end(), [&](int a, int b) {
    if (logits[a] != logits[b]) return logits[a] > logits[b];
    return a < b;
  });
  ids.resize(5);
  return ids;
}

// One evaluated snippet: per-head top-5 predictions plus the ground truth.
struct PredictionEntry {
  std::string video_id;
  int snippet_index = 0;
  std::array<std::vector<int>, 3> top5;  // indexed by Head
  LabelTriple label;
};

struct PredictionLog {
  std::vector<PredictionEntry> entries;

  void sort() {
    std::sort(entries.begin(), entries.end(),
              [](const PredictionEntry& a, const PredictionEntry& b) {
                if (a.video_id != b.video_id) return a.video_id < b.video_id;
                return a.snippet_index < b.snippet_index;
              });
  }
};

inline int label_for_head(const LabelTriple& l, Head h) {
  switch (h) {
    case Head::Verb: return l.verb;
    case Head::Noun: return l.noun;
    default: return l.action;
  }
}

// Mean Top-5 Recall: per class with at least one non-background ground-truth
// instance, the fraction of its instances whose top-5 contains it; the metric
// is the unweighted mean of those per-class recalls.
inline double mean_top5_recall(const PredictionLog& log, Head head,
                               std::size_t* classes_evaluated = nullptr) {
  std::map<int, std::pair<std::size_t, std::size_t>> per_class;  // class -> (hits, total)
  for (const PredictionEntry& e : log.entries) {
    if (e.label.background) continue;
    const int truth = label_for_head(e.label, head);
    auto& [hits, total] = per_class[truth];
    ++total;
    const auto& ids = e.top5[static_cast<std::size_t>(head)];
    if (std::find(ids.begin(), ids.end(), truth) != ids.end()) ++hits;
  }
  if (per_class.empty())
    throw EvalError("mean_top5_recall: no non-background ground-truth snippets for head '" +
                    std::string(head_name(head)) + "'");
  double acc = 0.0;
  for (const auto& [cls, counts] : per_class)
    acc += static_cast<double>(counts.first) / static_cast<double>(counts.second);
  if (classes_evaluated) *classes_evaluated = per_class.size();
  return acc / static_cast<double>(per_class.size());
}

// Report schema:
// {"verb": f, "noun": f, "action": f, "num_snippets": n,
//  "num_classes_evaluated": {"verb": n, "noun": n, "action": n}}
inline nlohmann::ordered_json metric_report(const PredictionLog& log) {
  nlohmann::ordered_json rep;
  nlohmann::ordered_json classes;
  for (Head h : {Head::Verb, Head::Noun, Head::Action}) {
    std::size_t n = 0;
    rep[head_name(h)] = mean_top5_recall(log, h, &n);
    classes[head_name(h)] = n;
  }
  rep["num_snippets"] = log.entries.size();
  rep["num_classes_evaluated"] = std::move(classes);
  return rep;
}

}  // namespace oam
