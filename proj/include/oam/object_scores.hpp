#pragma once

#include <algorithm>
#include <cstdint>
#include <fstream>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "oam/errors.hpp"
#include "oam/tensor.hpp"

namespace oam {

// One detected bounding box. bbox is ingested and validated but unused by the
// model; it is kept so detection files stay compatible with richer consumers.
struct Detection {
  int category_id = 0;
  double confidence = 0.0;
  double bbox[4] = {0.0, 0.0, 0.0, 0.0};  // x1, y1, x2, y2 in [0, 1]

  bool operator==(const Detection& o) const {
    return category_id == o.category_id && confidence == o.confidence &&
           bbox[0] == o.bbox[0] && bbox[1] == o.bbox[1] && bbox[2] == o.bbox[2] &&
           bbox[3] == o.bbox[3];
  }
};

// Detections anchored to the last frame of one snippet.
struct SnippetDetections {
  std::string video_id;
  int snippet_index = 0;
  std::vector<Detection> detections;

  bool operator==(const SnippetDetections& o) const {
    return video_id == o.video_id && snippet_index == o.snippet_index &&
           detections == o.detections;
  }
};

using DetectionKey = std::pair<std::string, int>;
using DetectionMap = std::map<DetectionKey, SnippetDetections>;

enum class ScoreAggregation { Max, Sum, Mean };

inline ScoreAggregation score_aggregation_from_string(const std::string& s) {
  if (s == "max") return ScoreAggregation::Max;
  if (s == "sum") return ScoreAggregation::Sum;
  if (s == "mean") return ScoreAggregation::Mean;
  throw ConfigError("unknown object aggregation rule '" + s + "' (max|sum|mean)");
}

// Collapses a snippet's detections into a per-category score vector [1 x C].
// Default rule is per-category max, which keeps entries in [0, 1] and reads
// as "likelihood the object is present". Sum and mean are available for
// ablation; sum may exceed 1. An entry is 0 iff its category never appears.
template <typename T>
Tensor<T> aggregate_scores(const SnippetDetections& dets, std::size_t num_categories,
                           ScoreAggregation rule = ScoreAggregation::Max) {
  Tensor<T> scores = Tensor<T>::zeros({1, num_categories});
  std::vector<int> counts(num_categories, 0);
  for (const Detection& d : dets.detections) {
    if (d.category_id < 0 || static_cast<std::size_t>(d.category_id) >= num_categories)
      throw DataError("detection category " + std::to_string(d.category_id) +
                      " out of range [0, " + std::to_string(num_categories) + ") in video '" +
                      dets.video_id + "' snippet " + std::to_string(dets.snippet_index));
    const std::size_t c = static_cast<std::size_t>(d.category_id);
    const T conf = static_cast<T>(d.confidence);
    switch (rule) {
      case ScoreAggregation::Max:
        scores[c] = std::max(scores[c], conf);
        break;
      case ScoreAggregation::Sum:
      case ScoreAggregation::Mean:
        scores[c] += conf;
        break;
    }
    ++counts[c];
  }
  if (rule == ScoreAggregation::Mean)
    for (std::size_t c = 0; c < num_categories; ++c)
      if (counts[c] > 0) scores[c] /= static_cast<T>(counts[c]);
  return scores;
}

namespace detail {

inline void validate_detection(const Detection& d, const std::string& where) {
  if (d.confidence < 0.0 || d.confidence > 1.0)
    throw ParseError(where + ": field 'confidence' = " + std::to_string(d.confidence) +
                     " outside [0, 1]");
  if (d.category_id < 0)
    throw ParseError(where + ": field 'category_id' must be nonnegative");
  if (!(d.bbox[0] < d.bbox[2]) || !(d.bbox[1] < d.bbox[3]))
    throw ParseError(where + ": field 'bbox' must satisfy x1 < x2 and y1 < y2");
  for (double v : d.bbox)
    if (v < 0.0 || v > 1.0)
      throw ParseError(where + ": field 'bbox' coordinates must lie in [0, 1]");
}

}  // namespace detail

// JSON Lines, one snippet per line:
// {"video_id": str, "snippet_index": int,
//  "detections": [{"category_id": int, "confidence": float, "bbox": [x1,y1,x2,y2]}]}
inline DetectionMap load_detections(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open detections file '" + path + "'");
  DetectionMap out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    const std::string where = path + ":" + std::to_string(lineno);
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(where + ": invalid JSON: " + e.what());
    }
    SnippetDetections sd;
    try {
      sd.video_id = j.at("video_id").get<std::string>();
      sd.snippet_index = j.at("snippet_index").get<int>();
      for (const auto& dj : j.at("detections")) {
        Detection d;
        d.category_id = dj.at("category_id").get<int>();
        d.confidence = dj.at("confidence").get<double>();
        const auto& bb = dj.at("bbox");
        if (!bb.is_array() || bb.size() != 4)
          throw ParseError(where + ": field 'bbox' must be a 4-element array");
        for (int i = 0; i < 4; ++i) d.bbox[i] = bb[i].get<double>();
        detail::validate_detection(d, where);
        sd.detections.push_back(d);
      }
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(where + ": " + e.what());
    }
    if (sd.snippet_index < 0)
      throw ParseError(where + ": field 'snippet_index' must be nonnegative");
    DetectionKey key{sd.video_id, sd.snippet_index};
    if (!out.emplace(key, std::move(sd)).second)
      throw DataError(where + ": duplicate entry for video '" + key.first + "' snippet " +
                      std::to_string(key.second));
  }
  return out;
}

inline void write_detections_line(std::ostream& os, const SnippetDetections& sd) {
  nlohmann::ordered_json j;
  j["video_id"] = sd.video_id;
  j["snippet_index"] = sd.snippet_index;
  auto arr = nlohmann::ordered_json::array();
  for (const Detection& d : sd.detections) {
    nlohmann::ordered_json dj;
    dj["category_id"] = d.category_id;
    dj["confidence"] = d.confidence;
    dj["bbox"] = {d.bbox[0], d.bbox[1], d.bbox[2], d.bbox[3]};
    arr.push_back(std::move(dj));
  }
  j["detections"] = std::move(arr);
  os << j.dump() << '\n';
}

inline void write_detections(const std::string& path, const DetectionMap& map) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw DataError("cannot write detections file '" + path + "'");
  for (const auto& [key, sd] : map) write_detections_line(os, sd);
}

}  // namespace oam
