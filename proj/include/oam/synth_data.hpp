#pragma once

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "oam/errors.hpp"
#include "oam/metrics.hpp"
#include "oam/oadf.hpp"
#include "oam/object_scores.hpp"
#include "oam/rng.hpp"
#include "oam/tensor.hpp"

namespace oam {

// Synthetic episode generator. The construction plants a clean causal split:
// features carry the verb (verb-conditional Gaussian cluster centers), while
// detections carry the noun (the noun's object category appears with high
// confidence). Noun identity is therefore statistically independent of the
// features, so a detection-blind model cannot beat chance on nouns.
struct SynthConfig {
  std::size_t num_videos = 200;
  std::size_t snippets_per_video = 64;
  std::size_t feature_dim = 32;
  std::size_t num_verbs = 8;
  std::size_t num_nouns = 12;
  std::size_t object_categories = 12;
  double detection_noise = 0.1;      // per-category distractor probability
  double feature_noise_sigma = 0.5;  // stddev around the verb center
  std::uint64_t seed = 7;

  std::size_t num_actions() const { return num_verbs * num_nouns; }

  void validate() const {
    if (num_videos < 1 || snippets_per_video < 1 || feature_dim < 1 || num_verbs < 1 ||
        num_nouns < 1 || object_categories < 1)
      throw ConfigError("synth: all counts must be >= 1");
    if (detection_noise < 0.0 || detection_noise > 1.0)
      throw ConfigError("synth: detection_noise must lie in [0, 1]");
    if (feature_noise_sigma < 0.0)
      throw ConfigError("synth: feature_noise_sigma must be >= 0");
    if (num_nouns > object_categories)
      throw ConfigError("synth: num_nouns " + std::to_string(num_nouns) +
                        " exceeds object_categories " + std::to_string(object_categories) +
                        " (each noun needs its own category)");
  }
};

// One video: features [T x D], per-snippet detections and labels.
struct EpisodeRecord {
  std::string video_id;
  Tensor<float> features;
  std::vector<SnippetDetections> detections;  // length T, possibly empty lists
  std::vector<LabelTriple> labels;            // length T

  bool operator==(const EpisodeRecord& o) const {
    return video_id == o.video_id && features == o.features && detections == o.detections &&
           labels == o.labels;
  }
};

inline int synth_action_id(int verb, int noun, std::size_t num_nouns) {
  return (verb - 1) * static_cast<int>(num_nouns) + (noun - 1) + 1;
}

namespace detail {

// Rng stream tags; children are derived, never shared.
constexpr std::uint64_t kCenterStream = 1;
constexpr std::uint64_t kEpisodeStream = 2;
constexpr std::uint64_t kSegmentStream = 1;
constexpr std::uint64_t kFeatureStream = 2;
constexpr std::uint64_t kDetectionStream = 3;

inline void random_box(Rng& rng, double* bbox) {
  bbox[0] = rng.uniform(0.0, 0.49);
  bbox[2] = rng.uniform(bbox[0] + 0.01, 1.0);
  bbox[1] = rng.uniform(0.0, 0.49);
  bbox[3] = rng.uniform(bbox[1] + 0.01, 1.0);
}

// Cluster centers for verb ids 0..num_verbs (0 is background), shared by all
// episodes of one seed.
inline std::vector<std::vector<double>> verb_centers(const SynthConfig& cfg) {
  Rng rng = Rng(cfg.seed).derive(kCenterStream);
  std::vector<std::vector<double>> centers(cfg.num_verbs + 1,
                                           std::vector<double>(cfg.feature_dim));
  for (auto& c : centers)
    for (double& x : c) x = rng.normal();
  return centers;
}

}  // namespace detail

inline std::string synth_video_id(std::size_t index) {
  std::ostringstream os;
  os << 'v';
  std::string n = std::to_string(index);
  for (std::size_t i = n.size(); i < 4; ++i) os << '0';
  os << n;
  return os.str();
}

// Fully determined by (cfg.seed, index): labels are contiguous action
// segments separated by background, features are drawn around the verb's
// center, detections contain the noun's category at confidence U(0.7, 1.0)
// plus per-category distractors with probability detection_noise.
inline EpisodeRecord generate_episode(const SynthConfig& cfg, std::size_t index) {
  cfg.validate();
  const std::size_t t_total = cfg.snippets_per_video;
  EpisodeRecord ep;
  ep.video_id = synth_video_id(index);

  Rng ep_rng = Rng(cfg.seed).derive(detail::kEpisodeStream).derive(index);
  Rng seg_rng = ep_rng.derive(detail::kSegmentStream);
  Rng feat_rng = ep_rng.derive(detail::kFeatureStream);
  Rng det_rng = ep_rng.derive(detail::kDetectionStream);

  // Segment layout.
  ep.labels.assign(t_total, LabelTriple{});
  std::size_t t = seg_rng.below(4);
  while (t < t_total) {
    const std::size_t len = 4 + seg_rng.below(7);
    const int verb = 1 + static_cast<int>(seg_rng.below(cfg.num_verbs));
    const int noun = 1 + static_cast<int>(seg_rng.below(cfg.num_nouns));
    const int action = synth_action_id(verb, noun, cfg.num_nouns);
    for (std::size_t k = 0; k < len && t + k < t_total; ++k)
      ep.labels[t + k] = LabelTriple{verb, noun, action, false};
    t += len + 1 + seg_rng.below(3);
  }

  // Features around the verb center (background has its own center).
  const auto centers = detail::verb_centers(cfg);
  ep.features = Tensor<float>::zeros({t_total, cfg.feature_dim});
  for (std::size_t s = 0; s < t_total; ++s) {
    const auto& c = centers[static_cast<std::size_t>(ep.labels[s].verb)];
    for (std::size_t j = 0; j < cfg.feature_dim; ++j)
      ep.features.at(s, j) =
          static_cast<float>(c[j] + cfg.feature_noise_sigma * feat_rng.normal());
  }

  // Detections: the true noun's category on action snippets, distractors on
  // every snippet.
  ep.detections.reserve(t_total);
  for (std::size_t s = 0; s < t_total; ++s) {
    SnippetDetections sd;
    sd.video_id = ep.video_id;
    sd.snippet_index = static_cast<int>(s);
    if (!ep.labels[s].background) {
      Detection d;
      d.category_id = ep.labels[s].noun - 1;
      d.confidence = det_rng.uniform(0.7, 1.0);
      detail::random_box(det_rng, d.bbox);
      sd.detections.push_back(d);
    }
    // Distractors score below the true-detection floor, the usual shape of
    // detector false positives.
    for (std::size_t c = 0; c < cfg.object_categories; ++c) {
      if (det_rng.unit() < cfg.detection_noise) {
        Detection d;
        d.category_id = static_cast<int>(c);
        d.confidence = det_rng.uniform(0.0, 0.7);
        detail::random_box(det_rng, d.bbox);
        sd.detections.push_back(d);
      }
    }
    ep.detections.push_back(std::move(sd));
  }
  return ep;
}

// ---- on-disk layout -------------------------------------------------------
// <dir>/<video_id>.oadf      features, one file per video
// <dir>/detections.jsonl     all videos, one snippet per line
// <dir>/labels.csv           video_id,snippet_index,verb,noun,action,background

inline void write_labels_csv(const std::string& path,
                             const std::vector<EpisodeRecord>& records) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw DataError("cannot write labels file '" + path + "'");
  os << "video_id,snippet_index,verb,noun,action,background\n";
  for (const EpisodeRecord& ep : records)
    for (std::size_t t = 0; t < ep.labels.size(); ++t) {
      const LabelTriple& l = ep.labels[t];
      os << ep.video_id << ',' << t << ',' << l.verb << ',' << l.noun << ',' << l.action
         << ',' << (l.background ? 1 : 0) << '\n';
    }
}

inline std::map<std::string, std::map<int, LabelTriple>> read_labels_csv(
    const std::string& path) {
  std::ifstream is(path);
  if (!is) throw DataError("cannot open labels file '" + path + "'");
  std::string line;
  if (!std::getline(is, line) || line != "video_id,snippet_index,verb,noun,action,background")
    throw ParseError("labels file '" + path + "': bad or missing header");
  std::map<std::string, std::map<int, LabelTriple>> out;
  std::size_t lineno = 1;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (cells.size() != 6)
      throw ParseError("labels file '" + path + "' line " + std::to_string(lineno) +
                       ": expected 6 fields, got " + std::to_string(cells.size()));
    try {
      const int snippet = std::stoi(cells[1]);
      LabelTriple l;
      l.verb = std::stoi(cells[2]);
      l.noun = std::stoi(cells[3]);
      l.action = std::stoi(cells[4]);
      l.background = std::stoi(cells[5]) != 0;
      if (l.background && (l.verb != 0 || l.noun != 0 || l.action != 0))
        throw ParseError("labels file '" + path + "' line " + std::to_string(lineno) +
                         ": background rows must carry ids 0,0,0");
      if (!out[cells[0]].emplace(snippet, l).second)
        throw DataError("labels file '" + path + "' line " + std::to_string(lineno) +
                        ": duplicate snippet " + cells[1] + " for video '" + cells[0] + "'");
    } catch (const std::invalid_argument&) {
      throw ParseError("labels file '" + path + "' line " + std::to_string(lineno) +
                       ": non-numeric field");
    }
  }
  return out;
}

inline void write_dataset(const std::vector<EpisodeRecord>& records, const std::string& dir) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);
  std::ofstream det(fs::path(dir) / "detections.jsonl", std::ios::binary);
  if (!det) throw DataError("cannot write detections under '" + dir + "'");
  for (const EpisodeRecord& ep : records) {
    write_oadf((fs::path(dir) / (ep.video_id + ".oadf")).string(), ep.features);
    for (const SnippetDetections& sd : ep.detections) write_detections_line(det, sd);
  }
  det.close();
  write_labels_csv((fs::path(dir) / "labels.csv").string(), records);
}

inline std::vector<EpisodeRecord> read_dataset(const std::string& dir) {
  namespace fs = std::filesystem;
  if (!fs::is_directory(dir)) throw DataError("dataset not found: '" + dir + "' is not a directory");
  std::vector<std::string> stems;
  for (const auto& entry : fs::directory_iterator(dir))
    if (entry.is_regular_file() && entry.path().extension() == ".oadf")
      stems.push_back(entry.path().stem().string());
  if (stems.empty())
    throw DataError("dataset not found: no .oadf feature files in '" + dir + "'");
  std::sort(stems.begin(), stems.end());

  const std::string det_path = (fs::path(dir) / "detections.jsonl").string();
  const std::string lbl_path = (fs::path(dir) / "labels.csv").string();
  if (!fs::exists(det_path)) throw DataError("dataset '" + dir + "' lacks detections.jsonl");
  if (!fs::exists(lbl_path)) throw DataError("dataset '" + dir + "' lacks labels.csv");
  DetectionMap dets = load_detections(det_path);
  auto labels = read_labels_csv(lbl_path);

  for (const auto& [video, rows] : labels)
    if (std::find(stems.begin(), stems.end(), video) == stems.end())
      throw DataError("labels reference unknown video '" + video + "'");

  std::vector<EpisodeRecord> out;
  out.reserve(stems.size());
  for (const std::string& id : stems) {
    EpisodeRecord ep;
    ep.video_id = id;
    ep.features = read_oadf((fs::path(dir) / (id + ".oadf")).string());
    const std::size_t t_total = ep.features.rows();
    auto lit = labels.find(id);
    if (lit == labels.end()) throw DataError("no labels for video '" + id + "'");
    ep.labels.assign(t_total, LabelTriple{});
    for (std::size_t t = 0; t < t_total; ++t) {
      auto rit = lit->second.find(static_cast<int>(t));
      if (rit == lit->second.end())
        throw DataError("video '" + id + "' lacks a label for snippet " + std::to_string(t));
      ep.labels[t] = rit->second;
    }
    if (lit->second.size() != t_total)
      throw DataError("video '" + id + "' has labels beyond its " + std::to_string(t_total) +
                      " snippets");
    ep.detections.reserve(t_total);
    for (std::size_t t = 0; t < t_total; ++t) {
      auto dit = dets.find({id, static_cast<int>(t)});
      if (dit != dets.end())
        ep.detections.push_back(dit->second);
      else
        ep.detections.push_back(SnippetDetections{id, static_cast<int>(t), {}});
    }
    out.push_back(std::move(ep));
  }
  return out;
}

}  // namespace oam
