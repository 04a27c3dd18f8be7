#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <vector>

#include "oam/rng.hpp"
#include "oam/synth_data.hpp"

using oam::EpisodeRecord;
using oam::Rng;
using oam::SynthConfig;
using oam::Tensor;

namespace {

SynthConfig small_config() {
  SynthConfig cfg;
  cfg.num_videos = 4;
  cfg.snippets_per_video = 24;
  cfg.feature_dim = 6;
  cfg.num_verbs = 3;
  cfg.num_nouns = 4;
  cfg.object_categories = 5;
  cfg.detection_noise = 0.2;
  cfg.feature_noise_sigma = 0.3;
  cfg.seed = 11;
  return cfg;
}

std::filesystem::path temp_dir(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / "oam_synth_tests" / name;
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace

TEST_CASE("generation is bitwise deterministic per (seed, index)") {
  const SynthConfig cfg = small_config();
  for (std::size_t index = 0; index < 4; ++index) {
    EpisodeRecord a = oam::generate_episode(cfg, index);
    EpisodeRecord b = oam::generate_episode(cfg, index);
    REQUIRE(a == b);
  }
  REQUIRE_FALSE(oam::generate_episode(cfg, 0) == oam::generate_episode(cfg, 1));
}

TEST_CASE("labels form contiguous segments separated by background") {
  const SynthConfig cfg = small_config();
  for (std::size_t index = 0; index < 8; ++index) {
    EpisodeRecord ep = oam::generate_episode(cfg, index);
    for (std::size_t t = 1; t < ep.labels.size(); ++t) {
      const auto& prev = ep.labels[t - 1];
      const auto& cur = ep.labels[t];
      if (!prev.background && !cur.background) {
        // Inside one segment the triple stays fixed.
        REQUIRE((prev.verb == cur.verb && prev.noun == cur.noun));
      }
      if (cur.background) {
        REQUIRE(cur.verb == 0);
        REQUIRE(cur.noun == 0);
        REQUIRE(cur.action == 0);
      } else {
        REQUIRE(cur.action == oam::synth_action_id(cur.verb, cur.noun, cfg.num_nouns));
      }
    }
  }
}

TEST_CASE("without distractor noise every action snippet carries exactly its noun") {
  SynthConfig cfg = small_config();
  cfg.detection_noise = 0.0;
  for (std::size_t index = 0; index < 8; ++index) {
    EpisodeRecord ep = oam::generate_episode(cfg, index);
    for (std::size_t t = 0; t < ep.labels.size(); ++t) {
      if (ep.labels[t].background) {
        REQUIRE(ep.detections[t].detections.empty());
      } else {
        REQUIRE(ep.detections[t].detections.size() == 1);
        REQUIRE(ep.detections[t].detections[0].category_id == ep.labels[t].noun - 1);
        REQUIRE(ep.detections[t].detections[0].confidence >= 0.7);
        REQUIRE(ep.detections[t].detections[0].confidence <= 1.0);
      }
    }
  }
}

TEST_CASE("noise-free episodes are perfectly recoverable by simple oracles") {
  SynthConfig cfg = small_config();
  cfg.detection_noise = 0.0;
  cfg.feature_noise_sigma = 0.0;

  // Rebuild the centers the same way the generator does: nearest-centroid on
  // features must recover the verb, the detection lookup the noun.
  std::vector<std::vector<double>> centers(cfg.num_verbs + 1,
                                           std::vector<double>(cfg.feature_dim));
  {
    Rng crng = Rng(cfg.seed).derive(1);
    for (auto& c : centers)
      for (double& x : c) x = crng.normal();
  }

  for (std::size_t index = 0; index < 50; ++index) {
    EpisodeRecord ep = oam::generate_episode(cfg, index);
    for (std::size_t t = 0; t < ep.labels.size(); ++t) {
      double best = 1e300;
      int best_verb = -1;
      for (std::size_t v = 0; v < centers.size(); ++v) {
        double dist = 0.0;
        for (std::size_t j = 0; j < cfg.feature_dim; ++j) {
          const double d = ep.features.at(t, j) - centers[v][j];
          dist += d * d;
        }
        if (dist < best) {
          best = dist;
          best_verb = static_cast<int>(v);
        }
      }
      REQUIRE(best_verb == ep.labels[t].verb);

      if (!ep.labels[t].background)
        REQUIRE(ep.detections[t].detections.at(0).category_id == ep.labels[t].noun - 1);
    }
  }
}

TEST_CASE("every generated detection is well formed") {
  const SynthConfig cfg = small_config();
  for (std::size_t index = 0; index < 10; ++index) {
    EpisodeRecord ep = oam::generate_episode(cfg, index);
    for (const auto& sd : ep.detections)
      for (const auto& d : sd.detections) {
        REQUIRE(d.confidence >= 0.0);
        REQUIRE(d.confidence <= 1.0);
        REQUIRE(d.category_id >= 0);
        REQUIRE(d.category_id < static_cast<int>(cfg.object_categories));
        REQUIRE(d.bbox[0] < d.bbox[2]);
        REQUIRE(d.bbox[1] < d.bbox[3]);
      }
  }
}

TEST_CASE("a dataset round-trips through disk field-exactly") {
  const SynthConfig cfg = small_config();
  std::vector<EpisodeRecord> records;
  for (std::size_t i = 0; i < 10; ++i) records.push_back(oam::generate_episode(cfg, i));
  const auto dir = temp_dir("roundtrip");
  oam::write_dataset(records, dir.string());
  auto loaded = oam::read_dataset(dir.string());
  REQUIRE(loaded.size() == records.size());
  for (std::size_t i = 0; i < records.size(); ++i) REQUIRE(loaded[i] == records[i]);
}

TEST_CASE("a truncated feature file is a format error naming the file") {
  const SynthConfig cfg = small_config();
  std::vector<EpisodeRecord> records{oam::generate_episode(cfg, 0)};
  const auto dir = temp_dir("truncated");
  oam::write_dataset(records, dir.string());
  const auto victim = dir / (records[0].video_id + ".oadf");
  std::filesystem::resize_file(victim, std::filesystem::file_size(victim) - 7);
  REQUIRE_THROWS_MATCHES(
      oam::read_dataset(dir.string()), oam::FormatError,
      Catch::Matchers::MessageMatches(
          Catch::Matchers::ContainsSubstring(records[0].video_id + ".oadf")));
}

TEST_CASE("an empty directory is a dataset-not-found error") {
  const auto dir = temp_dir("empty");
  REQUIRE_THROWS_MATCHES(oam::read_dataset(dir.string()), oam::DataError,
                         Catch::Matchers::MessageMatches(
                             Catch::Matchers::ContainsSubstring("dataset not found")));
}

TEST_CASE("missing companion files are data errors") {
  const SynthConfig cfg = small_config();
  std::vector<EpisodeRecord> records{oam::generate_episode(cfg, 0)};
  const auto dir = temp_dir("missing");
  oam::write_dataset(records, dir.string());
  std::filesystem::remove(dir / "labels.csv");
  REQUIRE_THROWS_AS(oam::read_dataset(dir.string()), oam::DataError);
}

TEST_CASE("labels csv surfaces malformed rows") {
  const auto dir = temp_dir("badcsv");
  std::ofstream os(dir / "labels.csv");
  os << "video_id,snippet_index,verb,noun,action,background\n";
  os << "v0000,0,not_a_number,1,1,0\n";
  os.close();
  REQUIRE_THROWS_AS(oam::read_labels_csv((dir / "labels.csv").string()), oam::ParseError);
}
