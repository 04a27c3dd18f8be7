// Acceptance suite for the object-aware online action detection pipeline.
// Runs every criterion end to end, prints one [PASS]/[FAIL] line per
// criterion and exits nonzero if any failed. CLI-level criteria shell out to
// the oad-oam binary (path injected by the build).

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <sys/wait.h>

#include <json.hpp>

#include "oam/checkpoint.hpp"
#include "oam/config.hpp"
#include "oam/heads.hpp"
#include "oam/metrics.hpp"
#include "oam/model.hpp"
#include "oam/oa_module.hpp"
#include "oam/oadf.hpp"
#include "oam/object_scores.hpp"
#include "oam/ops.hpp"
#include "oam/rng.hpp"
#include "oam/synth_data.hpp"

namespace fs = std::filesystem;
using oam::Rng;
using oam::Tensor;

namespace {

int g_failures = 0;

void criterion(int id, bool ok, const std::string& what, const std::string& detail = "") {
  std::cout << (ok ? "[PASS] " : "[FAIL] ") << "criterion " << id << ": " << what;
  if (!detail.empty()) std::cout << " (" << detail << ")";
  std::cout << std::endl;
  if (!ok) ++g_failures;
}

int run_cli(const std::string& args) {
  const std::string cmd = std::string(OAD_OAM_BINARY) + " " + args;
  const int status = std::system(cmd.c_str());
  if (status == -1) return -1;
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& path) {
  std::ifstream is(path, std::ios::binary);
  std::stringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

bool same_bytes(const fs::path& a, const fs::path& b) { return slurp(a) == slurp(b); }

fs::path scratch_root() {
  static fs::path root = [] {
    fs::path p = fs::current_path() / "acceptance_scratch";
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
  }();
  return root;
}

Tensor<float> random_matrix(std::size_t r, std::size_t c, Rng& rng, double lo = -1.0,
                            double hi = 1.0) {
  Tensor<float> t = Tensor<float>::zeros({r, c});
  for (std::size_t i = 0; i < t.numel(); ++i)
    t[i] = static_cast<float>(rng.uniform(lo, hi));
  return t;
}

// ---- criterion 1: gradient correctness through the cli ---------------------

void check_gradcheck() {
  const fs::path out = scratch_root() / "gradcheck.txt";
  const auto start = std::chrono::steady_clock::now();
  const int code = run_cli("gradcheck --seed 7 > " + out.string());
  const double secs =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  const std::string text = slurp(out);
  bool parsed_all = text.find("gradcheck passed") != std::string::npos;
  double worst = 0.0;
  std::istringstream is(text);
  std::string line;
  std::size_t groups = 0;
  while (std::getline(is, line)) {
    const auto pos = line.find("max_rel_err ");
    if (pos == std::string::npos) continue;
    worst = std::max(worst, std::stod(line.substr(pos + 12)));
    ++groups;
  }
  criterion(1, code == 0 && parsed_all && groups > 0 && worst < 1e-4 && secs < 60.0,
            "finite-difference gradient check on the tiny config",
            std::to_string(groups) + " groups, worst " + std::to_string(worst) + ", " +
                std::to_string(secs) + " s");
}

// ---- criterion 2: identity at initialization --------------------------------

void check_identity_at_init() {
  oam::OaConfig cfg;
  cfg.num_queries = 16;
  cfg.embed_dim = 32;
  cfg.num_heads = 4;
  Rng rng(2024);
  oam::ObjectAwareModule<float> module(cfg, 12, rng);
  bool ok = true;
  for (int trial = 0; trial < 100 && ok; ++trial) {
    Tensor<float> f = random_matrix(1, 12, rng, 0.0, 1.0);
    Tensor<float> cues = random_matrix(1 + rng.below(16), 32, rng, -3.0, 3.0);
    oam::Tape<float> tape;
    oam::Val out = module.forward(tape, tape.leaf(f), tape.leaf(cues));
    ok = tape.value(out) == module.queries.value;
  }
  criterion(2, ok, "zero-initialized module is the bitwise identity on its queries",
            "100 random (scores, cues) inputs");
}

// ---- criterion 3: streaming causality ---------------------------------------

void check_causality() {
  const fs::path dir = scratch_root() / "causality";
  fs::create_directories(dir);

  nlohmann::json base;
  base["model"] = {{"num_queries", 4}, {"embed_dim", 16},    {"num_heads", 2},
                   {"ffn_mult", 2},    {"feature_dim", 8},   {"hidden_dim", 16},
                   {"num_categories", 6}, {"num_verbs", 5},  {"num_nouns", 6},
                   {"cue_window", 4},  {"integration", "oa_module"}};
  oam::RunConfig cfg = oam::parse_run_config(base);

  bool ok = true;
  std::string detail;
  Rng rng(33);
  for (int trial = 0; trial < 20 && ok; ++trial) {
    // A fresh random checkpoint: jitter every parameter so outputs genuinely
    // depend on the stream history.
    oam::OadModel<float> model(cfg.model, 100 + trial);
    for (oam::Parameter<float>* p : model.params())
      for (std::size_t i = 0; i < p->value.numel(); ++i)
        p->value[i] += static_cast<float>(0.3 * rng.normal());
    const fs::path ckpt = dir / ("ck" + std::to_string(trial) + ".oamc");
    oam::save_checkpoint(ckpt.string(), model.params(), oam::to_json(cfg));

    const std::size_t t_total = 12;
    Tensor<float> features = random_matrix(t_total, 8, rng);
    oam::DetectionMap dets;
    for (std::size_t t = 0; t < t_total; ++t) {
      oam::SnippetDetections sd;
      sd.video_id = "cause";
      sd.snippet_index = static_cast<int>(t);
      if (rng.unit() < 0.7) {
        oam::Detection d;
        d.category_id = static_cast<int>(rng.below(6));
        d.confidence = rng.uniform(0.2, 1.0);
        d.bbox[0] = 0.1; d.bbox[1] = 0.1; d.bbox[2] = 0.6; d.bbox[3] = 0.6;
        sd.detections.push_back(d);
      }
      dets[{sd.video_id, sd.snippet_index}] = sd;
    }
    const std::size_t cut = rng.below(t_total);  // keep snippets 0..cut

    const fs::path full_feat = dir / "cause.oadf";
    oam::write_oadf(full_feat.string(), features);
    Tensor<float> trunc = Tensor<float>::zeros({cut + 1, 8});
    for (std::size_t i = 0; i < (cut + 1) * 8; ++i) trunc[i] = features[i];
    const fs::path cut_dir = dir / "cut";
    fs::create_directories(cut_dir);
    const fs::path trunc_feat = cut_dir / "cause.oadf";
    oam::write_oadf(trunc_feat.string(), trunc);

    const fs::path det_full = dir / "cause_full.jsonl";
    oam::write_detections(det_full.string(), dets);
    oam::DetectionMap dets_cut;
    for (const auto& [key, sd] : dets)
      if (key.second <= static_cast<int>(cut)) dets_cut[key] = sd;
    const fs::path det_cut = cut_dir / "cause_cut.jsonl";
    oam::write_detections(det_cut.string(), dets_cut);

    const fs::path out_full = dir / "out_full.jsonl";
    const fs::path out_cut = dir / "out_cut.jsonl";
    if (run_cli("stream --checkpoint " + ckpt.string() + " --features " +
                full_feat.string() + " --detections " + det_full.string() + " > " +
                out_full.string() + " 2> /dev/null") != 0 ||
        run_cli("stream --checkpoint " + ckpt.string() + " --features " +
                trunc_feat.string() + " --detections " + det_cut.string() + " > " +
                out_cut.string() + " 2> /dev/null") != 0) {
      ok = false;
      detail = "stream invocation failed";
      break;
    }
    std::istringstream fa(slurp(out_full)), fb(slurp(out_cut));
    std::string la, lb;
    for (std::size_t t = 0; t <= cut; ++t) {
      if (!std::getline(fa, la) || !std::getline(fb, lb) || la != lb) {
        ok = false;
        detail = "divergence at snippet " + std::to_string(t) + " with cut " +
                 std::to_string(cut);
        break;
      }
    }
  }
  criterion(3, ok, "stream output is byte-identical under input truncation",
            ok ? "20 random checkpoints and truncation points" : detail);
}

// ---- criterion 4: metric oracle equivalence ---------------------------------

void check_metric_oracles() {
  Rng rng(44);
  bool top5_ok = true;
  for (int trial = 0; trial < 1000 && top5_ok; ++trial) {
    const std::size_t c = 6 + rng.below(40);
    Tensor<float> logits = Tensor<float>::zeros({c});
    for (std::size_t i = 0; i < c; ++i)
      logits[i] = static_cast<float>(rng.uniform(-4.0, 4.0));
    if (trial % 4 == 0) logits[1 + rng.below(c - 1)] = logits[1 + rng.below(c - 1)];

    std::vector<int> ids;
    for (std::size_t i = 1; i < c; ++i) ids.push_back(static_cast<int>(i));
    std::stable_sort(ids.begin(), ids.end(), [&](int a, int b) {
      if (logits[a] != logits[b]) return logits[a] > logits[b];
      return a < b;
    });
    ids.resize(5);
    top5_ok = oam::top5_ids(logits) == ids;
  }

  bool recall_ok = true;
  for (int trial = 0; trial < 500 && recall_ok; ++trial) {
    const int classes = 6 + static_cast<int>(rng.below(10));
    oam::PredictionLog log;
    bool any = false;
    const std::size_t n = 1 + rng.below(60);
    for (std::size_t i = 0; i < n; ++i) {
      Tensor<float> logits = Tensor<float>::zeros({static_cast<std::size_t>(classes)});
      for (int k = 0; k < classes; ++k)
        logits[k] = static_cast<float>(rng.uniform(-2.0, 2.0));
      const bool bg = rng.unit() < 0.25;
      const int truth = bg ? 0 : 1 + static_cast<int>(rng.below(classes - 1));
      any |= !bg;
      oam::PredictionEntry e;
      e.video_id = "v";
      e.snippet_index = static_cast<int>(i);
      auto t5 = oam::top5_ids(logits);
      e.top5 = {t5, t5, t5};
      e.label = oam::LabelTriple{truth, truth, truth, bg};
      log.entries.push_back(std::move(e));
    }
    if (!any) continue;

    std::map<int, std::pair<int, int>> tally;
    for (const auto& e : log.entries) {
      if (e.label.background) continue;
      auto& [hits, total] = tally[e.label.noun];
      ++total;
      const auto& ids = e.top5[1];
      if (std::find(ids.begin(), ids.end(), e.label.noun) != ids.end()) ++hits;
    }
    double want = 0.0;
    for (auto& [cls, ht] : tally)
      want += static_cast<double>(ht.first) / static_cast<double>(ht.second);
    want /= static_cast<double>(tally.size());
    recall_ok = std::abs(oam::mean_top5_recall(log, oam::Head::Noun) - want) <= 1e-12;
  }
  criterion(4, top5_ok && recall_ok,
            "top-5 selection and mean recall match brute-force oracles",
            "1000 logit vectors exact, 500 logs within 1e-12");
}

// ---- criterion 5: aggregation oracle equivalence -----------------------------

void check_aggregation_oracle() {
  Rng rng(55);
  bool ok = true;
  for (int trial = 0; trial < 1000 && ok; ++trial) {
    const std::size_t c = 1 + rng.below(12);
    oam::SnippetDetections sd;
    sd.video_id = "agg";
    sd.snippet_index = trial;
    const std::size_t n = rng.below(10);
    for (std::size_t i = 0; i < n; ++i) {
      oam::Detection d;
      d.category_id = static_cast<int>(rng.below(c));
      d.confidence = rng.unit();
      d.bbox[0] = 0.1; d.bbox[1] = 0.1; d.bbox[2] = 0.9; d.bbox[3] = 0.9;
      sd.detections.push_back(d);
    }
    Tensor<float> got = oam::aggregate_scores<float>(sd, c);
    for (std::size_t cat = 0; cat < c && ok; ++cat) {
      float best = 0.0f;
      for (const auto& d : sd.detections)
        if (static_cast<std::size_t>(d.category_id) == cat)
          best = std::max(best, static_cast<float>(d.confidence));
      ok = got[cat] == best;
    }
    if (!ok) break;

    if (!sd.detections.empty()) {
      auto dup = sd;
      dup.detections.push_back(dup.detections[rng.below(dup.detections.size())]);
      ok = oam::aggregate_scores<float>(dup, c) == got;
      if (!ok) break;
    }
    auto perm = sd;
    for (std::size_t i = perm.detections.size(); i > 1; --i)
      std::swap(perm.detections[i - 1], perm.detections[rng.below(i)]);
    ok = oam::aggregate_scores<float>(perm, c) == got;
  }
  criterion(5, ok, "score aggregation matches the per-category max oracle",
            "1000 random detection sets, duplication and permutation invariant");
}

// ---- criterion 6: synthetic ablation ordering --------------------------------

struct EvalNumbers {
  double verb = 0.0, noun = 0.0, action = 0.0;
};

EvalNumbers read_report(const fs::path& path) {
  nlohmann::json j = nlohmann::json::parse(slurp(path));
  return {j.at("verb").get<double>() * 100.0, j.at("noun").get<double>() * 100.0,
          j.at("action").get<double>() * 100.0};
}

void check_ablation() {
  const fs::path dir = scratch_root() / "ablation";
  const fs::path data = dir / "data";
  bool ok = run_cli("gen-data --seed 7 --out " + data.string() + " > /dev/null") == 0;
  std::map<std::string, EvalNumbers> results;
  for (const std::string mode : {"none", "input_concat", "oa_module"}) {
    if (!ok) break;
    const fs::path out = dir / mode;
    ok = run_cli("train --seed 7 --data " + (data / "train").string() + " --out " +
                 out.string() + " --set model.integration=" + mode + " > /dev/null") == 0;
    if (!ok) break;
    ok = run_cli("eval --checkpoint " + (out / "checkpoint.oamc").string() + " --data " +
                 (data / "val").string() + " --out " + out.string() + " > /dev/null") == 0;
    if (!ok) break;
    results[mode] = read_report(out / "report.json");
  }

  std::string detail = "pipeline invocation failed";
  if (ok) {
    const EvalNumbers none = results["none"];
    const EvalNumbers concat = results["input_concat"];
    const EvalNumbers oa = results["oa_module"];
    const double chance = 5.0 / 12.0 * 100.0;  // top-5 of 12 feature-independent nouns
    const bool order_ok = oa.noun >= concat.noun;
    const bool margin_ok = oa.noun >= none.noun + 10.0;
    const bool chance_ok = std::abs(none.noun - chance) <= 5.0;
    const bool verbs_ok = none.verb >= 90.0 && concat.verb >= 90.0 && oa.verb >= 90.0;
    ok = order_ok && margin_ok && chance_ok && verbs_ok;
    std::ostringstream os;
    os.precision(1);
    os << std::fixed << "noun oa " << oa.noun << " / concat " << concat.noun << " / none "
       << none.noun << " (chance " << chance << "), verbs " << none.verb << "/"
       << concat.verb << "/" << oa.verb;
    detail = os.str();
  }
  criterion(6, ok, "synthetic ablation reproduces the module-first ordering", detail);
}

// ---- criterion 7: determinism -------------------------------------------------

void check_determinism() {
  const fs::path dir = scratch_root() / "determinism";
  const fs::path data = scratch_root() / "ablation" / "data";  // reuse criterion 6 data
  bool ok = fs::exists(data / "train" / "labels.csv");
  const std::string common = "train --seed 7 --data " + (data / "train").string() +
                             " --set train.steps=120 --set model.integration=oa_module";
  if (ok)
    ok = run_cli(common + " --out " + (dir / "a").string() + " > /dev/null") == 0 &&
         run_cli(common + " --out " + (dir / "b").string() + " > /dev/null") == 0;
  if (ok) ok = same_bytes(dir / "a" / "checkpoint.oamc", dir / "b" / "checkpoint.oamc");

  if (ok) {
    const std::string eval_common = "eval --checkpoint " +
                                    (dir / "a" / "checkpoint.oamc").string() + " --data " +
                                    (data / "val").string();
    ok = run_cli(eval_common + " --out " + (dir / "ea").string() + " > /dev/null") == 0 &&
         run_cli(eval_common + " --out " + (dir / "eb").string() + " > /dev/null") == 0 &&
         same_bytes(dir / "ea" / "report.json", dir / "eb" / "report.json");
  }
  criterion(7, ok, "repeated runs are bitwise identical",
            "checkpoints and evaluation reports");
}

// ---- criterion 8: numeric invariants ------------------------------------------

void check_numeric_invariants() {
  Rng rng(88);
  bool softmax_ok = true;
  for (int trial = 0; trial < 200 && softmax_ok; ++trial) {
    Tensor<float> x = random_matrix(1 + rng.below(6), 1 + rng.below(10), rng, -50.0, 50.0);
    Tensor<float> y = oam::softmax_rows(x);
    for (std::size_t i = 0; i < y.rows() && softmax_ok; ++i) {
      double sum = 0.0;
      for (std::size_t j = 0; j < y.cols(); ++j) {
        softmax_ok = y.at(i, j) >= 0.0f;
        sum += y.at(i, j);
      }
      softmax_ok = softmax_ok && std::abs(sum - 1.0) < 1e-6;
    }
  }

  bool attn_ok = true;
  for (int trial = 0; trial < 100 && attn_ok; ++trial) {
    Tensor<float> q = random_matrix(1 + rng.below(5), 4, rng, -5.0, 5.0);
    Tensor<float> k = random_matrix(1, 4, rng);
    Tensor<float> v = random_matrix(1, 4, rng);
    Tensor<float> out = oam::scaled_dot_attention(q, k, v);
    for (std::size_t i = 0; i < out.rows() && attn_ok; ++i)
      for (std::size_t j = 0; j < 4; ++j) attn_ok = attn_ok && out.at(i, j) == v.at(0, j);
  }

  bool pool_ok = true;
  {
    Tensor<float> x = random_matrix(6, 5, rng);
    oam::Tape<float> t0;
    const Tensor<float> base = t0.value(t0.max_pool_rows(t0.leaf(x)));
    for (int trial = 0; trial < 100 && pool_ok; ++trial) {
      std::vector<std::size_t> perm{0, 1, 2, 3, 4, 5};
      for (std::size_t i = 6; i > 1; --i) std::swap(perm[i - 1], perm[rng.below(i)]);
      Tensor<float> shuffled = Tensor<float>::zeros({6, 5});
      for (std::size_t i = 0; i < 6; ++i)
        for (std::size_t j = 0; j < 5; ++j) shuffled.at(i, j) = x.at(perm[i], j);
      oam::Tape<float> tape;
      pool_ok = tape.value(tape.max_pool_rows(tape.leaf(shuffled))) == base;
    }
  }

  bool loss_ok = true;
  {
    Rng hr(1);
    oam::ClassifierHeads<float> heads(2, oam::HeadSizes{2, 2, 2}, hr);
    for (auto* p : heads.params()) p->value = Tensor<float>::zeros(p->value.shape());
    oam::Tape<float> tape;
    auto out = heads.apply(tape, tape.leaf(Tensor<float>::zeros({1, 2})));
    const float loss =
        tape.value(heads.loss(tape, out, oam::LabelTriple{1, 1, 1, false}))[0];
    loss_ok = std::abs(loss - 3.0 * std::log(2.0)) < 1e-6;
  }

  criterion(8, softmax_ok && attn_ok && pool_ok && loss_ok,
            "softmax rows, single-key attention, pooling and uniform loss invariants");
}

// ---- criterion 9: format round-trips ------------------------------------------

void check_round_trips() {
  const fs::path dir = scratch_root() / "formats";
  fs::create_directories(dir);
  Rng rng(99);

  oam::SynthConfig sc;
  sc.num_videos = 3;
  sc.snippets_per_video = 16;
  sc.feature_dim = 6;
  sc.num_verbs = 3;
  sc.num_nouns = 4;
  sc.object_categories = 5;
  sc.seed = 13;
  std::vector<oam::EpisodeRecord> records;
  for (std::size_t i = 0; i < 3; ++i) records.push_back(oam::generate_episode(sc, i));
  oam::write_dataset(records, (dir / "ds").string());
  auto loaded = oam::read_dataset((dir / "ds").string());
  bool dataset_ok = loaded.size() == records.size();
  for (std::size_t i = 0; dataset_ok && i < records.size(); ++i)
    dataset_ok = loaded[i] == records[i];

  // Checkpoint: bitwise parameter round-trip plus CRC rejection with exit 5.
  nlohmann::json base;
  base["model"] = {{"num_queries", 4}, {"embed_dim", 16},  {"num_heads", 2},
                   {"ffn_mult", 2},    {"feature_dim", 6}, {"hidden_dim", 16},
                   {"num_categories", 5}, {"num_verbs", 5}, {"num_nouns", 6},
                   {"cue_window", 4}};
  oam::RunConfig cfg = oam::parse_run_config(base);
  oam::OadModel<float> a(cfg.model, 17);
  for (oam::Parameter<float>* p : a.params())
    for (std::size_t i = 0; i < p->value.numel(); ++i)
      p->value[i] += static_cast<float>(rng.normal());
  const fs::path ckpt = dir / "model.oamc";
  oam::save_checkpoint(ckpt.string(), a.params(), oam::to_json(cfg));
  oam::OadModel<float> b(cfg.model, 23);
  oam::apply_checkpoint(oam::read_checkpoint(ckpt.string()), b.params());
  bool ckpt_ok = true;
  for (std::size_t i = 0; i < a.params().size(); ++i)
    ckpt_ok = ckpt_ok && a.params()[i]->value == b.params()[i]->value;

  // Flip a payload byte; the CLI must refuse with exit code 5.
  const fs::path bad = dir / "corrupt.oamc";
  {
    std::string bytes = slurp(ckpt);
    const std::size_t header_len = static_cast<unsigned char>(bytes[0]) |
                                   (static_cast<unsigned char>(bytes[1]) << 8) |
                                   (static_cast<unsigned char>(bytes[2]) << 16) |
                                   (static_cast<unsigned char>(bytes[3]) << 24);
    bytes[4 + header_len + 10] = static_cast<char>(bytes[4 + header_len + 10] ^ 0x5A);
    std::ofstream os(bad, std::ios::binary);
    os << bytes;
  }
  const int code = run_cli("eval --checkpoint " + bad.string() + " --data " +
                           (dir / "ds").string() + " --out " + dir.string() +
                           " 2> /dev/null > /dev/null");
  const bool crc_ok = code == 5;

  criterion(9, dataset_ok && ckpt_ok && crc_ok,
            "feature, detection, label and checkpoint formats survive disk",
            std::string("dataset ") + (dataset_ok ? "exact" : "MISMATCH") +
                ", checkpoint bitwise " + (ckpt_ok ? "exact" : "MISMATCH") +
                ", corrupt payload exit " + std::to_string(code));
}

}  // namespace

int main() {
  std::cout << "acceptance suite, binary under test: " << OAD_OAM_BINARY << "\n";
  check_gradcheck();
  check_identity_at_init();
  check_causality();
  check_metric_oracles();
  check_aggregation_oracle();
  check_ablation();
  check_determinism();
  check_numeric_invariants();
  check_round_trips();
  if (g_failures) {
    std::cout << g_failures << " criterion(s) failed" << std::endl;
    return 1;
  }
  std::cout << "all criteria passed" << std::endl;
  return 0;
}
