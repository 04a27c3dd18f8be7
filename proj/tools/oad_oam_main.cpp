// oad-oam: synthetic data generation, training, evaluation, streaming
// inference and gradient checking for the object-aware online action
// detection pipeline.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "oam/checkpoint.hpp"
#include "oam/config.hpp"
#include "oam/errors.hpp"
#include "oam/eval.hpp"
#include "oam/gradcheck.hpp"
#include "oam/model.hpp"
#include "oam/oadf.hpp"
#include "oam/stream.hpp"
#include "oam/synth_data.hpp"
#include "oam/train.hpp"

namespace fs = std::filesystem;

namespace {

struct CommonArgs {
  std::string config_path;
  std::vector<std::string> overrides;
  std::optional<std::uint64_t> seed;
  std::string out_dir = ".";
};

void add_common(CLI::App* cmd, CommonArgs& args) {
  cmd->add_option("--config", args.config_path, "JSON config file");
  cmd->add_option("--set", args.overrides, "override a config key, e.g. train.steps=100")
      ->take_all();
  cmd->add_option("--seed", args.seed, "override train and data seeds");
  cmd->add_option("--out", args.out_dir, "output directory");
}

oam::RunConfig resolve_config(const CommonArgs& args, nlohmann::json base = nlohmann::json::object()) {
  nlohmann::json j = std::move(base);
  if (!args.config_path.empty()) j = oam::load_config_file(args.config_path);
  for (const std::string& s : args.overrides) oam::apply_override(j, s);
  oam::RunConfig cfg = oam::parse_run_config(j);
  if (args.seed) {
    cfg.train.seed = *args.seed;
    cfg.data.synth.seed = *args.seed;
  }
  return cfg;
}

void write_resolved_config(const oam::RunConfig& cfg, const std::string& dir) {
  fs::create_directories(dir);
  std::ofstream os(fs::path(dir) / "resolved_config.json", std::ios::binary);
  os << oam::to_json(cfg).dump(2) << '\n';
}

int cmd_gen_data(const CommonArgs& args) {
  oam::RunConfig cfg = resolve_config(args);
  cfg.data.synth.validate();
  const oam::SynthConfig& sc = cfg.data.synth;

  auto generate_split = [&](const std::string& name, std::size_t first, std::size_t count) {
    std::vector<oam::EpisodeRecord> records;
    records.reserve(count);
    std::size_t snippets = 0;
    for (std::size_t i = 0; i < count; ++i) {
      records.push_back(oam::generate_episode(sc, first + i));
      snippets += records.back().labels.size();
    }
    oam::write_dataset(records, (fs::path(args.out_dir) / name).string());
    std::cout << "split " << name << ": " << count << " videos, " << snippets
              << " snippets\n";
  };

  // Validation episodes continue the index sequence, so splits are disjoint.
  generate_split("train", 0, sc.num_videos);
  generate_split("val", sc.num_videos, cfg.data.val_videos);
  write_resolved_config(cfg, args.out_dir);
  return 0;
}

int cmd_train(const CommonArgs& args, const std::string& data_dir_flag) {
  oam::RunConfig cfg = resolve_config(args);
  if (!data_dir_flag.empty()) cfg.data.dir = data_dir_flag;
  if (cfg.data.dir.empty())
    throw oam::ConfigError("no dataset directory; set data.dir or pass --data");

  const auto records = oam::read_dataset(cfg.data.dir);
  const auto episodes = oam::prepare_episodes<float>(records, cfg.model);
  oam::validate_dataset_against_model(episodes, cfg.model);

  oam::OadModel<float> model(cfg.model, cfg.train.seed);
  fs::create_directories(args.out_dir);
  std::ofstream log(fs::path(args.out_dir) / "train_log.jsonl", std::ios::binary);
  auto stats = oam::train_model<float>(model, episodes, cfg.train,
                                       [&](const std::string& line) { log << line << '\n'; });
  log.close();

  oam::save_checkpoint((fs::path(args.out_dir) / "checkpoint.oamc").string(), model.params(),
                       oam::to_json(cfg));
  write_resolved_config(cfg, args.out_dir);
  std::cout << "trained " << stats.steps << " steps on " << episodes.size()
            << " videos (mode " << oam::to_string(cfg.model.integration)
            << "), final loss " << stats.final_loss << '\n';
  std::cout << "checkpoint: " << (fs::path(args.out_dir) / "checkpoint.oamc").string() << '\n';
  return 0;
}

struct LoadedModel {
  oam::RunConfig cfg;
  std::unique_ptr<oam::OadModel<float>> model;
};

LoadedModel load_model(const std::string& checkpoint_path) {
  oam::CheckpointFile ck = oam::read_checkpoint(checkpoint_path);
  if (!ck.header.contains("config"))
    throw oam::CheckpointError("checkpoint '" + checkpoint_path + "' lacks a config");
  LoadedModel lm;
  lm.cfg = oam::parse_run_config(ck.header.at("config"));
  lm.model = std::make_unique<oam::OadModel<float>>(lm.cfg.model, lm.cfg.train.seed);
  oam::apply_checkpoint(ck, lm.model->params());
  return lm;
}

int cmd_eval(const CommonArgs& args, const std::string& checkpoint_path,
             const std::string& data_dir_flag) {
  LoadedModel lm = load_model(checkpoint_path);
  std::string data_dir = !data_dir_flag.empty() ? data_dir_flag : lm.cfg.data.dir;
  if (!args.config_path.empty() || !args.overrides.empty()) {
    // Eval-time overrides only touch data/eval paths, never the model.
    oam::RunConfig cli_cfg = resolve_config(args);
    if (data_dir_flag.empty() && !cli_cfg.data.dir.empty()) data_dir = cli_cfg.data.dir;
    lm.cfg.eval = cli_cfg.eval;
  }
  if (data_dir.empty())
    throw oam::ConfigError("no dataset directory; set data.dir or pass --data");

  const auto records = oam::read_dataset(data_dir);
  const auto episodes = oam::prepare_episodes<float>(records, lm.cfg.model);
  oam::PredictionLog log = oam::evaluate_model(*lm.model, episodes);
  nlohmann::ordered_json report = oam::metric_report(log);

  fs::create_directories(args.out_dir);
  const fs::path report_path = fs::path(args.out_dir) / lm.cfg.eval.report;
  std::ofstream os(report_path, std::ios::binary);
  os << report.dump(2) << '\n';
  os.close();
  write_resolved_config(lm.cfg, args.out_dir);
  std::cout << report.dump(2) << '\n';
  return 0;
}

int cmd_stream(const std::string& checkpoint_path, const std::string& features_path,
               const std::string& detections_path) {
  LoadedModel lm = load_model(checkpoint_path);
  oam::Tensor<float> features = oam::read_oadf(features_path);
  oam::DetectionMap dets;
  if (!detections_path.empty()) dets = oam::load_detections(detections_path);
  const std::string video_id = fs::path(features_path).stem().string();

  std::size_t missing = 0;
  const std::size_t emitted =
      oam::stream_video(*lm.model, video_id, features, dets, std::cout,
                        [&](const std::string& msg) {
                          ++missing;
                          std::cerr << "warning: " << msg << '\n';
                        });
  if (missing > 0)
    std::cerr << "warning: " << missing << " of " << emitted
              << " snippets had no detection entry\n";
  if (emitted == 0)
    std::cerr << "warning: feature file '" << features_path << "' holds no snippets\n";
  return 0;
}

int cmd_gradcheck(const CommonArgs& args, const std::string& corrupt_group) {
  nlohmann::json base;
  base["model"] = {{"num_queries", 4}, {"embed_dim", 8},    {"num_heads", 2},
                   {"ffn_mult", 4},    {"num_blocks", 1},   {"feature_dim", 6},
                   {"hidden_dim", 8},  {"num_categories", 5}, {"num_verbs", 3},
                   {"num_nouns", 4},   {"cue_window", 4},   {"integration", "oa_module"}};
  oam::RunConfig cfg = resolve_config(args, base);
  const std::uint64_t seed = args.seed ? *args.seed : cfg.train.seed;

  oam::GradCheckReport report =
      oam::run_gradcheck(cfg.model, seed, 1e-5, 1e-4, corrupt_group);
  for (const auto& g : report.groups)
    std::printf("group %-28s max_rel_err %.3e %s\n", g.name.c_str(), g.max_rel_err,
                g.max_rel_err < report.tolerance ? "ok" : "FAIL");
  if (!report.passed()) {
    std::printf("gradcheck FAILED: group %s exceeds tolerance %.1e\n",
                report.worst_group().c_str(), report.tolerance);
    return 1;
  }
  std::printf("gradcheck passed: %zu groups within %.1e\n", report.groups.size(),
              report.tolerance);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"object-aware online action detection pipeline"};
  app.require_subcommand(1);

  CommonArgs gen_args, train_args, eval_args, grad_args;
  std::string train_data, eval_data, eval_ckpt, stream_ckpt, stream_features,
      stream_detections, corrupt_group;

  CLI::App* gen = app.add_subcommand("gen-data", "generate a synthetic dataset");
  add_common(gen, gen_args);

  CLI::App* train = app.add_subcommand("train", "train a model and write a checkpoint");
  add_common(train, train_args);
  train->add_option("--data", train_data, "dataset directory (overrides data.dir)");

  CLI::App* eval = app.add_subcommand("eval", "evaluate a checkpoint (mean top-5 recall)");
  add_common(eval, eval_args);
  eval->add_option("--checkpoint", eval_ckpt, "checkpoint file")->required();
  eval->add_option("--data", eval_data, "dataset directory (overrides data.dir)");

  CLI::App* stream = app.add_subcommand("stream", "causal per-snippet predictions as JSONL");
  stream->add_option("--checkpoint", stream_ckpt, "checkpoint file")->required();
  stream->add_option("--features", stream_features, "OADF feature file")->required();
  stream->add_option("--detections", stream_detections, "detections JSONL file");

  CLI::App* grad = app.add_subcommand("gradcheck", "finite-difference gradient validation");
  add_common(grad, grad_args);
  grad->add_option("--corrupt-grad", corrupt_group,
                   "testing hook: corrupt this group's analytic gradient");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (gen->parsed()) return cmd_gen_data(gen_args);
    if (train->parsed()) return cmd_train(train_args, train_data);
    if (eval->parsed()) return cmd_eval(eval_args, eval_ckpt, eval_data);
    if (stream->parsed()) return cmd_stream(stream_ckpt, stream_features, stream_detections);
    if (grad->parsed()) return cmd_gradcheck(grad_args, corrupt_group);
  } catch (const oam::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  } catch (const oam::ParseError& e) {
    std::cerr << "parse error: " << e.what() << '\n';
    return 3;
  } catch (const oam::DataError& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return 3;
  } catch (const oam::FormatError& e) {
    std::cerr << "format error: " << e.what() << '\n';
    return 3;
  } catch (const oam::EvalError& e) {
    std::cerr << "evaluation error: " << e.what() << '\n';
    return 3;
  } catch (const oam::DivergenceError& e) {
    std::cerr << "divergence: " << e.what() << '\n';
    return 4;
  } catch (const oam::CheckpointError& e) {
    std::cerr << "checkpoint error: " << e.what() << '\n';
    return 5;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
