#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "oam/model.hpp"
#include "oam/rng.hpp"
#include "oam/train.hpp"

namespace oam {

// Finite-difference validation of the analytic gradients, always in 64-bit.
// Every parameter element of the model is perturbed by +-step around a fixed
// random input window and compared against the tape's gradient.

struct GradCheckGroup {
  std::string name;
  double max_rel_err = 0.0;
};

struct GradCheckReport {
  std::vector<GradCheckGroup> groups;
  double tolerance = 1e-4;

  bool passed() const {
    for (const auto& g : groups)
      if (!(g.max_rel_err < tolerance)) return false;
    return true;
  }

  std::string worst_group() const {
    std::string name;
    double worst = -1.0;
    for (const auto& g : groups)
      if (g.max_rel_err > worst) {
        worst = g.max_rel_err;
        name = g.name;
      }
    return name;
  }
};

inline ModelConfig gradcheck_default_config() {
  ModelConfig cfg;
  cfg.oa.num_queries = 4;
  cfg.oa.embed_dim = 8;
  cfg.oa.num_heads = 2;
  cfg.oa.ffn_mult = 4;
  cfg.oa.num_blocks = 1;
  cfg.feature_dim = 6;
  cfg.hidden_dim = 8;
  cfg.categories = 5;
  cfg.head_sizes = HeadSizes{4, 5, 13};  // 3 verbs, 4 nouns, 12 actions + background
  cfg.integration = Integration::OaModule;
  cfg.cue_window = 4;
  return cfg;
}

namespace detail {

inline double rel_err(double a, double b) {
  const double denom = std::max(std::abs(a), std::abs(b));
  if (denom < 1e-6) return std::abs(a - b);
  return std::abs(a - b) / denom;
}

}  // namespace detail

// corrupt_group, when nonempty, perturbs that group's analytic gradient
// before comparison. Testing hook for the failure path.
inline GradCheckReport run_gradcheck(const ModelConfig& cfg, std::uint64_t seed,
                                     double step = 1e-5, double tolerance = 1e-4,
                                     const std::string& corrupt_group = "") {
  OadModel<double> model(cfg, seed);
  Rng rng = Rng(seed).derive(0x67726164);  // "grad"

  // Jitter every parameter off its initialization point. The zero-initialized
  // output projections would otherwise gate entire paths to a vacuous 0 == 0
  // comparison.
  for (Parameter<double>* p : model.params())
    for (std::size_t k = 0; k < p->value.numel(); ++k) p->value[k] += 0.2 * rng.normal();

  // Fixed random window: a few snippets so the recurrence and the cue ring
  // both contribute to the loss.
  const std::size_t t_total = 3;
  PreparedEpisode<double> ep;
  ep.video_id = "gradcheck";
  ep.features = Tensor<double>::zeros({t_total, cfg.feature_dim});
  for (std::size_t i = 0; i < ep.features.numel(); ++i) ep.features[i] = rng.normal();
  ep.scores = Tensor<double>::zeros({t_total, cfg.categories});
  for (std::size_t i = 0; i < ep.scores.numel(); ++i) ep.scores[i] = rng.unit();
  for (std::size_t t = 0; t < t_total; ++t) {
    const int verb = 1 + static_cast<int>(rng.below(cfg.head_sizes.verbs - 1));
    const int noun = 1 + static_cast<int>(rng.below(cfg.head_sizes.nouns - 1));
    const int action = 1 + static_cast<int>(rng.below(cfg.head_sizes.actions - 1));
    ep.labels.push_back(LabelTriple{verb, noun, action, false});
  }

  auto loss_at = [&]() {
    Tape<double> tape;
    Val loss = window_loss(model, tape, ep, 0, t_total);
    return tape.value(loss)[0];
  };

  model.zero_grads();
  {
    Tape<double> tape;
    Val loss = window_loss(model, tape, ep, 0, t_total);
    tape.backward(loss);
  }

  GradCheckReport report;
  report.tolerance = tolerance;
  for (Parameter<double>* p : model.params()) {
    GradCheckGroup group;
    group.name = p->name;
    for (std::size_t k = 0; k < p->value.numel(); ++k) {
      const double keep = p->value[k];
      p->value[k] = keep + step;
      const double up = loss_at();
      p->value[k] = keep - step;
      const double down = loss_at();
      p->value[k] = keep;
      const double numeric = (up - down) / (2.0 * step);
      double analytic = p->grad[k];
      if (!corrupt_group.empty() && p->name == corrupt_group && k == 0) analytic += 1.0;
      group.max_rel_err = std::max(group.max_rel_err, detail::rel_err(analytic, numeric));
    }
    report.groups.push_back(std::move(group));
  }
  return report;
}

}  // namespace oam
