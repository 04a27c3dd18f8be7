#pragma once

#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "oam/autograd.hpp"
#include "oam/errors.hpp"
#include "oam/rng.hpp"
#include "oam/tensor.hpp"

namespace oam {

// Configuration of the object-aware attention module.
struct OaConfig {
  std::size_t num_queries = 16;
  std::size_t embed_dim = 1024;
  std::size_t num_heads = 4;
  std::size_t ffn_mult = 4;
  std::size_t num_blocks = 1;
  bool self_attention = true;       // self-attention among queries in each layer
  bool positional_encoding = false; // additive sinusoidal encoding on the cue rows

  void validate() const {
    if (num_queries < 1) throw ConfigError("num_queries must be >= 1");
    if (num_blocks < 1) throw ConfigError("num_blocks must be >= 1");
    if (num_heads < 1 || embed_dim % num_heads != 0)
      throw ConfigError("embed_dim " + std::to_string(embed_dim) +
                        " must be divisible by num_heads " + std::to_string(num_heads));
  }
};

// y = x W + b, weights [in x out].
template <typename T>
struct LinearP {
  LinearP() = default;

  LinearP(const std::string& name, std::size_t in, std::size_t out, Rng& rng)
      : w(name + ".w", scaled_normal(in, out, rng)), b(name + ".b", Tensor<T>::zeros({out})) {}

  static LinearP zeros(const std::string& name, std::size_t in, std::size_t out) {
    LinearP l;
    l.w = Parameter<T>(name + ".w", Tensor<T>::zeros({in, out}));
    l.b = Parameter<T>(name + ".b", Tensor<T>::zeros({out}));
    return l;
  }

  Val apply(Tape<T>& tape, Val x) {
    return tape.add_bias(tape.matmul(x, tape.param(w)), tape.param(b));
  }

  std::vector<Parameter<T>*> params() { return {&w, &b}; }

  Parameter<T> w, b;

 private:
  static Tensor<T> scaled_normal(std::size_t in, std::size_t out, Rng& rng) {
    Tensor<T> t = Tensor<T>::zeros({in, out});
    const T s = T(1) / std::sqrt(static_cast<T>(in));
    for (std::size_t i = 0; i < t.numel(); ++i) t[i] = static_cast<T>(rng.normal()) * s;
    return t;
  }
};

template <typename T>
struct LayerNormP {
  LayerNormP() = default;

  LayerNormP(const std::string& name, std::size_t d)
      : gamma(name + ".gamma", Tensor<T>::full({d}, T(1))),
        beta(name + ".beta", Tensor<T>::zeros({d})) {}

  Val apply(Tape<T>& tape, Val x) {
    return tape.layer_norm(x, tape.param(gamma), tape.param(beta), T(1e-5));
  }

  std::vector<Parameter<T>*> params() { return {&gamma, &beta}; }

  Parameter<T> gamma, beta;
};

// Multi-head attention. The output projection starts at zero so a fresh
// sub-block contributes nothing to its residual stream.
template <typename T>
struct MultiHeadAttentionP {
  MultiHeadAttentionP() = default;

  MultiHeadAttentionP(const std::string& name, std::size_t d, std::size_t heads, Rng& rng)
      : num_heads(heads), head_dim(d / heads),
        q(name + ".wq", d, d, rng), k(name + ".wk", d, d, rng), v(name + ".wv", d, d, rng),
        o(LinearP<T>::zeros(name + ".wo", d, d)) {}

  // queries [n x d] attend over context [m x d].
  Val apply(Tape<T>& tape, Val queries, Val context) {
    if (tape.value(context).rows() == 0)
      throw EmptyContextError("attention: empty context");
    Val qm = q.apply(tape, queries);
    Val km = k.apply(tape, context);
    Val vm = v.apply(tape, context);
    const T inv_sqrt = T(1) / std::sqrt(static_cast<T>(head_dim));
    std::vector<Val> heads_out;
    heads_out.reserve(num_heads);
    for (std::size_t h = 0; h < num_heads; ++h) {
      Val qh = tape.slice_cols(qm, h * head_dim, head_dim);
      Val kh = tape.slice_cols(km, h * head_dim, head_dim);
      Val vh = tape.slice_cols(vm, h * head_dim, head_dim);
      Val scores = tape.scale(tape.matmul(qh, tape.transpose(kh)), inv_sqrt);
      heads_out.push_back(tape.matmul(tape.softmax_rows(scores), vh));
    }
    return o.apply(tape, tape.concat_cols(heads_out));
  }

  std::vector<Parameter<T>*> params() {
    std::vector<Parameter<T>*> out;
    for (auto* l : {&q, &k, &v, &o})
      for (auto* p : l->params()) out.push_back(p);
    return out;
  }

  std::size_t num_heads = 1, head_dim = 0;
  LinearP<T> q, k, v, o;
};

// linear(d -> mult*d), GELU, linear(-> d); the second linear starts at zero.
template <typename T>
struct FeedForwardP {
  FeedForwardP() = default;

  FeedForwardP(const std::string& name, std::size_t d, std::size_t mult, Rng& rng)
      : w1(name + ".w1", d, d * mult, rng), w2(LinearP<T>::zeros(name + ".w2", d * mult, d)) {}

  Val apply(Tape<T>& tape, Val x) { return w2.apply(tape, tape.gelu(w1.apply(tape, x))); }

  std::vector<Parameter<T>*> params() {
    std::vector<Parameter<T>*> out;
    for (auto* p : w1.params()) out.push_back(p);
    for (auto* p : w2.params()) out.push_back(p);
    return out;
  }

  LinearP<T> w1, w2;
};

// Pre-norm residual decoder layer:
//   q <- q + SelfAttn(LN(q))          (optional)
//   q <- q + CrossAttn(LN(q), ctx)
//   q <- q + FFN(LN(q))
// With the zero-initialized output projections every sub-block starts as an
// exact no-op, so a fresh layer is the identity map.
template <typename T>
struct DecoderLayerP {
  DecoderLayerP() = default;

  DecoderLayerP(const std::string& name, const OaConfig& cfg, Rng& rng)
      : self_attention(cfg.self_attention),
        ln_self(name + ".ln_self", cfg.embed_dim),
        ln_cross(name + ".ln_cross", cfg.embed_dim),
        ln_ffn(name + ".ln_ffn", cfg.embed_dim),
        self_attn(name + ".self", cfg.embed_dim, cfg.num_heads, rng),
        cross_attn(name + ".cross", cfg.embed_dim, cfg.num_heads, rng),
        ffn(name + ".ffn", cfg.embed_dim, cfg.ffn_mult, rng) {}

  Val apply(Tape<T>& tape, Val queries, Val context) {
    if (tape.value(context).rows() == 0)
      throw EmptyContextError("decoder layer: empty context");
    Val q = queries;
    if (self_attention) {
      Val n = ln_self.apply(tape, q);
      q = tape.add(q, self_attn.apply(tape, n, n));
    }
    q = tape.add(q, cross_attn.apply(tape, ln_cross.apply(tape, q), context));
    q = tape.add(q, ffn.apply(tape, ln_ffn.apply(tape, q)));
    return q;
  }

  std::vector<Parameter<T>*> params() {
    std::vector<Parameter<T>*> out;
    if (self_attention) {
      for (auto* p : ln_self.params()) out.push_back(p);
      for (auto* p : self_attn.params()) out.push_back(p);
    }
    for (auto* p : ln_cross.params()) out.push_back(p);
    for (auto* p : cross_attn.params()) out.push_back(p);
    for (auto* p : ln_ffn.params()) out.push_back(p);
    for (auto* p : ffn.params()) out.push_back(p);
    return out;
  }

  bool self_attention = true;
  LayerNormP<T> ln_self, ln_cross, ln_ffn;
  MultiHeadAttentionP<T> self_attn, cross_attn;
  FeedForwardP<T> ffn;
};

// Additive sinusoidal position table for the cue rows, row r of [len x d]:
//   pe[r, 2i]   = sin(r / 10000^(2i/d))
//   pe[r, 2i+1] = cos(r / 10000^(2i/d))
template <typename T>
Tensor<T> sinusoidal_encoding(std::size_t len, std::size_t d) {
  Tensor<T> pe = Tensor<T>::zeros({len, d});
  for (std::size_t r = 0; r < len; ++r)
    for (std::size_t j = 0; j < d; ++j) {
      const double exponent = static_cast<double>(2 * (j / 2)) / static_cast<double>(d);
      const double angle = static_cast<double>(r) / std::pow(10000.0, exponent);
      pe.at(r, j) = static_cast<T>((j % 2 == 0) ? std::sin(angle) : std::cos(angle));
    }
  return pe;
}

// N learnable query vectors refined against two contexts per block: first the
// projected object-score token, then the temporal cues, followed by a final
// residual feed-forward. At initialization the whole module is the identity
// on the queries.
template <typename T>
struct ObjectAwareModule {
  ObjectAwareModule() = default;

  ObjectAwareModule(const OaConfig& cfg_, std::size_t num_categories, Rng& rng)
      : cfg(cfg_), categories(num_categories),
        obj_proj("oa.obj_proj", num_categories, cfg_.embed_dim, rng),
        ln_out("oa.ln_out", cfg_.embed_dim),
        ffn_out("oa.ffn_out", cfg_.embed_dim, cfg_.ffn_mult, rng) {
    cfg.validate();
    Tensor<T> q = Tensor<T>::zeros({cfg.num_queries, cfg.embed_dim});
    for (std::size_t i = 0; i < q.numel(); ++i)
      q[i] = static_cast<T>(rng.normal()) * T(0.02);
    queries = Parameter<T>("oa.queries", std::move(q));
    blocks.reserve(cfg.num_blocks);
    for (std::size_t b = 0; b < cfg.num_blocks; ++b) {
      const std::string base = "oa.b" + std::to_string(b);
      blocks.push_back({DecoderLayerP<T>(base + ".obj", cfg, rng),
                        DecoderLayerP<T>(base + ".time", cfg, rng)});
    }
  }

  // Projects the object-score vector [1 x C] to a context token [1 x d].
  Val project_objects(Tape<T>& tape, Val scores) {
    if (tape.value(scores).cols() != categories)
      throw DimensionError("project_objects: score length " +
                           std::to_string(tape.value(scores).cols()) +
                           " does not match configured categories " +
                           std::to_string(categories));
    return obj_proj.apply(tape, scores);
  }

  // scores [1 x C], cues [L x d] with L >= 1; returns refined queries [N x d].
  Val forward(Tape<T>& tape, Val scores, Val cues) {
    // Dimensions by value: references into the tape go stale as nodes append.
    const std::size_t cue_rows = tape.value(cues).rows();
    const std::size_t cue_cols = tape.value(cues).cols();
    if (cue_rows == 0) throw EmptyContextError("oa forward: empty cue context");
    if (cue_cols != cfg.embed_dim)
      throw DimensionError("oa forward: cue width " + std::to_string(cue_cols) +
                           " does not match embed dim " + std::to_string(cfg.embed_dim));
    Val token = project_objects(tape, scores);
    Val ctx = cues;
    if (cfg.positional_encoding)
      ctx = tape.add(cues, tape.leaf(sinusoidal_encoding<T>(cue_rows, cfg.embed_dim)));
    Val q = tape.param(queries);
    for (auto& block : blocks) {
      q = block.object_layer.apply(tape, q, token);
      q = block.temporal_layer.apply(tape, q, ctx);
    }
    return tape.add(q, ffn_out.apply(tape, ln_out.apply(tape, q)));
  }

  std::vector<Parameter<T>*> params() {
    std::vector<Parameter<T>*> out;
    out.push_back(&queries);
    for (auto* p : obj_proj.params()) out.push_back(p);
    for (auto& b : blocks) {
      for (auto* p : b.object_layer.params()) out.push_back(p);
      for (auto* p : b.temporal_layer.params()) out.push_back(p);
    }
    for (auto* p : ln_out.params()) out.push_back(p);
    for (auto* p : ffn_out.params()) out.push_back(p);
    return out;
  }

  struct Block {
    DecoderLayerP<T> object_layer;
    DecoderLayerP<T> temporal_layer;
  };

  OaConfig cfg;
  std::size_t categories = 0;
  Parameter<T> queries;
  LinearP<T> obj_proj;
  std::vector<Block> blocks;
  LayerNormP<T> ln_out;
  FeedForwardP<T> ffn_out;
};

}  // namespace oam
