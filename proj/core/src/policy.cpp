#include "bppo/policy.hpp"

#include <algorithm>
#include <cmath>

#include "bppo/error.hpp"
#include "bppo/ops.hpp"
#include "bppo/rng.hpp"
#include "bppo/tasks.hpp"

namespace bppo {

namespace {
constexpr double kRmsEps = 1e-5;
constexpr double kMaskFill = -1e9;
}  // namespace

void PolicyConfig::validate() const {
  if (vocab_size < 2) throw ConfigError("vocab_size must be >= 2");
  if (context_len < 2) throw ConfigError("context_len must be >= 2");
  if (d_model < 1 || n_heads < 1 || n_layers < 1) {
    throw ConfigError("d_model, n_heads and n_layers must be positive");
  }
  if (d_model % n_heads != 0) throw ConfigError("d_model must be divisible by n_heads");
  if (exit_depths.empty()) throw ConfigError("exit_depths must be non-empty");
  if (!std::is_sorted(exit_depths.begin(), exit_depths.end())) {
    throw ConfigError("exit_depths must be sorted");
  }
  for (int64_t d : exit_depths) {
    if (d < 1 || d > n_layers) throw ConfigError("exit depth outside [1, n_layers]");
  }
  if (exit_depths.back() != n_layers) {
    throw ConfigError("deepest exit must equal n_layers");
  }
  if (std::adjacent_find(exit_depths.begin(), exit_depths.end()) != exit_depths.end()) {
    throw ConfigError("exit_depths must be unique");
  }
  if (!(init_scale > 0.0)) throw ConfigError("init_scale must be positive");
}

PolicyLayout make_layout(const PolicyConfig& config) {
  config.validate();
  PolicyLayout lay;
  auto push = [&lay](std::string name, std::vector<int64_t> shape,
                     PolicyLayout::Init init) {
    lay.entries.push_back({std::move(name), std::move(shape), init});
    return static_cast<int64_t>(lay.entries.size()) - 1;
  };
  const int64_t d = config.d_model;
  lay.tok_emb = push("tok_emb", {config.vocab_size, d}, PolicyLayout::Init::Gaussian);
  lay.pos_emb = push("pos_emb", {config.context_len, d}, PolicyLayout::Init::Gaussian);
  for (int64_t l = 0; l < config.n_layers; ++l) {
    const std::string p = "layers." + std::to_string(l) + ".";
    PolicyLayout::LayerIdx li;
    li.attn_gain = push(p + "attn_norm.gain", {d}, PolicyLayout::Init::One);
    li.attn_offset = push(p + "attn_norm.offset", {d}, PolicyLayout::Init::Zero);
    li.wq = push(p + "attn.wq", {d, d}, PolicyLayout::Init::Gaussian);
    li.wk = push(p + "attn.wk", {d, d}, PolicyLayout::Init::Gaussian);
    li.wv = push(p + "attn.wv", {d, d}, PolicyLayout::Init::Gaussian);
    li.wo = push(p + "attn.wo", {d, d}, PolicyLayout::Init::Gaussian);
    li.mlp_gain = push(p + "mlp_norm.gain", {d}, PolicyLayout::Init::One);
    li.mlp_offset = push(p + "mlp_norm.offset", {d}, PolicyLayout::Init::Zero);
    li.w1 = push(p + "mlp.w1", {d, 4 * d}, PolicyLayout::Init::Gaussian);
    li.w2 = push(p + "mlp.w2", {4 * d, d}, PolicyLayout::Init::Gaussian);
    lay.layers.push_back(li);
  }
  for (int64_t depth : config.exit_depths) {
    const int64_t idx = push("heads." + std::to_string(depth),
                             {d, config.vocab_size}, PolicyLayout::Init::Gaussian);
    lay.heads.emplace_back(depth, idx);
  }
  return lay;
}

int64_t PolicyLayout::head(int64_t exit_depth) const {
  for (const auto& [depth, idx] : heads) {
    if (depth == exit_depth) return idx;
  }
  throw ConfigError("unknown exit depth " + std::to_string(exit_depth));
}

int64_t PolicyParams::scalar_count() const {
  int64_t n = 0;
  for (const Tensor& t : tensors) n += t.numel();
  return n;
}

PolicyParams init_params(const PolicyConfig& config, uint64_t seed) {
  const PolicyLayout lay = make_layout(config);
  PolicyParams p;
  p.config = config;
  p.tensors.reserve(lay.entries.size());
  Rng rng(derive_seed({0x1417u, seed}));
  for (const auto& e : lay.entries) {
    Tensor t = Tensor::zeros(e.shape);
    switch (e.init) {
      case PolicyLayout::Init::Gaussian:
        for (double& v : t.data) v = config.init_scale * rng.next_gaussian();
        break;
      case PolicyLayout::Init::One:
        for (double& v : t.data) v = 1.0;
        break;
      case PolicyLayout::Init::Zero:
        break;
    }
    p.tensors.push_back(std::move(t));
  }
  return p;
}

// ------------------------------------------------------------------ engines
//
// The backbone is written once against an engine concept; the eval engine
// runs kernels directly while the tape engine records them. Both therefore
// execute the identical kernel sequence, which is what makes sampling-time
// and loss-time log-probs agree bit for bit.

namespace {

Tensor causal_keep_mask(int64_t t) {
  Tensor m = Tensor::zeros({t, t});
  for (int64_t i = 0; i < t; ++i)
    for (int64_t j = 0; j <= i; ++j) m.at(i, j) = 1.0;
  return m;
}

struct EvalEngine {
  using V = Tensor;
  const PolicyParams& params;

  V param_slice_rows(int64_t idx, int64_t r0, int64_t r1) {
    return ops::slice_rows(params.tensors[static_cast<size_t>(idx)], r0, r1);
  }
  V embedding(int64_t idx, std::span<const int> ids) {
    return ops::embedding(params.tensors[static_cast<size_t>(idx)], ids);
  }
  V matmul_param(const V& a, int64_t idx) {
    return ops::matmul(a, params.tensors[static_cast<size_t>(idx)]);
  }
  V rms_norm(const V& x, int64_t gain, int64_t offset) {
    return ops::rms_norm(x, params.tensors[static_cast<size_t>(gain)],
                         params.tensors[static_cast<size_t>(offset)], kRmsEps);
  }
  V add(const V& a, const V& b) { return ops::add(a, b); }
  V matmul(const V& a, const V& b) { return ops::matmul(a, b); }
  V transpose(const V& a) { return ops::transpose(a); }
  V slice_cols(const V& a, int64_t c0, int64_t c1) { return ops::slice_cols(a, c0, c1); }
  V scale(const V& a, double c) { return ops::scale(a, c); }
  V masked_fill(const V& a, const Tensor& keep, double fill) {
    return ops::masked_fill(a, keep, fill);
  }
  V row_softmax(const V& a) { return ops::row_softmax(a); }
  V concat_cols(const std::vector<V>& xs) { return ops::concat_cols(xs); }
  V gelu(const V& a) { return ops::gelu(a); }
};

struct TapeEngine {
  using V = ValueId;
  Tape& tape;
  const std::vector<ValueId>& bound;

  V param_slice_rows(int64_t idx, int64_t r0, int64_t r1) {
    return tape.slice_rows(bound[static_cast<size_t>(idx)], r0, r1);
  }
  V embedding(int64_t idx, std::span<const int> ids) {
    return tape.embedding(bound[static_cast<size_t>(idx)],
                          std::vector<int>(ids.begin(), ids.end()));
  }
  V matmul_param(V a, int64_t idx) {
    return tape.matmul(a, bound[static_cast<size_t>(idx)]);
  }
  V rms_norm(V x, int64_t gain, int64_t offset) {
    return tape.rms_norm(x, bound[static_cast<size_t>(gain)],
                         bound[static_cast<size_t>(offset)], kRmsEps);
  }
  V add(V a, V b) { return tape.add(a, b); }
  V matmul(V a, V b) { return tape.matmul(a, b); }
  V transpose(V a) { return tape.transpose(a); }
  V slice_cols(V a, int64_t c0, int64_t c1) { return tape.slice_cols(a, c0, c1); }
  V scale(V a, double c) { return tape.scale(a, c); }
  V masked_fill(V a, const Tensor& keep, double fill) {
    return tape.masked_fill(a, keep, fill);
  }
  V row_softmax(V a) { return tape.row_softmax(a); }
  V concat_cols(const std::vector<V>& xs) { return tape.concat_cols(xs); }
  V gelu(V a) { return tape.gelu(a); }
};

// Observer is called with the hidden state after each block (1-based depth).
template <class Eng, class Obs>
typename Eng::V backbone(Eng& eng, const PolicyConfig& cfg, const PolicyLayout& lay,
                         std::span<const int> tokens, int64_t depth, Obs&& observe) {
  const int64_t t = static_cast<int64_t>(tokens.size());
  if (t == 0) throw ConfigError("empty token sequence");
  if (t > cfg.context_len) {
    throw ConfigError("context overflow: " + std::to_string(t) + " > " +
                      std::to_string(cfg.context_len));
  }
  if (depth < 1 || depth > cfg.n_layers) {
    throw ConfigError("backbone depth outside [1, n_layers]");
  }
  for (int tok : tokens) {
    if (tok < 0 || tok >= static_cast<int>(cfg.vocab_size)) {
      throw ConfigError("token out of vocabulary: " + std::to_string(tok));
    }
  }
  auto x = eng.add(eng.embedding(lay.tok_emb, tokens),
                   eng.param_slice_rows(lay.pos_emb, 0, t));
  const Tensor causal = causal_keep_mask(t);
  const int64_t dh = cfg.d_model / cfg.n_heads;
  const double inv_sqrt_dh = 1.0 / std::sqrt(static_cast<double>(dh));
  for (int64_t l = 0; l < depth; ++l) {
    const auto& li = lay.layers[static_cast<size_t>(l)];
    auto normed = eng.rms_norm(x, li.attn_gain, li.attn_offset);
    auto q = eng.matmul_param(normed, li.wq);
    auto k = eng.matmul_param(normed, li.wk);
    auto v = eng.matmul_param(normed, li.wv);
    std::vector<typename Eng::V> head_outs;
    head_outs.reserve(static_cast<size_t>(cfg.n_heads));
    for (int64_t h = 0; h < cfg.n_heads; ++h) {
      auto qh = eng.slice_cols(q, h * dh, (h + 1) * dh);
      auto kh = eng.slice_cols(k, h * dh, (h + 1) * dh);
      auto vh = eng.slice_cols(v, h * dh, (h + 1) * dh);
      auto scores = eng.scale(eng.matmul(qh, eng.transpose(kh)), inv_sqrt_dh);
      auto probs = eng.row_softmax(eng.masked_fill(scores, causal, kMaskFill));
      head_outs.push_back(eng.matmul(probs, vh));
    }
    x = eng.add(x, eng.matmul_param(eng.concat_cols(head_outs), li.wo));
    auto mnorm = eng.rms_norm(x, li.mlp_gain, li.mlp_offset);
    auto hidden = eng.gelu(eng.matmul_param(mnorm, li.w1));
    x = eng.add(x, eng.matmul_param(hidden, li.w2));
    observe(l + 1, x);
  }
  return x;
}

struct NoObs {
  template <class V>
  void operator()(int64_t, const V&) const {}
};

int64_t resolve_exit(const PolicyConfig& cfg, int64_t exit_depth) {
  const int64_t d = exit_depth < 0 ? cfg.deepest_exit() : exit_depth;
  for (int64_t e : cfg.exit_depths) {
    if (e == d) return d;
  }
  throw ConfigError("unknown exit depth " + std::to_string(exit_depth));
}

}  // namespace

// ------------------------------------------------------------ plain forward

Tensor backbone_hidden(const PolicyParams& params, std::span<const int> tokens,
                       int64_t depth) {
  const PolicyLayout lay = make_layout(params.config);
  EvalEngine eng{params};
  return backbone(eng, params.config, lay, tokens, depth, NoObs{});
}

std::vector<Tensor> backbone_all_states(const PolicyParams& params,
                                        std::span<const int> tokens) {
  const PolicyLayout lay = make_layout(params.config);
  EvalEngine eng{params};
  std::vector<Tensor> states;
  backbone(eng, params.config, lay, tokens, params.config.n_layers,
           [&states](int64_t, const Tensor& x) { states.push_back(x); });
  return states;
}

Tensor forward_logits(const PolicyParams& params, std::span<const int> tokens,
                      int64_t exit_depth) {
  const int64_t depth = resolve_exit(params.config, exit_depth);
  const PolicyLayout lay = make_layout(params.config);
  EvalEngine eng{params};
  Tensor hidden = backbone(eng, params.config, lay, tokens, depth, NoObs{});
  return eng.matmul_param(hidden, lay.head(depth));
}

double token_logprob(const PolicyParams& params, std::span<const int> prefix,
                     int next, int64_t exit_depth) {
  if (next < 0 || next >= static_cast<int>(params.config.vocab_size)) {
    throw ConfigError("token out of vocabulary: " + std::to_string(next));
  }
  const Tensor logits = forward_logits(params, prefix, exit_depth);
  const int64_t v = logits.cols();
  std::vector<double> row(logits.data.end() - v, logits.data.end());
  ops::log_softmax_row_inplace(row);
  return row[static_cast<size_t>(next)];
}

Trajectory sample_response(const PolicyParams& params, std::span<const int> prompt,
                           double temperature, int64_t max_len, uint64_t seed,
                           int64_t exit_depth) {
  if (temperature < 0.0) throw ConfigError("temperature must be >= 0");
  if (max_len < 1) throw ConfigError("max_len must be >= 1");
  if (static_cast<int64_t>(prompt.size()) + 1 > params.config.context_len) {
    throw ConfigError("prompt leaves no room for a response token");
  }
  const int64_t depth = resolve_exit(params.config, exit_depth);
  Rng rng(seed);
  Trajectory traj;
  traj.prompt_tokens.assign(prompt.begin(), prompt.end());
  std::vector<int> tokens = traj.prompt_tokens;
  const int64_t v = params.config.vocab_size;
  while (static_cast<int64_t>(traj.response_tokens.size()) < max_len &&
         static_cast<int64_t>(tokens.size()) < params.config.context_len) {
    const Tensor logits = forward_logits(params, tokens, depth);
    std::vector<double> row(logits.data.end() - v, logits.data.end());
    std::vector<double> logprobs = row;
    ops::log_softmax_row_inplace(logprobs);  // untempered, recorded below
    int pick = 0;
    if (temperature == 0.0) {
      for (int64_t j = 1; j < v; ++j) {
        if (row[static_cast<size_t>(j)] > row[static_cast<size_t>(pick)]) {
          pick = static_cast<int>(j);
        }
      }
    } else {
      std::vector<double> probs = row;
      if (temperature != 1.0) {
        for (double& x : probs) x /= temperature;
      }
      ops::softmax_row_inplace(probs);
      const double u = rng.next_double();
      double cdf = 0.0;
      pick = static_cast<int>(v) - 1;  // numeric fallback
      for (int64_t j = 0; j < v; ++j) {
        cdf += probs[static_cast<size_t>(j)];
        if (u < cdf) {
          pick = static_cast<int>(j);
          break;
        }
      }
    }
    traj.response_tokens.push_back(pick);
    traj.behavior_logprobs.push_back(logprobs[static_cast<size_t>(pick)]);
    tokens.push_back(pick);
    if (pick == vocab::kEos) break;
  }
  return traj;
}

// ------------------------------------------------------------- tape forward

BoundPolicy bind_policy(Tape& tape, const PolicyParams& params) {
  const PolicyLayout lay = make_layout(params.config);
  BoundPolicy bp;
  bp.tape = &tape;
  bp.config = params.config;
  bp.values.reserve(lay.entries.size());
  for (size_t i = 0; i < params.tensors.size(); ++i) {
    bp.values.push_back(tape.param(params.tensors[i], static_cast<int64_t>(i)));
  }
  return bp;
}

ValueId tape_forward_logits(const BoundPolicy& bp, std::span<const int> tokens,
                            int64_t exit_depth) {
  const int64_t depth = resolve_exit(bp.config, exit_depth);
  const PolicyLayout lay = make_layout(bp.config);
  TapeEngine eng{*bp.tape, bp.values};
  ValueId hidden = backbone(eng, bp.config, lay, tokens, depth, NoObs{});
  return eng.matmul_param(hidden, lay.head(depth));
}

}  // namespace bppo
