#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "bppo/tape.hpp"
#include "bppo/tensor.hpp"

namespace bppo {

struct PolicyConfig {
  int64_t vocab_size = 32;
  int64_t context_len = 64;
  int64_t d_model = 64;
  int64_t n_heads = 4;
  int64_t n_layers = 4;
  std::vector<int64_t> exit_depths = {1, 4};  // sorted; deepest == n_layers
  double init_scale = 0.02;

  void validate() const;
  int64_t deepest_exit() const { return exit_depths.back(); }
};

// Fixed parameter ordering shared by init, Adam, checkpoints and gradient
// flattening. Entry order: tok_emb, pos_emb, per-layer blocks, exit heads.
struct PolicyLayout {
  enum class Init { Gaussian, One, Zero };
  struct Entry {
    std::string name;
    std::vector<int64_t> shape;
    Init init;
  };
  struct LayerIdx {
    int64_t attn_gain, attn_offset, wq, wk, wv, wo;
    int64_t mlp_gain, mlp_offset, w1, w2;
  };

  std::vector<Entry> entries;
  int64_t tok_emb = 0, pos_emb = 0;
  std::vector<LayerIdx> layers;
  std::vector<std::pair<int64_t, int64_t>> heads;  // (exit_depth, entry index)

  int64_t head(int64_t exit_depth) const;  // throws ConfigError on unknown depth
  int64_t count() const { return static_cast<int64_t>(entries.size()); }
};

PolicyLayout make_layout(const PolicyConfig& config);

// One flat store of backbone + head tensors. Every exit depth reads the same
// backbone tensors, so the familial members share storage by construction.
struct PolicyParams {
  PolicyConfig config;
  std::vector<Tensor> tensors;  // aligned with make_layout(config).entries

  int64_t scalar_count() const;
};

PolicyParams init_params(const PolicyConfig& config, uint64_t seed);

struct Trajectory {
  std::vector<int> prompt_tokens;
  std::vector<int> response_tokens;
  std::vector<double> behavior_logprobs;  // log pi_old at temperature 1
  double reward = 0.0;
};

// ------------------------------------------------------------ plain forward

// Logits for every position at the given exit depth. exit_depth must be one
// of config.exit_depths.
Tensor forward_logits(const PolicyParams& params, std::span<const int> tokens,
                      int64_t exit_depth);

// Pre-head hidden state after `depth` blocks (any depth in [1, n_layers]).
Tensor backbone_hidden(const PolicyParams& params, std::span<const int> tokens,
                       int64_t depth);

// Hidden states after every block, in depth order 1..n_layers.
std::vector<Tensor> backbone_all_states(const PolicyParams& params,
                                        std::span<const int> tokens);

double token_logprob(const PolicyParams& params, std::span<const int> prefix,
                     int next, int64_t exit_depth);

// Autoregressive sampler. Selection uses temperature-scaled probabilities
// (temperature 0 = argmax, lowest index on ties); recorded behavior_logprobs
// are always the untempered log-probs. Stops at EOS, max_len, or a full
// context window. exit_depth < 0 means the deepest exit.
Trajectory sample_response(const PolicyParams& params, std::span<const int> prompt,
                           double temperature, int64_t max_len, uint64_t seed,
                           int64_t exit_depth = -1);

// ------------------------------------------------------------- tape forward

// Policy parameters bound onto a tape as gradient leaves (param ids equal
// layout entry indices). Binding all entries keeps backward()'s output
// aligned with the layout even when some tensors never reach the loss.
struct BoundPolicy {
  Tape* tape = nullptr;
  PolicyConfig config;
  std::vector<ValueId> values;  // one per layout entry
};

BoundPolicy bind_policy(Tape& tape, const PolicyParams& params);

// Same kernel sequence as forward_logits, recorded on the tape; the two paths
// produce bitwise identical values.
ValueId tape_forward_logits(const BoundPolicy& bp, std::span<const int> tokens,
                            int64_t exit_depth);

}  // namespace bppo
