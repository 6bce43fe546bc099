#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "bppo/policy.hpp"
#include "bppo/rollout.hpp"
#include "bppo/tensor.hpp"

namespace bppo {

enum class SelectionStrategy { Random, ExtremeAdvantage, MedianLength };
enum class KlMode { Exact, K3Estimator };

struct PrefixSpec {
  enum class Mode { Absolute, Fraction };
  Mode mode = Mode::Fraction;
  int64_t tokens = 1;      // Absolute
  double fraction = 0.5;   // Fraction, ceiling-rounded

  static PrefixSpec absolute(int64_t n);
  static PrefixSpec of_fraction(double f);
  void validate() const;
  // number of leading response tokens that receive gradient
  int64_t effective_len(int64_t response_len) const;
};

struct ObjectiveConfig {
  double epsilon = 0.2;  // clip coefficient
  double beta = 0.01;    // KL weight
  PrefixSpec prefix;     // default Fraction(0.5)
  SelectionStrategy selection = SelectionStrategy::Random;
  KlMode kl_mode = KlMode::Exact;

  void validate() const;
};

// One positive and one negative representative plus their prefix masks.
struct BinaryPair {
  int64_t positive_index = -1;
  int64_t negative_index = -1;
  std::vector<uint8_t> positive_mask;
  std::vector<uint8_t> negative_mask;
};

struct LossStats {
  double loss = 0.0;
  double rho_mean = 0.0, rho_min = 0.0, rho_max = 0.0;  // over masked tokens
  double clip_fraction = 0.0;  // share of masked tokens where the clip binds
  double kl = 0.0;             // reported as 0 when beta == 0 (term not built)
  int64_t grad_token_count = 0;  // sum over updated responses of mask totals
  bool ratio_clamped = false;    // log-ratio hit the +/-20 guard
};

struct LossResult {
  double loss = 0.0;
  LossStats stats;
  std::vector<Tensor> grads;  // per layout entry; empty when not requested
};

std::vector<uint8_t> make_prefix_mask(int64_t response_len, const PrefixSpec& spec);

// Returns nullopt (group skipped) when either stratum is empty. Random picks
// are seeded; the caller derives the seed from its prompt index.
std::optional<BinaryPair> select_binary(const Group& group, const ObjectiveConfig& cfg,
                                        uint64_t seed);

// Shared core of both losses: clipped importance-weighted surrogate over the
// responses in `indices` with per-response masks and the given outer weight,
// minus beta times the KL to the reference policy (token mean pooled over the
// same masked positions). The returned loss is the negated objective, ready
// for minimization. Masked-out tokens are excluded from the recorded graph
// entirely: the forward runs on the truncated sequence, which is both the
// exact-zero-gradient guarantee and the compute saving. Exposed so tests can
// check the two public losses against it structurally.
LossResult surrogate_loss(const PolicyParams& theta, const Group& group,
                          const std::vector<int64_t>& indices,
                          const std::vector<std::vector<uint8_t>>& masks,
                          double outer_weight, const PolicyParams& ref,
                          const ObjectiveConfig& cfg, bool with_grads = true);

// Binary-pair objective: S = {positive, negative}, outer weight 1/2.
LossResult bppo_loss(const PolicyParams& theta, const Group& group,
                     const BinaryPair& pair, const PolicyParams& ref,
                     const ObjectiveConfig& cfg, bool with_grads = true);

// Baseline: S = all G responses, full masks, outer weight 1/G.
LossResult grpo_loss(const PolicyParams& theta, const Group& group,
                     const PolicyParams& ref, const ObjectiveConfig& cfg,
                     bool with_grads = true);

// Next-token KL diagnostics at a single context (deepest exit by default).
double token_kl_exact(const PolicyParams& theta, const PolicyParams& ref,
                      std::span<const int> context, int64_t exit_depth = -1);
double token_kl_k3(const PolicyParams& theta, const PolicyParams& ref,
                   std::span<const int> context, int realized_token,
                   int64_t exit_depth = -1);

}  // namespace bppo
