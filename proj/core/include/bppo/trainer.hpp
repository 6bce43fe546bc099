#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "bppo/objective.hpp"
#include "bppo/policy.hpp"
#include "bppo/tasks.hpp"

namespace bppo {

enum class Algo { Grpo, Bppo };
std::string algo_to_string(Algo a);
Algo algo_from_string(const std::string& s);

struct WarmupConfig {
  int64_t n_instances = 512;
  int64_t batch_size = 32;
  double lr = 1e-3;
  double target_accuracy = 0.30;
  int64_t max_steps = 2000;
  int64_t eval_every = 10;
  int64_t eval_size = 200;

  void validate() const;
};

struct TrainConfig {
  Algo algo = Algo::Grpo;
  TaskSpec task;
  int64_t group_size = 8;      // G
  int64_t batch_prompts = 16;  // B
  int64_t steps = 100;         // S
  int64_t inner_epochs = 1;    // epochs per rollout batch; >1 activates clipping
  double lr = 3e-4;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  double temperature = 1.0;
  int64_t max_response_len = 8;
  int64_t eval_size = 200;
  int64_t eval_every = 25;
  int64_t checkpoint_every = 0;  // 0 = final checkpoint only
  uint64_t seed = 0;
  int64_t workers = 1;
  ObjectiveConfig objective;
  PolicyConfig policy;
  WarmupConfig warmup;

  void validate() const;
};

struct AdamState {
  std::vector<Tensor> m, v;
  int64_t t = 0;
};

AdamState init_adam(const PolicyParams& params);
void adam_step(PolicyParams& params, AdamState& state, const std::vector<Tensor>& grads,
               double lr, double beta1, double beta2, double eps);

// Per-step log record. sample_ms/update_ms are wall-clock and therefore the
// only nondeterministic fields; the run writer keeps them in a separate
// timings file so the metrics log stays byte-reproducible.
struct MetricsRecord {
  int64_t step = 0;
  Algo algo = Algo::Grpo;
  double mean_reward = 0.0;
  double frac_groups_skipped = 0.0;
  double loss = 0.0;
  double kl = 0.0;
  double clip_fraction = 0.0;
  double rho_mean = 0.0;
  int64_t grad_token_count = 0;
  bool ratio_clamped = false;
  bool has_eval = false;
  double eval_accuracy = 0.0;
  uint64_t seed = 0;
  double sample_ms = 0.0;
  double update_ms = 0.0;
};

struct WarmupRecord {
  int64_t step = 0;
  double ce_loss = 0.0;
  bool has_eval = false;
  double eval_accuracy = 0.0;
};

struct WarmupResult {
  bool reached_target = false;
  double best_accuracy = 0.0;
  double final_accuracy = 0.0;
  int64_t steps_run = 0;
  PolicyParams params;
  std::vector<WarmupRecord> history;
};

// Mean token-level cross-entropy of the oracle responses at the deepest exit.
// Shared by the warmup loop, gradient checks and tests.
LossResult warmup_ce_loss(const PolicyParams& theta,
                          const std::vector<TaskInstance>& batch,
                          bool with_grads = true);

// Trains with cross-entropy until eval accuracy reaches the configured target
// or the step cap; the returned params serve as both pi_ref and the RL start.
WarmupResult supervised_warmup(const TrainConfig& cfg, const PolicyParams& start);

// Greedy decoding exact-match accuracy over n freshly generated instances.
double evaluate(const PolicyParams& params, const TaskSpec& task, int64_t n_instances,
                uint64_t seed);

// The RL outer loop. pi_ref is frozen at warm_start for the whole run. When
// run_dir is non-empty, writes config.json, metrics.jsonl, timings.jsonl and
// checkpoints there. Results are bit-identical for any worker count.
std::vector<MetricsRecord> train(const TrainConfig& cfg, const PolicyParams& warm_start,
                                 const std::filesystem::path& run_dir = {});

}  // namespace bppo
