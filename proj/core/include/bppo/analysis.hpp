#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "bppo/objective.hpp"
#include "bppo/policy.hpp"
#include "bppo/rollout.hpp"
#include "bppo/tasks.hpp"
#include "bppo/trainer.hpp"

namespace bppo {

// ------------------------------------------------------- gradient validation

enum class LossKind { Warmup, Grpo, Bppo };
LossKind loss_kind_from_string(const std::string& s);

// A fully seeded scenario: perturbed theta (so rho != 1 and clipping can
// bind), an independent reference policy, a mixed-reward group with recorded
// behavior log-probs, and a selected pair for the BPPO case.
struct FdScenario {
  LossKind kind = LossKind::Bppo;
  PolicyParams theta;
  PolicyParams ref;
  Group group;
  BinaryPair pair;
  ObjectiveConfig objective;
  std::vector<TaskInstance> warmup_batch;
};

FdScenario make_fd_scenario(LossKind kind, uint64_t seed, const PolicyConfig& policy_cfg);

// Loss value/gradients of the scenario at an arbitrary theta.
double scenario_loss(const FdScenario& sc, const PolicyParams& theta);
std::vector<Tensor> scenario_grads(const FdScenario& sc);

struct FdCheckResult {
  double max_rel_error = 0.0;
  double mean_rel_error = 0.0;
  int64_t n_coords = 0;
};

// Central differences at n_coords seeded random parameter coordinates;
// relative error |a - b| / max(|a|, |b|, 1e-8).
FdCheckResult finite_diff_check(const FdScenario& sc, int64_t n_coords, double step,
                                uint64_t coord_seed);

// initial Ridders step per loss: the cross-entropy is smooth but has ~ln V
// magnitude (roundoff-bound, wants a large step); the clipped surrogates are
// piecewise linear in rho (kink-bound, want a small one)
double default_fd_step(LossKind kind);

// Ridders-extrapolated numerical derivative of an arbitrary scalar function of
// the parameters along coordinate (entry, idx). The calibration primitive
// under finite_diff_check, exposed so tests can point it at known functions.
double ridders_derivative(const std::function<double(const PolicyParams&)>& f,
                          const PolicyParams& at, size_t entry, int64_t idx,
                          double step);

// --------------------------------------------------------- gradient cosines

struct CosineMatrix {
  int64_t n = 0;
  std::vector<double> sim;      // n x n, row-major; undefined entries are 0
  std::vector<int> stratum;     // 1 positive, 0 negative
  std::vector<bool> defined;    // false when the response gradient is ~zero
  double mean_intra_positive = 0.0;
  double mean_intra_negative = 0.0;
  double mean_cross = 0.0;
  int64_t pairs_intra_positive = 0;
  int64_t pairs_intra_negative = 0;
  int64_t pairs_cross = 0;

  double at(int64_t i, int64_t j) const { return sim[static_cast<size_t>(i * n + j)]; }
};

// Per-response gradients of the on-policy unclipped surrogate (full mask, no
// KL), flattened in layout order. Requires a mixed-reward group.
CosineMatrix gradient_cosine_matrix(const Group& group, const PolicyParams& params);

// ------------------------------------------------------- prefix commitment

// Samples a base response, freezes its first prefix_len tokens and resamples
// K suffixes; returns the fraction agreeing with the majority reward.
double prefix_commitment(const PolicyParams& params, const TaskSpec& task,
                         const TaskInstance& instance, int64_t prefix_len, int64_t k,
                         uint64_t seed, int64_t max_len = 16);

// ------------------------------------------------------------ run comparison

struct RunLog {
  std::string algo;
  std::vector<MetricsRecord> records;  // timings merged in when present
  bool has_timings = false;
};

// Accepts a run directory (metrics.jsonl plus optional timings.jsonl) or a
// metrics file path directly.
RunLog load_run_log(const std::filesystem::path& path);

struct CostReport {
  int64_t steps_compared = 0;
  bool truncated = false;  // inputs had different lengths; common prefix used
  std::string algo_a, algo_b;
  int64_t tokens_a = 0, tokens_b = 0;
  double analytic_reduction = 0.0;   // tokens_a / tokens_b
  bool has_time_ratios = false;
  double update_time_ratio = 0.0;    // sum update_ms b / a
  double step_time_ratio = 0.0;      // sum (sample+update) b / a
  double final_eval_a = -1.0, final_eval_b = -1.0;  // -1 when never evaluated
  double auc_eval_a = -1.0, auc_eval_b = -1.0;      // step-weighted mean level
  std::vector<int64_t> steps;  // common-prefix step numbers (from run a)
  std::vector<int64_t> step_tokens_a, step_tokens_b;

  std::string to_table() const;
  std::string to_csv() const;
};

CostReport compare_runs(const std::filesystem::path& run_a,
                        const std::filesystem::path& run_b);

}  // namespace bppo
