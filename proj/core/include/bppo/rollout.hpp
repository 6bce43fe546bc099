#pragma once

#include <cstdint>
#include <vector>

#include "bppo/policy.hpp"
#include "bppo/tasks.hpp"

namespace bppo {

struct Group {
  std::vector<int> prompt_tokens;
  std::vector<Trajectory> trajectories;
  std::vector<double> rewards;     // binary {0, 1}
  std::vector<double> advantages;  // group-standardized, broadcast per token

  int64_t size() const { return static_cast<int64_t>(trajectories.size()); }
};

// (r_i - mean) / (population std + 1e-6); all-equal rewards give exact zeros.
std::vector<double> compute_advantages(const std::vector<double>& rewards);

// True when every reward equals the first (no mixed strata).
bool group_is_degenerate(const Group& g);

// Samples G responses from the deepest exit of params_old; per-response random
// streams derive from (global_seed, prompt_index, response_index), so results
// never depend on scheduling or worker count.
Group collect_group(const PolicyParams& params_old, const TaskSpec& task,
                    const TaskInstance& instance, int64_t group_size,
                    double temperature, int64_t max_len, uint64_t global_seed,
                    int64_t prompt_index);

}  // namespace bppo
