#include "bppo/rollout.hpp"

#include <cmath>

#include "bppo/error.hpp"
#include "bppo/rng.hpp"

namespace bppo {

std::vector<double> compute_advantages(const std::vector<double>& rewards) {
  const int64_t g = static_cast<int64_t>(rewards.size());
  if (g < 2) throw ConfigError("advantages need a group of at least 2");
  bool all_equal = true;
  for (double r : rewards) all_equal = all_equal && r == rewards[0];
  if (all_equal) return std::vector<double>(rewards.size(), 0.0);
  double mean = 0.0;
  for (double r : rewards) mean += r;
  mean /= static_cast<double>(g);
  double var = 0.0;
  for (double r : rewards) var += (r - mean) * (r - mean);
  var /= static_cast<double>(g);  // population variance
  const double denom = std::sqrt(var) + 1e-6;
  std::vector<double> adv(rewards.size());
  for (size_t i = 0; i < rewards.size(); ++i) adv[i] = (rewards[i] - mean) / denom;
  return adv;
}

bool group_is_degenerate(const Group& g) {
  for (double r : g.rewards) {
    if (r != g.rewards[0]) return false;
  }
  return true;
}

Group collect_group(const PolicyParams& params_old, const TaskSpec& task,
                    const TaskInstance& instance, int64_t group_size,
                    double temperature, int64_t max_len, uint64_t global_seed,
                    int64_t prompt_index) {
  if (group_size < 2) throw ConfigError("group size must be >= 2");
  Group g;
  g.prompt_tokens = instance.prompt_tokens;
  g.trajectories.reserve(static_cast<size_t>(group_size));
  g.rewards.reserve(static_cast<size_t>(group_size));
  for (int64_t i = 0; i < group_size; ++i) {
    const uint64_t seed = derive_seed(
        {global_seed, static_cast<uint64_t>(prompt_index), static_cast<uint64_t>(i)});
    Trajectory traj =
        sample_response(params_old, instance.prompt_tokens, temperature, max_len, seed);
    traj.reward = verify(task, traj.prompt_tokens, traj.response_tokens);
    g.rewards.push_back(traj.reward);
    g.trajectories.push_back(std::move(traj));
  }
  g.advantages = compute_advantages(g.rewards);
  return g;
}

}  // namespace bppo
