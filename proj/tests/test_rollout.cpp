#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <vector>

#include "bppo/rng.hpp"
#include "bppo/rollout.hpp"
#include "bppo/tasks.hpp"
#include "test_util.hpp"

using namespace bppo;

// -------------------------------------------------------------- advantages

TEST_CASE("advantage arithmetic on [1,0,0,1]") {
  const auto adv = compute_advantages({1, 0, 0, 1});
  // mean 0.5, population std 0.5; the 1e-6 guard shifts the scale a hair
  CHECK(std::fabs(adv[0] - 1.0) < 1e-5);
  CHECK(std::fabs(adv[1] + 1.0) < 1e-5);
  CHECK(std::fabs(adv[2] + 1.0) < 1e-5);
  CHECK(std::fabs(adv[3] - 1.0) < 1e-5);
}

TEST_CASE("advantage arithmetic on [1,0,0,0]") {
  const auto adv = compute_advantages({1, 0, 0, 0});
  CHECK(std::fabs(adv[0] - std::sqrt(3.0)) < 1e-5);         // 1.732...
  for (int i = 1; i < 4; ++i) {
    CHECK(std::fabs(adv[i] + 1.0 / std::sqrt(3.0)) < 1e-5);  // -0.577...
  }
}

TEST_CASE("all-equal rewards give exact zeros") {
  for (const auto& r :
       {std::vector<double>{1, 1, 1, 1}, std::vector<double>{0, 0}, std::vector<double>{1, 1}}) {
    for (double a : compute_advantages(r)) CHECK(a == 0.0);
  }
}

TEST_CASE("advantages are shift-invariant and sum to zero") {
  const std::vector<double> r{1, 0, 0, 1, 0, 1, 1, 0};
  const auto base = compute_advantages(r);

  double total = 0.0;
  for (double a : base) total += a;
  CHECK(std::fabs(total) < 1e-9);

  for (double c : {1.0, -2.0, 10.0}) {
    std::vector<double> shifted = r;
    for (double& x : shifted) x += c;
    const auto adv = compute_advantages(shifted);
    for (size_t i = 0; i < adv.size(); ++i) {
      CHECK(std::fabs(adv[i] - base[i]) < 1e-12);
    }
  }
}

TEST_CASE("mixed binary groups split cleanly by sign") {
  Rng rng(17);
  for (int trial = 0; trial < 200; ++trial) {
    const size_t g = 2 + rng.below(7);
    std::vector<double> r(g);
    bool any1 = false, any0 = false;
    for (double& x : r) {
      x = rng.below(2) ? 1.0 : 0.0;
      (x == 1.0 ? any1 : any0) = true;
    }
    if (!any1 || !any0) continue;
    const auto adv = compute_advantages(r);
    for (size_t i = 0; i < g; ++i) {
      if (r[i] == 1.0) {
        CHECK(adv[i] > 0.0);
      } else {
        CHECK(adv[i] < 0.0);
      }
    }
  }
}

TEST_CASE("group degeneracy detection") {
  Group g = testutil::manual_group({vocab::kBos}, {{vocab::kEos}, {vocab::kEos}},
                                   {{-0.1}, {-0.1}}, {1, 1});
  CHECK(group_is_degenerate(g));
  g.rewards = {1, 0};
  CHECK(!group_is_degenerate(g));
}

// ------------------------------------------------------------ group sampling

TEST_CASE("collect_group is deterministic and verifier-scored") {
  const PolicyConfig cfg = testutil::tiny_config();
  const PolicyParams params = init_params(cfg, 7);
  TaskSpec task;
  task.kind = TaskKind::ModAdd;
  task.modulus = 10;
  const TaskInstance inst = gen_instance(task, 42);

  const Group a = collect_group(params, task, inst, 4, 1.0, 6, 123, 9);
  const Group b = collect_group(params, task, inst, 4, 1.0, 6, 123, 9);
  REQUIRE(a.size() == 4);
  CHECK(a.prompt_tokens == inst.prompt_tokens);
  for (int64_t i = 0; i < 4; ++i) {
    const auto& ta = a.trajectories[static_cast<size_t>(i)];
    const auto& tb = b.trajectories[static_cast<size_t>(i)];
    CHECK(ta.response_tokens == tb.response_tokens);
    CHECK(ta.behavior_logprobs == tb.behavior_logprobs);
    CHECK(ta.reward == verify(task, inst.prompt_tokens, ta.response_tokens));
    CHECK(a.rewards[static_cast<size_t>(i)] == ta.reward);
    CHECK(ta.behavior_logprobs.size() == ta.response_tokens.size());
    CHECK(!ta.response_tokens.empty());
  }
  CHECK(a.advantages == compute_advantages(a.rewards));

  // different prompt index shifts every response stream
  const Group c = collect_group(params, task, inst, 4, 1.0, 6, 123, 10);
  bool any_diff = false;
  for (int64_t i = 0; i < 4; ++i) {
    any_diff |= c.trajectories[static_cast<size_t>(i)].response_tokens !=
                a.trajectories[static_cast<size_t>(i)].response_tokens;
  }
  CHECK(any_diff);
}

TEST_CASE("a deterministic sampler yields identical trajectories and a degenerate group") {
  // EOS with probability ~1: every draw produces the same one-token response
  const PolicyParams eos_policy =
      testutil::crafted_policy(testutil::peaked_logits(32, vocab::kEos, 0.999999));
  TaskSpec task;
  task.kind = TaskKind::ModAdd;
  task.modulus = 10;
  const TaskInstance inst = gen_instance(task, 1);
  const Group g = collect_group(eos_policy, task, inst, 6, 1.0, 4, 5, 0);
  for (const auto& t : g.trajectories) {
    CHECK(t.response_tokens == std::vector<int>{vocab::kEos});
  }
  CHECK(group_is_degenerate(g));
  for (double a : g.advantages) CHECK(a == 0.0);
}

TEST_CASE("mixed-group frequency follows the binomial formula") {
  // Crafted policy with a constant, exactly known per-trajectory success
  // probability p on ModAdd mod 2: the first token comes from a distribution
  // with q mass on each answer digit, and after any answer digit the EOS
  // probability is e, so p = q * e for every instance.
  const int d0 = vocab::kDigit0, d1 = vocab::kDigit0 + 1;
  std::vector<double> first(32, std::log(0.47 / 29.0));
  first[static_cast<size_t>(d0)] = std::log(0.24);
  first[static_cast<size_t>(d1)] = std::log(0.24);
  first[vocab::kEos] = std::log(0.05);
  std::vector<double> after(32, std::log(0.5 / 31.0));
  after[vocab::kEos] = std::log(0.5);
  const PolicyParams params = testutil::crafted_policy(first, after, {d0, d1});

  // recompute the crafted masses through an independent softmax
  const auto softmax_at = [](const std::vector<double>& l, size_t idx) {
    double z = 0.0;
    for (double x : l) z += std::exp(x);
    return std::exp(l[idx]) / z;
  };
  const double q = softmax_at(first, static_cast<size_t>(d0));
  const double e = softmax_at(after, vocab::kEos);
  const double p = q * e;

  TaskSpec task;
  task.kind = TaskKind::ModAdd;
  task.modulus = 2;
  const int64_t n_groups = 1000, g_size = 4;
  int64_t mixed = 0;
  double reward_sum = 0.0;
  for (int64_t i = 0; i < n_groups; ++i) {
    const TaskInstance inst = gen_instance(task, derive_seed({0xB1, static_cast<uint64_t>(i)}));
    const Group g = collect_group(params, task, inst, g_size, 1.0, 4, 777, i);
    if (!group_is_degenerate(g)) ++mixed;
    for (double r : g.rewards) reward_sum += r;
  }
  const double want =
      1.0 - std::pow(p, double(g_size)) - std::pow(1.0 - p, double(g_size));
  const double freq = static_cast<double>(mixed) / static_cast<double>(n_groups);
  const double mean_reward = reward_sum / static_cast<double>(n_groups * g_size);

  MESSAGE("p=" << p << " mixed freq=" << freq << " formula=" << want);
  CHECK(std::fabs(freq - want) <= 0.03);
  CHECK(std::fabs(mean_reward - p) <= 0.02);
}
