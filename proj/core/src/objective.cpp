#include "bppo/objective.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "bppo/error.hpp"
#include "bppo/ops.hpp"
#include "bppo/rng.hpp"
#include "bppo/tape.hpp"

namespace bppo {

namespace {
constexpr double kLogRatioClamp = 20.0;
}

PrefixSpec PrefixSpec::absolute(int64_t n) {
  PrefixSpec s;
  s.mode = Mode::Absolute;
  s.tokens = n;
  s.validate();
  return s;
}

PrefixSpec PrefixSpec::of_fraction(double f) {
  PrefixSpec s;
  s.mode = Mode::Fraction;
  s.fraction = f;
  s.validate();
  return s;
}

void PrefixSpec::validate() const {
  if (mode == Mode::Absolute) {
    if (tokens < 1) throw ConfigError("prefix tokens must be >= 1");
  } else {
    if (!(fraction > 0.0) || fraction > 1.0) {
      throw ConfigError("prefix fraction must be in (0, 1]");
    }
  }
}

int64_t PrefixSpec::effective_len(int64_t response_len) const {
  if (response_len < 1) throw ConfigError("response length must be >= 1");
  int64_t n = 0;
  if (mode == Mode::Absolute) {
    n = tokens;
  } else {
    n = static_cast<int64_t>(
        std::ceil(fraction * static_cast<double>(response_len)));
  }
  return std::min(n, response_len);
}

void ObjectiveConfig::validate() const {
  if (!(epsilon > 0.0) || !(epsilon < 1.0)) throw ConfigError("epsilon must be in (0, 1)");
  if (beta < 0.0) throw ConfigError("beta must be >= 0");
  prefix.validate();
}

std::vector<uint8_t> make_prefix_mask(int64_t response_len, const PrefixSpec& spec) {
  const int64_t n = spec.effective_len(response_len);
  std::vector<uint8_t> mask(static_cast<size_t>(response_len), 0);
  std::fill_n(mask.begin(), n, static_cast<uint8_t>(1));
  return mask;
}

std::optional<BinaryPair> select_binary(const Group& group, const ObjectiveConfig& cfg,
                                        uint64_t seed) {
  cfg.validate();
  std::vector<int64_t> positives, negatives;
  for (int64_t i = 0; i < group.size(); ++i) {
    (group.rewards[static_cast<size_t>(i)] > 0.5 ? positives : negatives).push_back(i);
  }
  if (positives.empty() || negatives.empty()) return std::nullopt;

  auto pick_extreme = [&group](const std::vector<int64_t>& idx, bool want_max) {
    int64_t best = idx[0];
    for (int64_t i : idx) {
      const double a = group.advantages[static_cast<size_t>(i)];
      const double b = group.advantages[static_cast<size_t>(best)];
      if (want_max ? a > b : a < b) best = i;  // strict: lowest index wins ties
    }
    return best;
  };
  auto pick_median_len = [&group](std::vector<int64_t> idx) {
    std::sort(idx.begin(), idx.end(), [&group](int64_t a, int64_t b) {
      const size_t la = group.trajectories[static_cast<size_t>(a)].response_tokens.size();
      const size_t lb = group.trajectories[static_cast<size_t>(b)].response_tokens.size();
      return la != lb ? la < lb : a < b;  // shorter first, then lower index
    });
    return idx[(idx.size() - 1) / 2];  // lower median
  };

  BinaryPair pair;
  switch (cfg.selection) {
    case SelectionStrategy::Random: {
      Rng rng(seed);
      pair.positive_index = positives[rng.below(positives.size())];
      pair.negative_index = negatives[rng.below(negatives.size())];
      break;
    }
    case SelectionStrategy::ExtremeAdvantage:
      pair.positive_index = pick_extreme(positives, /*want_max=*/true);
      pair.negative_index = pick_extreme(negatives, /*want_max=*/false);
      break;
    case SelectionStrategy::MedianLength:
      pair.positive_index = pick_median_len(positives);
      pair.negative_index = pick_median_len(negatives);
      break;
  }
  const auto len = [&group](int64_t i) {
    return static_cast<int64_t>(
        group.trajectories[static_cast<size_t>(i)].response_tokens.size());
  };
  pair.positive_mask = make_prefix_mask(len(pair.positive_index), cfg.prefix);
  pair.negative_mask = make_prefix_mask(len(pair.negative_index), cfg.prefix);
  return pair;
}

namespace {

int64_t mask_total(const std::vector<uint8_t>& mask) {
  int64_t n = 0;
  for (uint8_t m : mask) n += m;
  return n;
}

// Reference log-probs over the truncated rows, computed outside the tape:
// the reference policy never receives gradient.
Tensor ref_masked_logprobs(const PolicyParams& ref, std::span<const int> seq,
                           int64_t row0, int64_t row1, int64_t exit_depth) {
  const Tensor logits = forward_logits(ref, seq, exit_depth);
  return ops::log_softmax(ops::slice_rows(logits, row0, row1));
}

}  // namespace

LossResult surrogate_loss(const PolicyParams& theta, const Group& group,
                          const std::vector<int64_t>& indices,
                          const std::vector<std::vector<uint8_t>>& masks,
                          double outer_weight, const PolicyParams& ref,
                          const ObjectiveConfig& cfg, bool with_grads) {
  cfg.validate();
  if (indices.empty()) throw ConfigError("surrogate_loss: empty response set");
  if (indices.size() != masks.size()) {
    throw ConfigError("surrogate_loss: indices/masks size mismatch");
  }
  const int64_t exit_depth = theta.config.deepest_exit();
  const int64_t prompt_len = static_cast<int64_t>(group.prompt_tokens.size());

  Tape tape;
  const BoundPolicy bp = bind_policy(tape, theta);

  LossStats stats;
  stats.rho_min = std::numeric_limits<double>::infinity();
  stats.rho_max = -std::numeric_limits<double>::infinity();
  double rho_sum = 0.0;
  int64_t clip_active = 0;

  ValueId inner_acc = -1;
  ValueId kl_acc = -1;

  for (size_t s = 0; s < indices.size(); ++s) {
    const int64_t i = indices[s];
    if (i < 0 || i >= group.size()) throw ConfigError("surrogate_loss: index out of range");
    const Trajectory& traj = group.trajectories[static_cast<size_t>(i)];
    const std::vector<uint8_t>& mask = masks[s];
    const int64_t resp_len = static_cast<int64_t>(traj.response_tokens.size());
    if (static_cast<int64_t>(mask.size()) != resp_len) {
      throw ConfigError("surrogate_loss: mask length mismatch");
    }
    if (traj.behavior_logprobs.size() != traj.response_tokens.size()) {
      throw ConfigError("surrogate_loss: behavior logprobs missing");
    }
    const int64_t n_eff = mask_total(mask);
    if (n_eff < 1) throw ConfigError("surrogate_loss: empty mask");
    // masks are prefixes by construction; the masked-out suffix is dropped
    // from the forward entirely
    for (int64_t t = 0; t < n_eff; ++t) {
      if (!mask[static_cast<size_t>(t)]) {
        throw ConfigError("surrogate_loss: mask is not a prefix");
      }
    }
    const double adv = group.advantages[static_cast<size_t>(i)];

    // truncated input: prompt plus the first n_eff - 1 response tokens; row
    // prompt_len - 1 + t predicts response token t
    std::vector<int> seq = group.prompt_tokens;
    seq.insert(seq.end(), traj.response_tokens.begin(),
               traj.response_tokens.begin() + (n_eff - 1));
    const int64_t row0 = prompt_len - 1;
    const int64_t row1 = row0 + n_eff;

    const ValueId logits = tape_forward_logits(bp, seq, exit_depth);
    const ValueId rows = tape.slice_rows(logits, row0, row1);
    const ValueId lsm = tape.log_softmax(rows);

    std::vector<std::pair<int64_t, int64_t>> coords;
    coords.reserve(static_cast<size_t>(n_eff));
    for (int64_t t = 0; t < n_eff; ++t) {
      coords.emplace_back(t, traj.response_tokens[static_cast<size_t>(t)]);
    }
    const ValueId lp_theta = tape.gather(lsm, coords);
    const ValueId lp_old = tape.constant(
        Tensor::vector({traj.behavior_logprobs.begin(),
                        traj.behavior_logprobs.begin() + n_eff}));
    const ValueId log_ratio_raw = tape.sub(lp_theta, lp_old);
    for (double lr : tape.value(log_ratio_raw).data) {
      if (std::abs(lr) > kLogRatioClamp) stats.ratio_clamped = true;
    }
    const ValueId log_ratio = tape.clamp(log_ratio_raw, -kLogRatioClamp, kLogRatioClamp);
    const ValueId rho = tape.vexp(log_ratio);
    const ValueId adv_vec = tape.constant(Tensor::full({n_eff}, adv));
    const ValueId unclipped = tape.mul(rho, adv_vec);
    const ValueId clipped = tape.mul(tape.clamp(rho, 1.0 - cfg.epsilon, 1.0 + cfg.epsilon),
                                     adv_vec);
    const ValueId surr = tape.min_elem(unclipped, clipped);
    const ValueId inner = tape.scale(tape.sum(surr), 1.0 / static_cast<double>(n_eff));
    inner_acc = s == 0 ? inner : tape.add(inner_acc, inner);

    if (cfg.beta > 0.0) {
      ValueId kl_sum = -1;
      if (cfg.kl_mode == KlMode::Exact) {
        const Tensor lsm_ref = ref_masked_logprobs(ref, seq, row0, row1, exit_depth);
        const ValueId diff = tape.sub(lsm, tape.constant(lsm_ref));
        kl_sum = tape.sum(tape.mul(tape.vexp(lsm), diff));
      } else {
        // k3 estimator at the realized token: exp(d) - d - 1, d = lref - ltheta
        const Tensor lsm_ref = ref_masked_logprobs(ref, seq, row0, row1, exit_depth);
        const ValueId lp_ref = tape.constant(ops::gather(lsm_ref, coords));
        const ValueId d = tape.sub(lp_ref, lp_theta);
        kl_sum = tape.sum(tape.sub(tape.vexp(d), tape.add_scalar(d, 1.0)));
      }
      kl_acc = kl_acc < 0 ? kl_sum : tape.add(kl_acc, kl_sum);
    }

    // diagnostics over this response's masked tokens
    const Tensor& rho_vals = tape.value(rho);
    for (int64_t t = 0; t < n_eff; ++t) {
      const double r = rho_vals.data[static_cast<size_t>(t)];
      rho_sum += r;
      stats.rho_min = std::min(stats.rho_min, r);
      stats.rho_max = std::max(stats.rho_max, r);
      if ((adv > 0.0 && r > 1.0 + cfg.epsilon) || (adv < 0.0 && r < 1.0 - cfg.epsilon)) {
        ++clip_active;
      }
    }
    stats.grad_token_count += n_eff;
  }

  ValueId loss = -1;
  if (cfg.beta > 0.0) {
    const ValueId kl_mean =
        tape.scale(kl_acc, 1.0 / static_cast<double>(stats.grad_token_count));
    stats.kl = tape.value(kl_mean).data[0];
    loss = tape.sub(tape.scale(kl_mean, cfg.beta), tape.scale(inner_acc, outer_weight));
  } else {
    loss = tape.scale(inner_acc, -outer_weight);
  }

  LossResult result;
  result.loss = tape.value(loss).data[0];
  stats.loss = result.loss;
  stats.rho_mean = rho_sum / static_cast<double>(stats.grad_token_count);
  stats.clip_fraction =
      static_cast<double>(clip_active) / static_cast<double>(stats.grad_token_count);
  result.stats = stats;
  if (with_grads) {
    result.grads = tape.backward(loss, static_cast<int64_t>(bp.values.size()));
  }
  return result;
}

LossResult bppo_loss(const PolicyParams& theta, const Group& group,
                     const BinaryPair& pair, const PolicyParams& ref,
                     const ObjectiveConfig& cfg, bool with_grads) {
  if (pair.positive_index < 0 || pair.positive_index >= group.size() ||
      pair.negative_index < 0 || pair.negative_index >= group.size()) {
    throw ConfigError("bppo_loss: pair index out of range");
  }
  if (group.rewards[static_cast<size_t>(pair.positive_index)] <= 0.5 ||
      group.rewards[static_cast<size_t>(pair.negative_index)] > 0.5) {
    throw ConfigError("bppo_loss: pair strata do not match rewards");
  }
  return surrogate_loss(theta, group, {pair.positive_index, pair.negative_index},
                        {pair.positive_mask, pair.negative_mask}, 0.5, ref, cfg,
                        with_grads);
}

LossResult grpo_loss(const PolicyParams& theta, const Group& group,
                     const PolicyParams& ref, const ObjectiveConfig& cfg,
                     bool with_grads) {
  if (group.size() < 2) throw ConfigError("grpo_loss: group too small");
  std::vector<int64_t> indices(static_cast<size_t>(group.size()));
  std::vector<std::vector<uint8_t>> masks(indices.size());
  for (int64_t i = 0; i < group.size(); ++i) {
    indices[static_cast<size_t>(i)] = i;
    masks[static_cast<size_t>(i)] = std::vector<uint8_t>(
        group.trajectories[static_cast<size_t>(i)].response_tokens.size(), 1);
  }
  return surrogate_loss(theta, group, indices, masks,
                        1.0 / static_cast<double>(group.size()), ref, cfg, with_grads);
}

double token_kl_exact(const PolicyParams& theta, const PolicyParams& ref,
                      std::span<const int> context, int64_t exit_depth) {
  const Tensor lt = forward_logits(theta, context, exit_depth);
  const Tensor lr = forward_logits(ref, context, exit_depth);
  const int64_t v = lt.cols();
  std::vector<double> pt(lt.data.end() - v, lt.data.end());
  std::vector<double> pr(lr.data.end() - v, lr.data.end());
  ops::log_softmax_row_inplace(pt);
  ops::log_softmax_row_inplace(pr);
  double kl = 0.0;
  for (int64_t j = 0; j < v; ++j) {
    kl += std::exp(pt[static_cast<size_t>(j)]) *
          (pt[static_cast<size_t>(j)] - pr[static_cast<size_t>(j)]);
  }
  return kl;
}

double token_kl_k3(const PolicyParams& theta, const PolicyParams& ref,
                   std::span<const int> context, int realized_token,
                   int64_t exit_depth) {
  const double lt = token_logprob(theta, context, realized_token, exit_depth);
  const double lr = token_logprob(ref, context, realized_token, exit_depth);
  const double d = lr - lt;
  return std::exp(d) - d - 1.0;
}

}  // namespace bppo
