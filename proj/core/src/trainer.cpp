#include "bppo/trainer.hpp"

#include <chrono>
#include <cmath>
#include <fstream>

#include <json.hpp>

#include "bppo/checkpoint.hpp"
#include "bppo/error.hpp"
#include "bppo/parallel.hpp"
#include "bppo/rng.hpp"
#include "bppo/rollout.hpp"
#include "bppo/tape.hpp"
#include "config_io.hpp"

namespace bppo {

namespace {

// seed-stream tags; each derived stream is independent of the others
constexpr uint64_t kTagInstance = 0xA1;
constexpr uint64_t kTagEval = 0xA2;
constexpr uint64_t kTagSelect = 0xA3;
constexpr uint64_t kTagWarmupData = 0xA4;
constexpr uint64_t kTagWarmupBatch = 0xA5;

double ms_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0)
      .count();
}

}  // namespace

std::string algo_to_string(Algo a) { return a == Algo::Grpo ? "grpo" : "bppo"; }

Algo algo_from_string(const std::string& s) {
  if (s == "grpo") return Algo::Grpo;
  if (s == "bppo") return Algo::Bppo;
  throw ConfigError("unknown algo '" + s + "' (expected grpo|bppo)");
}

void WarmupConfig::validate() const {
  if (n_instances < 1 || batch_size < 1) throw ConfigError("warmup sizes must be >= 1");
  if (!(lr >= 0.0)) throw ConfigError("warmup lr must be >= 0");
  if (!(target_accuracy >= 0.0) || target_accuracy > 1.0) {
    throw ConfigError("warmup target accuracy must be in [0, 1]");
  }
  if (max_steps < 0 || eval_every < 1 || eval_size < 1) {
    throw ConfigError("warmup step/eval counts invalid");
  }
}

void TrainConfig::validate() const {
  task.validate();
  policy.validate();
  objective.validate();
  warmup.validate();
  if (steps < 1) throw ConfigError("steps must be >= 1");
  if (batch_prompts < 1) throw ConfigError("batch_prompts must be >= 1");
  if (group_size < 2) throw ConfigError("group_size must be >= 2");
  if (inner_epochs < 1) throw ConfigError("inner_epochs must be >= 1");
  if (!(lr >= 0.0)) throw ConfigError("lr must be >= 0");
  if (!(temperature >= 0.0)) throw ConfigError("temperature must be >= 0");
  if (max_response_len < 1) throw ConfigError("max_response_len must be >= 1");
  if (eval_size < 1 || eval_every < 1) throw ConfigError("eval settings invalid");
  if (checkpoint_every < 0) throw ConfigError("checkpoint_every must be >= 0");
}

AdamState init_adam(const PolicyParams& params) {
  AdamState st;
  st.m.reserve(params.tensors.size());
  st.v.reserve(params.tensors.size());
  for (const Tensor& t : params.tensors) {
    st.m.push_back(Tensor::zeros(t.shape));
    st.v.push_back(Tensor::zeros(t.shape));
  }
  return st;
}

void adam_step(PolicyParams& params, AdamState& state, const std::vector<Tensor>& grads,
               double lr, double beta1, double beta2, double eps) {
  if (grads.size() != params.tensors.size()) {
    throw ConfigError("adam_step: gradient/parameter count mismatch");
  }
  state.t += 1;
  const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(state.t));
  const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(state.t));
  for (size_t e = 0; e < params.tensors.size(); ++e) {
    Tensor& p = params.tensors[e];
    Tensor& m = state.m[e];
    Tensor& v = state.v[e];
    const Tensor& g = grads[e];
    if (!g.same_shape(p)) throw ConfigError("adam_step: gradient shape mismatch");
    for (size_t i = 0; i < p.data.size(); ++i) {
      m.data[i] = beta1 * m.data[i] + (1.0 - beta1) * g.data[i];
      v.data[i] = beta2 * v.data[i] + (1.0 - beta2) * g.data[i] * g.data[i];
      const double mhat = m.data[i] / bc1;
      const double vhat = v.data[i] / bc2;
      p.data[i] -= lr * mhat / (std::sqrt(vhat) + eps);
    }
  }
}

double evaluate(const PolicyParams& params, const TaskSpec& task, int64_t n_instances,
                uint64_t seed) {
  if (n_instances < 1) throw ConfigError("evaluate: n_instances must be >= 1");
  int64_t correct = 0;
  for (int64_t i = 0; i < n_instances; ++i) {
    const TaskInstance inst =
        gen_instance(task, derive_seed({seed, static_cast<uint64_t>(i)}));
    // greedy decoding; give the policy the oracle length plus a little slack
    const int64_t max_len = static_cast<int64_t>(inst.oracle_response.size()) + 2;
    const Trajectory traj =
        sample_response(params, inst.prompt_tokens, 0.0, max_len,
                        derive_seed({seed, static_cast<uint64_t>(i), 0x9E}));
    if (verify(task, inst.prompt_tokens, traj.response_tokens) == 1.0) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(n_instances);
}

LossResult warmup_ce_loss(const PolicyParams& theta,
                          const std::vector<TaskInstance>& batch, bool with_grads) {
  if (batch.empty()) throw ConfigError("warmup_ce_loss: empty batch");
  const int64_t exit_depth = theta.config.deepest_exit();
  Tape tape;
  const BoundPolicy bp = bind_policy(tape, theta);
  ValueId lp_acc = -1;
  int64_t total_tokens = 0;
  for (const TaskInstance& inst : batch) {
    const int64_t p = static_cast<int64_t>(inst.prompt_tokens.size());
    const int64_t len = static_cast<int64_t>(inst.oracle_response.size());
    if (len < 1) throw ConfigError("warmup_ce_loss: empty oracle response");
    std::vector<int> seq = inst.prompt_tokens;
    seq.insert(seq.end(), inst.oracle_response.begin(), inst.oracle_response.end() - 1);
    const ValueId logits = tape_forward_logits(bp, seq, exit_depth);
    const ValueId lsm = tape.log_softmax(tape.slice_rows(logits, p - 1, p + len - 1));
    std::vector<std::pair<int64_t, int64_t>> coords;
    coords.reserve(static_cast<size_t>(len));
    for (int64_t t = 0; t < len; ++t) {
      coords.emplace_back(t, inst.oracle_response[static_cast<size_t>(t)]);
    }
    const ValueId lp_sum = tape.sum(tape.gather(lsm, coords));
    lp_acc = lp_acc < 0 ? lp_sum : tape.add(lp_acc, lp_sum);
    total_tokens += len;
  }
  const ValueId loss = tape.scale(lp_acc, -1.0 / static_cast<double>(total_tokens));
  LossResult result;
  result.loss = tape.value(loss).data[0];
  result.stats.loss = result.loss;
  result.stats.grad_token_count = total_tokens;
  if (with_grads) {
    result.grads = tape.backward(loss, static_cast<int64_t>(bp.values.size()));
  }
  return result;
}

WarmupResult supervised_warmup(const TrainConfig& cfg, const PolicyParams& start) {
  cfg.validate();
  const WarmupConfig& w = cfg.warmup;
  std::vector<TaskInstance> data;
  data.reserve(static_cast<size_t>(w.n_instances));
  for (int64_t i = 0; i < w.n_instances; ++i) {
    data.push_back(
        gen_instance(cfg.task, derive_seed({cfg.seed, kTagWarmupData,
                                            static_cast<uint64_t>(i)})));
  }
  const uint64_t eval_seed = derive_seed({cfg.seed, kTagEval});
  Rng batch_rng(derive_seed({cfg.seed, kTagWarmupBatch}));

  WarmupResult result;
  result.params = start;
  AdamState adam = init_adam(result.params);

  double acc = evaluate(result.params, cfg.task, w.eval_size, eval_seed);
  result.best_accuracy = acc;
  result.final_accuracy = acc;
  if (acc >= w.target_accuracy) {
    result.reached_target = true;
    return result;
  }
  for (int64_t step = 1; step <= w.max_steps; ++step) {
    std::vector<TaskInstance> batch;
    batch.reserve(static_cast<size_t>(w.batch_size));
    for (int64_t b = 0; b < w.batch_size; ++b) {
      batch.push_back(data[batch_rng.below(static_cast<uint64_t>(data.size()))]);
    }
    const LossResult res = warmup_ce_loss(result.params, batch, /*with_grads=*/true);
    adam_step(result.params, adam, res.grads, w.lr, cfg.adam_beta1, cfg.adam_beta2,
              cfg.adam_eps);
    WarmupRecord rec;
    rec.step = step;
    rec.ce_loss = res.loss;
    result.steps_run = step;
    if (step % w.eval_every == 0 || step == w.max_steps) {
      acc = evaluate(result.params, cfg.task, w.eval_size, eval_seed);
      rec.has_eval = true;
      rec.eval_accuracy = acc;
      result.best_accuracy = std::max(result.best_accuracy, acc);
      result.final_accuracy = acc;
      result.history.push_back(rec);
      if (acc >= w.target_accuracy) {
        result.reached_target = true;
        return result;
      }
    } else {
      result.history.push_back(rec);
    }
  }
  return result;  // reached_target stays false; best/final carry the evidence
}

namespace {

nlohmann::json metrics_to_json(const MetricsRecord& r) {
  nlohmann::json j = {
      {"step", r.step},
      {"algo", algo_to_string(r.algo)},
      {"mean_reward", r.mean_reward},
      {"frac_groups_skipped", r.frac_groups_skipped},
      {"loss", r.loss},
      {"kl", r.kl},
      {"clip_fraction", r.clip_fraction},
      {"rho_mean", r.rho_mean},
      {"grad_token_count", r.grad_token_count},
      {"ratio_clamped", r.ratio_clamped},
      {"seed", r.seed},
  };
  if (r.has_eval) j["eval_accuracy"] = r.eval_accuracy;
  return j;
}

void dump_group_diagnostics(const std::filesystem::path& run_dir, int64_t step,
                            int64_t group_index, const Group& group,
                            const std::string& what) {
  if (run_dir.empty()) return;
  nlohmann::json j;
  j["step"] = step;
  j["group_index"] = group_index;
  j["error"] = what;
  j["prompt_tokens"] = group.prompt_tokens;
  j["rewards"] = group.rewards;
  j["advantages"] = group.advantages;
  nlohmann::json trajs = nlohmann::json::array();
  for (const Trajectory& t : group.trajectories) {
    trajs.push_back({{"response_tokens", t.response_tokens},
                     {"behavior_logprobs", t.behavior_logprobs},
                     {"reward", t.reward}});
  }
  j["trajectories"] = trajs;
  std::ofstream os(run_dir / ("diagnostics_step_" + std::to_string(step) + ".json"));
  os << j.dump(2) << "\n";
}

}  // namespace

std::vector<MetricsRecord> train(const TrainConfig& cfg, const PolicyParams& warm_start,
                                 const std::filesystem::path& run_dir) {
  cfg.validate();
  if (!(warm_start.config.vocab_size == cfg.policy.vocab_size &&
        warm_start.config.d_model == cfg.policy.d_model &&
        warm_start.config.n_layers == cfg.policy.n_layers &&
        warm_start.config.n_heads == cfg.policy.n_heads &&
        warm_start.config.context_len == cfg.policy.context_len &&
        warm_start.config.exit_depths == cfg.policy.exit_depths)) {
    throw ConfigError("train: warm start params do not match configured policy");
  }

  PolicyParams theta = warm_start;
  const PolicyParams ref = warm_start;  // frozen for the whole run
  AdamState adam = init_adam(theta);

  std::ofstream metrics_os, timings_os;
  if (!run_dir.empty()) {
    std::filesystem::create_directories(run_dir);
    std::ofstream cfg_os(run_dir / "config.json");
    cfg_os << train_config_to_json(cfg).dump(2) << "\n";
    metrics_os.open(run_dir / "metrics.jsonl", std::ios::trunc);
    timings_os.open(run_dir / "timings.jsonl", std::ios::trunc);
    if (!metrics_os || !timings_os) {
      throw IoError("cannot open run logs in " + run_dir.string());
    }
  }

  const uint64_t eval_seed = derive_seed({cfg.seed, kTagEval});
  const int64_t b_count = cfg.batch_prompts;
  std::vector<MetricsRecord> history;
  history.reserve(static_cast<size_t>(cfg.steps));

  for (int64_t step = 1; step <= cfg.steps; ++step) {
    MetricsRecord rec;
    rec.step = step;
    rec.algo = cfg.algo;
    rec.seed = cfg.seed;

    // ---- rollout under the frozen step snapshot
    const auto t_sample = std::chrono::steady_clock::now();
    const PolicyParams theta_old = theta;
    std::vector<Group> groups(static_cast<size_t>(b_count));
    parallel_for(b_count, cfg.workers, [&](int64_t b) {
      const TaskInstance inst = gen_instance(
          cfg.task, derive_seed({cfg.seed, kTagInstance, static_cast<uint64_t>(step),
                                 static_cast<uint64_t>(b)}));
      groups[static_cast<size_t>(b)] =
          collect_group(theta_old, cfg.task, inst, cfg.group_size, cfg.temperature,
                        cfg.max_response_len, cfg.seed, step * b_count + b);
    });
    rec.sample_ms = ms_since(t_sample);

    double reward_sum = 0.0;
    for (const Group& g : groups) {
      for (double r : g.rewards) reward_sum += r;
    }
    rec.mean_reward =
        reward_sum / static_cast<double>(b_count * cfg.group_size);

    // ---- representative selection (pairs are fixed across inner epochs)
    const auto t_update = std::chrono::steady_clock::now();
    std::vector<std::optional<BinaryPair>> pairs(groups.size());
    int64_t skipped = 0;
    if (cfg.algo == Algo::Bppo) {
      for (int64_t b = 0; b < b_count; ++b) {
        pairs[static_cast<size_t>(b)] = select_binary(
            groups[static_cast<size_t>(b)], cfg.objective,
            derive_seed({cfg.seed, kTagSelect, static_cast<uint64_t>(step),
                         static_cast<uint64_t>(b)}));
        if (!pairs[static_cast<size_t>(b)]) ++skipped;
      }
    }
    rec.frac_groups_skipped = static_cast<double>(skipped) / static_cast<double>(b_count);

    std::vector<int64_t> active;
    for (int64_t b = 0; b < b_count; ++b) {
      if (cfg.algo == Algo::Grpo || pairs[static_cast<size_t>(b)]) active.push_back(b);
    }

    // ---- inner epochs
    double loss_sum = 0.0, kl_sum = 0.0, clip_tok_sum = 0.0, rho_tok_sum = 0.0;
    int64_t token_sum = 0;
    for (int64_t epoch = 0; epoch < cfg.inner_epochs && !active.empty(); ++epoch) {
      std::vector<LossResult> results(active.size());
      std::vector<std::string> failures(active.size());
      parallel_for(static_cast<int64_t>(active.size()), cfg.workers, [&](int64_t a) {
        const int64_t b = active[static_cast<size_t>(a)];
        const Group& g = groups[static_cast<size_t>(b)];
        try {
          results[static_cast<size_t>(a)] =
              cfg.algo == Algo::Grpo
                  ? grpo_loss(theta, g, ref, cfg.objective, /*with_grads=*/true)
                  : bppo_loss(theta, g, *pairs[static_cast<size_t>(b)], ref,
                              cfg.objective, /*with_grads=*/true);
        } catch (const NumericError& e) {
          failures[static_cast<size_t>(a)] = e.what();
        }
      });
      for (size_t a = 0; a < active.size(); ++a) {
        if (!failures[a].empty()) {
          dump_group_diagnostics(run_dir, step, active[a],
                                 groups[static_cast<size_t>(active[a])], failures[a]);
          throw NumericError("non-finite loss at step " + std::to_string(step) +
                             ", group " + std::to_string(active[a]) + ": " +
                             failures[a]);
        }
      }
      // fixed-order reduction, independent of how the work was scheduled
      const double inv_c = 1.0 / static_cast<double>(active.size());
      std::vector<Tensor> batch_grads;
      for (size_t a = 0; a < active.size(); ++a) {
        const LossResult& r = results[a];
        loss_sum += r.loss * inv_c;
        kl_sum += r.stats.kl * inv_c;
        clip_tok_sum += r.stats.clip_fraction *
                        static_cast<double>(r.stats.grad_token_count);
        rho_tok_sum += r.stats.rho_mean * static_cast<double>(r.stats.grad_token_count);
        token_sum += r.stats.grad_token_count;
        rec.ratio_clamped = rec.ratio_clamped || r.stats.ratio_clamped;
        if (a == 0) {
          batch_grads = r.grads;
          for (Tensor& g : batch_grads) {
            for (double& x : g.data) x *= inv_c;
          }
        } else {
          for (size_t e = 0; e < batch_grads.size(); ++e) {
            for (size_t i = 0; i < batch_grads[e].data.size(); ++i) {
              batch_grads[e].data[i] += inv_c * r.grads[e].data[i];
            }
          }
        }
      }
      adam_step(theta, adam, batch_grads, cfg.lr, cfg.adam_beta1, cfg.adam_beta2,
                cfg.adam_eps);
    }
    if (!active.empty()) {
      const double epochs = static_cast<double>(cfg.inner_epochs);
      rec.loss = loss_sum / epochs;
      rec.kl = kl_sum / epochs;
      rec.clip_fraction = token_sum > 0 ? clip_tok_sum / static_cast<double>(token_sum) : 0.0;
      rec.rho_mean = token_sum > 0 ? rho_tok_sum / static_cast<double>(token_sum) : 0.0;
      rec.grad_token_count = token_sum;
    }
    rec.update_ms = ms_since(t_update);

    if (step % cfg.eval_every == 0 || step == cfg.steps) {
      rec.has_eval = true;
      rec.eval_accuracy = evaluate(theta, cfg.task, cfg.eval_size, eval_seed);
    }

    if (!run_dir.empty()) {
      metrics_os << metrics_to_json(rec).dump() << "\n";
      timings_os << nlohmann::json({{"step", rec.step},
                                    {"sample_ms", rec.sample_ms},
                                    {"update_ms", rec.update_ms}})
                        .dump()
                 << "\n";
      if (cfg.checkpoint_every > 0 && step % cfg.checkpoint_every == 0) {
        save_checkpoint(theta,
                        run_dir / ("checkpoint_step_" + std::to_string(step) + ".ckpt"));
      }
    }
    history.push_back(rec);
  }

  if (!run_dir.empty()) {
    save_checkpoint(theta, run_dir / "checkpoint_final.ckpt");
    metrics_os.flush();
    timings_os.flush();
  }
  return history;
}

}  // namespace bppo
