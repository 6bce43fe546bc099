#include "bppo/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include <json.hpp>

#include "bppo/error.hpp"
#include "bppo/rng.hpp"
#include "bppo/tape.hpp"

namespace bppo {

LossKind loss_kind_from_string(const std::string& s) {
  if (s == "warmup") return LossKind::Warmup;
  if (s == "grpo") return LossKind::Grpo;
  if (s == "bppo") return LossKind::Bppo;
  throw ConfigError("unknown loss kind '" + s + "' (expected warmup|grpo|bppo)");
}

namespace {

PolicyParams perturb(const PolicyParams& base, uint64_t seed, double scale) {
  PolicyParams out = base;
  Rng rng(seed);
  for (Tensor& t : out.tensors) {
    for (double& v : t.data) v += scale * rng.next_gaussian();
  }
  return out;
}

}  // namespace

FdScenario make_fd_scenario(LossKind kind, uint64_t seed, const PolicyConfig& policy_cfg) {
  FdScenario sc;
  sc.kind = kind;
  const uint64_t s0 = derive_seed({0xFDC0u, seed});
  TaskSpec task;  // ModAdd(10): short prompts keep the check fast
  const PolicyParams base = init_params(policy_cfg, s0);

  if (kind == LossKind::Warmup) {
    sc.theta = base;
    sc.ref = base;
    for (uint64_t i = 0; i < 4; ++i) {
      sc.warmup_batch.push_back(gen_instance(task, derive_seed({s0, 0x10u, i})));
    }
    return sc;
  }

  const TaskInstance inst = gen_instance(task, derive_seed({s0, 0x11u}));
  sc.group = collect_group(base, task, inst, /*group_size=*/4, /*temperature=*/1.0,
                           /*max_len=*/4, s0, /*prompt_index=*/0);
  // force mixed rewards so both strata are populated regardless of the
  // untrained policy's actual success rate
  for (int64_t i = 0; i < sc.group.size(); ++i) {
    const double r = i % 2 == 0 ? 1.0 : 0.0;
    sc.group.rewards[static_cast<size_t>(i)] = r;
    sc.group.trajectories[static_cast<size_t>(i)].reward = r;
  }
  sc.group.advantages = compute_advantages(sc.group.rewards);

  // off-policy theta (rho != 1, clipping can bind) and an independent ref
  sc.theta = perturb(base, derive_seed({s0, 0x22u}), 0.05);
  sc.ref = perturb(base, derive_seed({s0, 0x33u}), 0.05);

  sc.objective.epsilon = 0.2;
  sc.objective.beta = 0.01;
  sc.objective.kl_mode = KlMode::Exact;
  sc.objective.selection = SelectionStrategy::Random;
  sc.objective.prefix = kind == LossKind::Bppo ? PrefixSpec::of_fraction(0.5)
                                               : PrefixSpec::of_fraction(1.0);
  if (kind == LossKind::Bppo) {
    const auto pair = select_binary(sc.group, sc.objective, derive_seed({s0, 0x44u}));
    sc.pair = *pair;  // mixed rewards guarantee a pair
  }
  return sc;
}

double scenario_loss(const FdScenario& sc, const PolicyParams& theta) {
  switch (sc.kind) {
    case LossKind::Warmup:
      return warmup_ce_loss(theta, sc.warmup_batch, /*with_grads=*/false).loss;
    case LossKind::Grpo:
      return grpo_loss(theta, sc.group, sc.ref, sc.objective, /*with_grads=*/false).loss;
    case LossKind::Bppo:
      return bppo_loss(theta, sc.group, sc.pair, sc.ref, sc.objective,
                       /*with_grads=*/false)
          .loss;
  }
  throw ConfigError("bad loss kind");
}

std::vector<Tensor> scenario_grads(const FdScenario& sc) {
  switch (sc.kind) {
    case LossKind::Warmup:
      return warmup_ce_loss(sc.theta, sc.warmup_batch).grads;
    case LossKind::Grpo:
      return grpo_loss(sc.theta, sc.group, sc.ref, sc.objective).grads;
    case LossKind::Bppo:
      return bppo_loss(sc.theta, sc.group, sc.pair, sc.ref, sc.objective).grads;
  }
  throw ConfigError("bad loss kind");
}

double default_fd_step(LossKind kind) {
  return kind == LossKind::Warmup ? 1e-2 : 1e-3;
}

double ridders_derivative(const std::function<double(const PolicyParams&)>& f,
                          const PolicyParams& at, size_t entry, int64_t idx,
                          double step) {
  if (!(step > 0.0)) throw ConfigError("ridders_derivative: step must be positive");
  // Ridders' method: central differences at geometrically shrinking steps,
  // Neville-extrapolated to h->0, keeping the tableau entry with the best
  // internal agreement. Handles both roundoff-dominated (tiny-gradient) and
  // truncation-dominated coordinates without a hand-tuned step.
  PolicyParams probe = at;
  double& x = probe.tensors[entry].data[static_cast<size_t>(idx)];
  const double x0 = x;
  const auto central = [&](double h) {
    x = x0 + h;
    const double lp = f(probe);
    x = x0 - h;
    const double lm = f(probe);
    return (lp - lm) / (2.0 * h);
  };
  constexpr int kTab = 8;
  constexpr double kCon = 1.4, kCon2 = kCon * kCon;
  double tab[kTab][kTab];
  double h = step;
  tab[0][0] = central(h);
  double fd = tab[0][0];
  double best_err = std::numeric_limits<double>::infinity();
  for (int i = 1; i < kTab; ++i) {
    h /= kCon;
    tab[0][i] = central(h);
    double fac = kCon2;
    for (int j = 1; j <= i; ++j) {
      tab[j][i] = (tab[j - 1][i] * fac - tab[j - 1][i - 1]) / (fac - 1.0);
      fac *= kCon2;
      const double err = std::max(std::abs(tab[j][i] - tab[j - 1][i]),
                                  std::abs(tab[j][i] - tab[j - 1][i - 1]));
      if (err < best_err) {
        best_err = err;
        fd = tab[j][i];
      }
    }
    if (std::abs(tab[i][i] - tab[i - 1][i - 1]) >= 2.0 * best_err) break;
  }
  return fd;
}

FdCheckResult finite_diff_check(const FdScenario& sc, int64_t n_coords, double step,
                                uint64_t coord_seed) {
  if (n_coords < 1) throw ConfigError("finite_diff_check: n_coords must be >= 1");
  if (!(step > 0.0)) throw ConfigError("finite_diff_check: step must be positive");
  const std::vector<Tensor> analytic = scenario_grads(sc);
  const int64_t total = sc.theta.scalar_count();
  Rng rng(derive_seed({0xFDC1u, coord_seed}));
  FdCheckResult res;
  res.n_coords = n_coords;
  double err_sum = 0.0;
  for (int64_t c = 0; c < n_coords; ++c) {
    int64_t flat = static_cast<int64_t>(rng.below(static_cast<uint64_t>(total)));
    size_t e = 0;
    while (flat >= sc.theta.tensors[e].numel()) {
      flat -= sc.theta.tensors[e].numel();
      ++e;
    }
    const double fd = ridders_derivative(
        [&sc](const PolicyParams& p) { return scenario_loss(sc, p); }, sc.theta, e,
        flat, step);
    const double a = analytic[e].data[static_cast<size_t>(flat)];
    const double rel = std::abs(a - fd) / std::max({std::abs(a), std::abs(fd), 1e-8});
    res.max_rel_error = std::max(res.max_rel_error, rel);
    err_sum += rel;
  }
  res.mean_rel_error = err_sum / static_cast<double>(n_coords);
  return res;
}

// --------------------------------------------------------- gradient cosines

namespace {

// gradient of the response's on-policy unclipped surrogate
// (1/|o|) * sum_t rho_t * adv, full mask, no KL
std::vector<Tensor> response_surrogate_grads(const PolicyParams& params,
                                             const Group& group, int64_t i) {
  const Trajectory& traj = group.trajectories[static_cast<size_t>(i)];
  const int64_t len = static_cast<int64_t>(traj.response_tokens.size());
  const int64_t p = static_cast<int64_t>(group.prompt_tokens.size());
  Tape tape;
  const BoundPolicy bp = bind_policy(tape, params);
  std::vector<int> seq = group.prompt_tokens;
  seq.insert(seq.end(), traj.response_tokens.begin(), traj.response_tokens.end() - 1);
  const ValueId logits = tape_forward_logits(bp, seq, params.config.deepest_exit());
  const ValueId lsm = tape.log_softmax(tape.slice_rows(logits, p - 1, p + len - 1));
  std::vector<std::pair<int64_t, int64_t>> coords;
  for (int64_t t = 0; t < len; ++t) {
    coords.emplace_back(t, traj.response_tokens[static_cast<size_t>(t)]);
  }
  const ValueId lp_theta = tape.gather(lsm, coords);
  const ValueId lp_old = tape.constant(Tensor::vector(traj.behavior_logprobs));
  const ValueId rho = tape.vexp(tape.sub(lp_theta, lp_old));
  const double adv = group.advantages[static_cast<size_t>(i)];
  const ValueId surr =
      tape.scale(tape.sum(tape.mul(rho, tape.constant(Tensor::full({len}, adv)))),
                 1.0 / static_cast<double>(len));
  return tape.backward(surr, static_cast<int64_t>(bp.values.size()));
}

std::vector<double> flatten(const std::vector<Tensor>& ts) {
  std::vector<double> out;
  int64_t total = 0;
  for (const Tensor& t : ts) total += t.numel();
  out.reserve(static_cast<size_t>(total));
  for (const Tensor& t : ts) out.insert(out.end(), t.data.begin(), t.data.end());
  return out;
}

}  // namespace

CosineMatrix gradient_cosine_matrix(const Group& group, const PolicyParams& params) {
  if (group.size() < 2) throw ConfigError("gradient_cosine_matrix: group too small");
  if (group_is_degenerate(group)) {
    throw ConfigError("gradient_cosine_matrix: needs a mixed-reward group");
  }
  const int64_t n = group.size();
  CosineMatrix cm;
  cm.n = n;
  cm.sim.assign(static_cast<size_t>(n * n), 0.0);
  cm.stratum.resize(static_cast<size_t>(n));
  cm.defined.resize(static_cast<size_t>(n));

  std::vector<std::vector<double>> grads(static_cast<size_t>(n));
  std::vector<double> norms(static_cast<size_t>(n), 0.0);
  for (int64_t i = 0; i < n; ++i) {
    cm.stratum[static_cast<size_t>(i)] =
        group.rewards[static_cast<size_t>(i)] > 0.5 ? 1 : 0;
    grads[static_cast<size_t>(i)] = flatten(response_surrogate_grads(params, group, i));
    double ss = 0.0;
    for (double v : grads[static_cast<size_t>(i)]) ss += v * v;
    norms[static_cast<size_t>(i)] = std::sqrt(ss);
    cm.defined[static_cast<size_t>(i)] = norms[static_cast<size_t>(i)] > 1e-12;
  }
  double sum_pp = 0.0, sum_nn = 0.0, sum_x = 0.0;
  for (int64_t i = 0; i < n; ++i) {
    if (!cm.defined[static_cast<size_t>(i)]) continue;
    cm.sim[static_cast<size_t>(i * n + i)] = 1.0;
    for (int64_t j = i + 1; j < n; ++j) {
      if (!cm.defined[static_cast<size_t>(j)]) continue;
      double dot = 0.0;
      const auto& gi = grads[static_cast<size_t>(i)];
      const auto& gj = grads[static_cast<size_t>(j)];
      for (size_t t = 0; t < gi.size(); ++t) dot += gi[t] * gj[t];
      const double c =
          dot / (norms[static_cast<size_t>(i)] * norms[static_cast<size_t>(j)]);
      cm.sim[static_cast<size_t>(i * n + j)] = c;
      cm.sim[static_cast<size_t>(j * n + i)] = c;
      const int si = cm.stratum[static_cast<size_t>(i)];
      const int sj = cm.stratum[static_cast<size_t>(j)];
      if (si == 1 && sj == 1) {
        sum_pp += c;
        ++cm.pairs_intra_positive;
      } else if (si == 0 && sj == 0) {
        sum_nn += c;
        ++cm.pairs_intra_negative;
      } else {
        sum_x += c;
        ++cm.pairs_cross;
      }
    }
  }
  if (cm.pairs_intra_positive > 0) {
    cm.mean_intra_positive = sum_pp / static_cast<double>(cm.pairs_intra_positive);
  }
  if (cm.pairs_intra_negative > 0) {
    cm.mean_intra_negative = sum_nn / static_cast<double>(cm.pairs_intra_negative);
  }
  if (cm.pairs_cross > 0) {
    cm.mean_cross = sum_x / static_cast<double>(cm.pairs_cross);
  }
  return cm;
}

// ------------------------------------------------------- prefix commitment

double prefix_commitment(const PolicyParams& params, const TaskSpec& task,
                         const TaskInstance& instance, int64_t prefix_len, int64_t k,
                         uint64_t seed, int64_t max_len) {
  if (k < 2) throw ConfigError("prefix_commitment: K must be >= 2");
  if (prefix_len < 0) throw ConfigError("prefix_commitment: prefix_len must be >= 0");
  const Trajectory base = sample_response(params, instance.prompt_tokens, 1.0, max_len,
                                          derive_seed({seed, 0xB0u}));
  const int64_t base_len = static_cast<int64_t>(base.response_tokens.size());
  if (prefix_len >= base_len) return 1.0;  // nothing left to resample

  std::vector<int> ctx = instance.prompt_tokens;
  ctx.insert(ctx.end(), base.response_tokens.begin(),
             base.response_tokens.begin() + prefix_len);
  int64_t wins = 0;
  for (int64_t j = 0; j < k; ++j) {
    const Trajectory cont = sample_response(
        params, ctx, 1.0, max_len - prefix_len,
        derive_seed({seed, 0xB1u, static_cast<uint64_t>(j)}));
    std::vector<int> full(base.response_tokens.begin(),
                          base.response_tokens.begin() + prefix_len);
    full.insert(full.end(), cont.response_tokens.begin(), cont.response_tokens.end());
    if (verify(task, instance.prompt_tokens, full) == 1.0) ++wins;
  }
  const int64_t majority = std::max(wins, k - wins);
  return static_cast<double>(majority) / static_cast<double>(k);
}

// ------------------------------------------------------------ run comparison

RunLog load_run_log(const std::filesystem::path& path) {
  namespace fs = std::filesystem;
  fs::path metrics = path, timings;
  if (fs::is_directory(path)) {
    metrics = path / "metrics.jsonl";
    timings = path / "timings.jsonl";
  } else {
    timings = path.parent_path() / "timings.jsonl";
  }
  std::ifstream is(metrics);
  if (!is) throw IoError("cannot read metrics log: " + metrics.string());

  RunLog log;
  std::string line;
  int64_t lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty()) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
      MetricsRecord r;
      r.step = j.at("step").get<int64_t>();
      const std::string algo = j.at("algo").get<std::string>();
      r.algo = algo_from_string(algo);
      r.mean_reward = j.at("mean_reward").get<double>();
      r.frac_groups_skipped = j.at("frac_groups_skipped").get<double>();
      r.loss = j.at("loss").get<double>();
      r.kl = j.at("kl").get<double>();
      r.clip_fraction = j.at("clip_fraction").get<double>();
      r.grad_token_count = j.at("grad_token_count").get<int64_t>();
      r.seed = j.at("seed").get<uint64_t>();
      if (j.contains("rho_mean")) r.rho_mean = j.at("rho_mean").get<double>();
      if (j.contains("eval_accuracy")) {
        r.has_eval = true;
        r.eval_accuracy = j.at("eval_accuracy").get<double>();
      }
      if (log.records.empty()) {
        log.algo = algo;
      } else if (log.algo != algo) {
        throw IoError("metrics log mixes algos: " + metrics.string());
      }
      log.records.push_back(r);
    } catch (const nlohmann::json::exception& e) {
      throw IoError("bad metrics record at " + metrics.string() + ":" +
                    std::to_string(lineno) + ": " + e.what());
    }
  }
  if (log.records.empty()) throw IoError("empty metrics log: " + metrics.string());

  std::ifstream ts(timings);
  if (ts) {
    std::vector<std::pair<int64_t, std::pair<double, double>>> entries;
    while (std::getline(ts, line)) {
      if (line.empty()) continue;
      try {
        const nlohmann::json j = nlohmann::json::parse(line);
        entries.emplace_back(j.at("step").get<int64_t>(),
                             std::make_pair(j.at("sample_ms").get<double>(),
                                            j.at("update_ms").get<double>()));
      } catch (const nlohmann::json::exception& e) {
        throw IoError("bad timings record in " + timings.string() + ": " + e.what());
      }
    }
    int64_t matched = 0;
    for (MetricsRecord& r : log.records) {
      for (const auto& [step, sm] : entries) {
        if (step == r.step) {
          r.sample_ms = sm.first;
          r.update_ms = sm.second;
          ++matched;
          break;
        }
      }
    }
    log.has_timings = matched == static_cast<int64_t>(log.records.size());
  }
  return log;
}

CostReport compare_runs(const std::filesystem::path& run_a,
                        const std::filesystem::path& run_b) {
  const RunLog a = load_run_log(run_a);
  const RunLog b = load_run_log(run_b);
  CostReport rep;
  rep.algo_a = a.algo;
  rep.algo_b = b.algo;
  const int64_t n = std::min(static_cast<int64_t>(a.records.size()),
                             static_cast<int64_t>(b.records.size()));
  rep.truncated = a.records.size() != b.records.size();
  rep.steps_compared = n;

  double upd_a = 0.0, upd_b = 0.0, tot_a = 0.0, tot_b = 0.0;
  struct EvalPt {
    int64_t step;
    double acc;
  };
  std::vector<EvalPt> evals_a, evals_b;
  for (int64_t i = 0; i < n; ++i) {
    const MetricsRecord& ra = a.records[static_cast<size_t>(i)];
    const MetricsRecord& rb = b.records[static_cast<size_t>(i)];
    rep.tokens_a += ra.grad_token_count;
    rep.tokens_b += rb.grad_token_count;
    rep.step_tokens_a.push_back(ra.grad_token_count);
    rep.step_tokens_b.push_back(rb.grad_token_count);
    upd_a += ra.update_ms;
    upd_b += rb.update_ms;
    tot_a += ra.sample_ms + ra.update_ms;
    tot_b += rb.sample_ms + rb.update_ms;
    rep.steps.push_back(ra.step);
    if (ra.has_eval) evals_a.push_back({ra.step, ra.eval_accuracy});
    if (rb.has_eval) evals_b.push_back({rb.step, rb.eval_accuracy});
  }
  if (rep.tokens_b == 0) throw IoError("compare_runs: run b logged zero gradient tokens");
  rep.analytic_reduction =
      static_cast<double>(rep.tokens_a) / static_cast<double>(rep.tokens_b);
  rep.has_time_ratios = a.has_timings && b.has_timings && upd_a > 0.0 && tot_a > 0.0;
  if (rep.has_time_ratios) {
    rep.update_time_ratio = upd_b / upd_a;
    rep.step_time_ratio = tot_b / tot_a;
  }
  const auto eval_summary = [](const std::vector<EvalPt>& pts, double& final_acc,
                               double& auc) {
    if (pts.empty()) return;
    final_acc = pts.back().acc;
    if (pts.size() == 1) {
      auc = pts[0].acc;
      return;
    }
    double area = 0.0;
    for (size_t i = 0; i + 1 < pts.size(); ++i) {
      area += 0.5 * (pts[i].acc + pts[i + 1].acc) *
              static_cast<double>(pts[i + 1].step - pts[i].step);
    }
    auc = area / static_cast<double>(pts.back().step - pts.front().step);
  };
  eval_summary(evals_a, rep.final_eval_a, rep.auc_eval_a);
  eval_summary(evals_b, rep.final_eval_b, rep.auc_eval_b);
  return rep;
}

std::string CostReport::to_table() const {
  std::ostringstream os;
  os << "run comparison (b relative to a)\n";
  os << "  algo_a=" << algo_a << " algo_b=" << algo_b
     << " steps_compared=" << steps_compared
     << (truncated ? " [warning: unequal lengths, common prefix used]" : "") << "\n";
  os << "  grad tokens: a=" << tokens_a << " b=" << tokens_b
     << " analytic_reduction(a/b)=" << analytic_reduction << "\n";
  if (has_time_ratios) {
    os << "  update_time_ratio(b/a)=" << update_time_ratio
       << " step_time_ratio(b/a)=" << step_time_ratio << "\n";
  } else {
    os << "  time ratios unavailable (missing timings)\n";
  }
  os << "  final_eval: a=" << final_eval_a << " b=" << final_eval_b << "\n";
  os << "  auc_eval:   a=" << auc_eval_a << " b=" << auc_eval_b << "\n";
  return os.str();
}

std::string CostReport::to_csv() const {
  std::ostringstream os;
  os << "step,tokens_a,tokens_b\n";
  for (size_t i = 0; i < step_tokens_a.size(); ++i) {
    os << steps[i] << "," << step_tokens_a[i] << "," << step_tokens_b[i] << "\n";
  }
  return os.str();
}

}  // namespace bppo
