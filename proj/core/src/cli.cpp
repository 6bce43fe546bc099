#include "bppo/cli.hpp"

#include <chrono>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "bppo/analysis.hpp"
#include "bppo/checkpoint.hpp"
#include "bppo/curation.hpp"
#include "bppo/error.hpp"
#include "bppo/rng.hpp"
#include "bppo/trainer.hpp"
#include "config_io.hpp"

namespace fs = std::filesystem;

namespace bppo {
namespace {

// ------------------------------------------------------------- small helpers

std::string one_line(std::string s) {
  for (char& c : s) {
    if (c == '\n' || c == '\r') c = ' ';
  }
  return s;
}

int fail(const char* kind, const std::string& msg, int code) {
  std::cerr << "error: " << kind << ": " << one_line(msg) << "\n";
  return code;
}

std::string iso_timestamp_utc() {
  const std::time_t t =
      std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

std::string run_dir_stamp() {
  const std::time_t t =
      std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y%m%d-%H%M%S", &tm);
  return buf;
}

nlohmann::json load_json_file(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot read config file: " + path);
  try {
    nlohmann::json j;
    is >> j;
    return j;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("config file " + path + ": " + e.what());
  }
}

std::vector<std::vector<int>> read_pool(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot read prompt pool: " + path);
  std::vector<std::vector<int>> out;
  std::string line;
  int64_t lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    std::istringstream ls(line);
    std::vector<int> toks;
    int t;
    while (ls >> t) toks.push_back(t);
    if (ls.fail() && !ls.eof()) {
      throw IoError("prompt pool " + path + ":" + std::to_string(lineno) +
                    ": non-integer token");
    }
    if (!toks.empty()) out.push_back(std::move(toks));
  }
  if (out.empty()) throw IoError("prompt pool " + path + " is empty");
  return out;
}

// flags shared by every subcommand that names a task
struct TaskFlags {
  std::string kind = "modadd";
  int64_t modulus = 10;
  int64_t length = 6;

  void attach(CLI::App* cmd) {
    cmd->add_option("--task", kind, "task kind: modadd|reverse|planparity");
    cmd->add_option("--modulus", modulus, "modadd: operands drawn from [0, modulus)");
    cmd->add_option("--length", length, "reverse/planparity: sequence length");
  }
  TaskSpec resolve(const CLI::App* cmd, TaskSpec base) const {
    if (cmd->count("--task")) base.kind = task_kind_from_string(kind);
    if (cmd->count("--modulus")) base.modulus = modulus;
    if (cmd->count("--length")) base.length = length;
    base.validate();
    return base;
  }
};

// train-config flags: built-in default < config file < explicit flag
struct TrainFlags {
  std::string config_file;
  std::string algo = "grpo";
  uint64_t seed = 0;
  int64_t group_size = 8, batch_prompts = 16, steps = 100, inner_epochs = 1;
  double lr = 3e-4, temperature = 1.0;
  int64_t max_response_len = 8, eval_size = 200, eval_every = 25, checkpoint_every = 0;
  int64_t workers = 1;
  double epsilon = 0.2, beta = 0.01;
  std::string prefix_mode = "fraction", selection = "random", kl_mode = "exact";
  int64_t prefix_tokens = 1;
  double prefix_fraction = 0.5;
  int64_t warm_instances = 512, warm_batch = 32, warm_max_steps = 2000;
  int64_t warm_eval_every = 10, warm_eval_size = 200;
  double warm_lr = 1e-3, warm_target = 0.30;
  TaskFlags task;

  void attach(CLI::App* cmd, bool rl_flags) {
    cmd->add_option("--config", config_file, "JSON config file (flags win over it)");
    cmd->add_option("--seed", seed, "master seed; all randomness derives from it");
    cmd->add_option("--workers", workers, "worker threads (never changes results)");
    task.attach(cmd);
    if (rl_flags) {
      cmd->add_option("--algo", algo, "objective: grpo|bppo");
      cmd->add_option("--group-size", group_size, "responses per prompt (G)");
      cmd->add_option("--batch-prompts", batch_prompts, "prompts per step (B)");
      cmd->add_option("--steps", steps, "training steps");
      cmd->add_option("--inner-epochs", inner_epochs, "optimizer epochs per batch");
      cmd->add_option("--lr", lr, "Adam learning rate");
      cmd->add_option("--temperature", temperature, "sampling temperature");
      cmd->add_option("--max-response-len", max_response_len, "response token cap");
      cmd->add_option("--eval-size", eval_size, "instances per evaluation");
      cmd->add_option("--eval-every", eval_every, "steps between evaluations");
      cmd->add_option("--checkpoint-every", checkpoint_every,
                      "steps between checkpoints (0 = final only)");
      cmd->add_option("--epsilon", epsilon, "clip coefficient");
      cmd->add_option("--beta", beta, "KL penalty weight");
      cmd->add_option("--prefix-mode", prefix_mode, "prefix mask: absolute|fraction");
      cmd->add_option("--prefix-tokens", prefix_tokens, "absolute prefix length n");
      cmd->add_option("--prefix-fraction", prefix_fraction,
                      "fractional prefix length (ceiling-rounded)");
      cmd->add_option("--selection", selection,
                      "pair choice: random|extreme_advantage|median_length");
      cmd->add_option("--kl-mode", kl_mode, "KL estimator: exact|k3");
    } else {
      cmd->add_option("--instances", warm_instances, "supervised dataset size");
      cmd->add_option("--batch", warm_batch, "supervised batch size");
      cmd->add_option("--lr", warm_lr, "warmup learning rate");
      cmd->add_option("--target", warm_target, "eval accuracy that ends warmup");
      cmd->add_option("--max-steps", warm_max_steps, "warmup step cap");
      cmd->add_option("--eval-every", warm_eval_every, "steps between evaluations");
      cmd->add_option("--eval-size", warm_eval_size, "instances per evaluation");
    }
  }

  // resolves precedence; `had_policy_section` reports whether the config file
  // pinned the policy shape explicitly
  TrainConfig resolve(const CLI::App* cmd, bool* had_policy_section) const {
    TrainConfig cfg;
    if (had_policy_section) *had_policy_section = false;
    if (cmd->count("--config")) {
      const nlohmann::json j = load_json_file(config_file);
      if (had_policy_section) *had_policy_section = j.contains("policy");
      cfg = train_config_from_json(j, cfg);
    }
    const auto n = [&](const char* f) { return cmd->count(f) > 0; };
    if (n("--seed")) cfg.seed = seed;
    if (n("--workers")) cfg.workers = workers;
    cfg.task = task.resolve(cmd, cfg.task);
    if (cmd->get_option_no_throw("--algo") != nullptr) {
      if (n("--algo")) cfg.algo = algo_from_string(algo);
      if (n("--group-size")) cfg.group_size = group_size;
      if (n("--batch-prompts")) cfg.batch_prompts = batch_prompts;
      if (n("--steps")) cfg.steps = steps;
      if (n("--inner-epochs")) cfg.inner_epochs = inner_epochs;
      if (n("--lr")) cfg.lr = lr;
      if (n("--temperature")) cfg.temperature = temperature;
      if (n("--max-response-len")) cfg.max_response_len = max_response_len;
      if (n("--eval-size")) cfg.eval_size = eval_size;
      if (n("--eval-every")) cfg.eval_every = eval_every;
      if (n("--checkpoint-every")) cfg.checkpoint_every = checkpoint_every;
      if (n("--epsilon")) cfg.objective.epsilon = epsilon;
      if (n("--beta")) cfg.objective.beta = beta;
      if (n("--prefix-mode")) {
        cfg.objective.prefix.mode = prefix_mode_from_string(prefix_mode);
      }
      if (n("--prefix-tokens")) cfg.objective.prefix.tokens = prefix_tokens;
      if (n("--prefix-fraction")) cfg.objective.prefix.fraction = prefix_fraction;
      if (n("--selection")) cfg.objective.selection = selection_from_string(selection);
      if (n("--kl-mode")) cfg.objective.kl_mode = kl_mode_from_string(kl_mode);
    } else {
      if (n("--instances")) cfg.warmup.n_instances = warm_instances;
      if (n("--batch")) cfg.warmup.batch_size = warm_batch;
      if (n("--lr")) cfg.warmup.lr = warm_lr;
      if (n("--target")) cfg.warmup.target_accuracy = warm_target;
      if (n("--max-steps")) cfg.warmup.max_steps = warm_max_steps;
      if (n("--eval-every")) cfg.warmup.eval_every = warm_eval_every;
      if (n("--eval-size")) cfg.warmup.eval_size = warm_eval_size;
    }
    return cfg;
  }
};

void write_manifest(const fs::path& run_dir, const std::string& subcommand,
                    const TrainConfig& cfg) {
  const fs::path p = run_dir / "manifest.json";
  if (fs::exists(p)) {
    throw IoError("run directory already holds a manifest: " + p.string());
  }
  const nlohmann::json j{{"format_version", 1},
                         {"subcommand", subcommand},
                         {"seed", cfg.seed},
                         {"started_at", iso_timestamp_utc()},
                         {"config", train_config_to_json(cfg)}};
  std::ofstream os(p);
  if (!os) throw IoError("cannot write " + p.string());
  os << j.dump(2) << "\n";
}

// ------------------------------------------------------------- subcommands

int cmd_warmup(const CLI::App* cmd, const TrainFlags& tf, const std::string& out_path) {
  const TrainConfig cfg = tf.resolve(cmd, nullptr);
  cfg.validate();
  const PolicyParams start = init_params(cfg.policy, cfg.seed);
  const WarmupResult res = supervised_warmup(cfg, start);
  save_checkpoint(res.params, out_path);
  std::cout << "warmup steps=" << res.steps_run << " final_accuracy=" << res.final_accuracy
            << " best_accuracy=" << res.best_accuracy
            << " target=" << cfg.warmup.target_accuracy
            << " reached=" << (res.reached_target ? "yes" : "no")
            << " checkpoint=" << out_path << "\n";
  return res.reached_target ? kExitOk : kExitWarmup;
}

int cmd_train(const CLI::App* cmd, const TrainFlags& tf, const std::string& warm_path,
              const std::string& run_dir_flag) {
  bool had_policy = false;
  TrainConfig cfg = tf.resolve(cmd, &had_policy);
  const PolicyParams warm = load_checkpoint(warm_path);
  // without an explicit policy section the checkpoint defines the shape
  if (!had_policy) cfg.policy = warm.config;
  cfg.validate();

  fs::path run_dir = run_dir_flag.empty()
                         ? fs::path("runs") / (run_dir_stamp() + "-seed" +
                                               std::to_string(cfg.seed) + "-" +
                                               algo_to_string(cfg.algo))
                         : fs::path(run_dir_flag);
  fs::create_directories(run_dir);
  write_manifest(run_dir, "train", cfg);
  const std::vector<MetricsRecord> records = train(cfg, warm, run_dir);

  double final_eval = -1.0;
  for (const MetricsRecord& r : records) {
    if (r.has_eval) final_eval = r.eval_accuracy;
  }
  std::cout << "train algo=" << algo_to_string(cfg.algo) << " steps=" << records.size()
            << " final_eval=" << final_eval << " run_dir=" << run_dir.string() << "\n";
  return kExitOk;
}

int cmd_eval(const CLI::App* cmd, const TaskFlags& task_flags,
             const std::string& ckpt_path, int64_t size, uint64_t seed) {
  const PolicyParams params = load_checkpoint(ckpt_path);
  const TaskSpec task = task_flags.resolve(cmd, TaskSpec{});
  const double acc = evaluate(params, task, size, seed);
  std::cout << "eval task=" << task_kind_to_string(task.kind) << " n=" << size
            << " accuracy=" << acc << "\n";
  return kExitOk;
}

int cmd_fdcheck(const CLI::App* cmd, const std::string& loss, int64_t coords,
                double step, double tol, uint64_t seed,
                const std::string& config_file) {
  PolicyConfig pc;
  if (cmd->count("--config")) {
    const nlohmann::json j = load_json_file(config_file);
    if (j.contains("policy")) pc = policy_config_from_json(j.at("policy"));
  }
  std::vector<LossKind> kinds;
  if (loss == "all") {
    kinds = {LossKind::Warmup, LossKind::Grpo, LossKind::Bppo};
  } else {
    kinds = {loss_kind_from_string(loss)};
  }
  bool over = false;
  for (LossKind k : kinds) {
    const FdScenario sc = make_fd_scenario(k, seed, pc);
    const double h = step > 0.0 ? step : default_fd_step(k);
    const FdCheckResult res = finite_diff_check(sc, coords, h, seed);
    const char* name = k == LossKind::Warmup ? "warmup"
                       : k == LossKind::Grpo ? "grpo"
                                             : "bppo";
    std::cout << "fdcheck loss=" << name << " coords=" << res.n_coords
              << " max_rel_error=" << res.max_rel_error
              << " mean_rel_error=" << res.mean_rel_error << " tol=" << tol << "\n";
    over = over || !(res.max_rel_error <= tol);
  }
  return over ? kExitThreshold : kExitOk;
}

int cmd_grad_sim(const CLI::App* cmd, const TaskFlags& task_flags,
                 const std::string& ckpt_path, int64_t n_groups, int64_t group_size,
                 double temperature, int64_t max_len, uint64_t seed,
                 const std::string& out_csv) {
  const PolicyParams params = load_checkpoint(ckpt_path);
  const TaskSpec task = task_flags.resolve(cmd, TaskSpec{});
  double sum_cross = 0.0, sum_pos = 0.0, sum_neg = 0.0;
  int64_t n_cross = 0, n_pos = 0, n_neg = 0, used = 0;
  std::ofstream csv;
  if (!out_csv.empty()) {
    csv.open(out_csv);
    if (!csv) throw IoError("cannot write " + out_csv);
    csv << "group,mean_intra_positive,mean_intra_negative,mean_cross\n";
  }
  for (int64_t g = 0; g < n_groups; ++g) {
    const TaskInstance inst = gen_instance(task, derive_seed({seed, 0x5A17u,
                                                              static_cast<uint64_t>(g)}));
    const Group group = collect_group(params, task, inst, group_size, temperature,
                                      max_len, seed, g);
    if (group_is_degenerate(group)) continue;
    const CosineMatrix cm = gradient_cosine_matrix(group, params);
    ++used;
    sum_pos += cm.mean_intra_positive * static_cast<double>(cm.pairs_intra_positive);
    sum_neg += cm.mean_intra_negative * static_cast<double>(cm.pairs_intra_negative);
    sum_cross += cm.mean_cross * static_cast<double>(cm.pairs_cross);
    n_pos += cm.pairs_intra_positive;
    n_neg += cm.pairs_intra_negative;
    n_cross += cm.pairs_cross;
    if (csv.is_open()) {
      csv << g << "," << cm.mean_intra_positive << "," << cm.mean_intra_negative << ","
          << cm.mean_cross << "\n";
    }
  }
  if (used == 0) throw ConfigError("grad-sim: no mixed-reward groups collected");
  const auto mean = [](double s, int64_t n) {
    return n > 0 ? s / static_cast<double>(n) : 0.0;
  };
  // intra-stratum summary balances the two strata (the redundancy claim is
  // about each stratum separately, and pair counts are lopsided when the
  // success rate is far from 1/2)
  double intra = 0.0;
  if (n_pos > 0 && n_neg > 0) {
    intra = 0.5 * (mean(sum_pos, n_pos) + mean(sum_neg, n_neg));
  } else {
    intra = mean(sum_pos + sum_neg, n_pos + n_neg);
  }
  std::cout << "grad-sim groups=" << n_groups << " mixed=" << used
            << " mean_intra=" << intra
            << " mean_intra_positive=" << mean(sum_pos, n_pos)
            << " mean_intra_negative=" << mean(sum_neg, n_neg)
            << " mean_cross=" << mean(sum_cross, n_cross) << "\n";
  return kExitOk;
}

int cmd_prefix(const CLI::App* cmd, const TaskFlags& task_flags,
               const std::string& ckpt_path, std::vector<int64_t> prefix_lens,
               int64_t n_instances, int64_t k, int64_t max_len, uint64_t seed) {
  const PolicyParams params = load_checkpoint(ckpt_path);
  TaskSpec base;
  base.kind = TaskKind::PlanParity;
  const TaskSpec task = task_flags.resolve(cmd, base);
  if (prefix_lens.empty()) prefix_lens = {0, 1};
  for (const int64_t len : prefix_lens) {
    double sum = 0.0;
    for (int64_t i = 0; i < n_instances; ++i) {
      const uint64_t si = derive_seed({seed, 0xC3u, static_cast<uint64_t>(i)});
      const TaskInstance inst = gen_instance(task, si);
      // same per-instance seed for every prefix length: the frozen base
      // response is shared, so lengths are compared on paired samples
      sum += prefix_commitment(params, task, inst, len, k, si, max_len);
    }
    std::cout << "prefix task=" << task_kind_to_string(task.kind) << " prefix_len=" << len
              << " mean_commitment=" << sum / static_cast<double>(n_instances)
              << " instances=" << n_instances << " k=" << k << "\n";
  }
  return kExitOk;
}

int cmd_curate(const CLI::App* cmd, const std::string& pool_path,
               const std::string& ckpt_path, bool random_init, uint64_t seed,
               const std::string& config_file, int64_t k, int64_t m,
               const std::string& out_path) {
  const std::vector<std::vector<int>> pool = read_pool(pool_path);
  PolicyParams params;
  if (!ckpt_path.empty()) {
    params = load_checkpoint(ckpt_path);
  } else if (random_init) {
    PolicyConfig pc;
    if (cmd->count("--config")) {
      const nlohmann::json j = load_json_file(config_file);
      if (j.contains("policy")) pc = policy_config_from_json(j.at("policy"));
    }
    params = init_params(pc, seed);
  } else {
    throw ConfigError("curate: pass --checkpoint or --random-init");
  }
  const std::vector<int64_t> picked = curate(params, pool, k, m);

  std::ostringstream body;
  for (const int64_t idx : picked) {
    const std::vector<int>& toks = pool[static_cast<size_t>(idx)];
    for (size_t t = 0; t < toks.size(); ++t) body << (t ? " " : "") << toks[t];
    body << "\n";
  }
  if (out_path.empty()) {
    std::cout << body.str();
  } else {
    std::ofstream os(out_path);
    if (!os) throw IoError("cannot write " + out_path);
    os << body.str();
    std::cout << "curate pool=" << pool.size() << " k=" << k << " m=" << m
              << " selected=" << picked.size() << " out=" << out_path << "\n";
  }
  return kExitOk;
}

int cmd_compare(const std::string& run_a, const std::string& run_b,
                const std::string& csv_path) {
  const CostReport rep = compare_runs(run_a, run_b);
  std::cout << rep.to_table();
  fs::path out = csv_path;
  if (out.empty() && fs::is_directory(run_b)) out = fs::path(run_b) / "compare.csv";
  if (!out.empty()) {
    std::ofstream os(out);
    if (!os) throw IoError("cannot write " + out.string());
    os << rep.to_csv();
    std::cout << "  csv=" << out.string() << "\n";
  }
  return kExitOk;
}

}  // namespace

int cli_main(int argc, const char* const* argv) {
  CLI::App app{
      "bppolab: a desk-scale RLVR lab training tiny policies on verifiable tasks\n"
      "with GRPO and BPPO (binary-pair, prefix-masked policy optimization).\n"
      "exit codes: 0 ok, 1 other, 2 usage, 3 config, 4 io, 5 threshold,\n"
      "6 warmup target missed, 7 numeric"};
  app.require_subcommand(1);
  int rc = kExitOk;

  // warmup
  auto* wu = app.add_subcommand("warmup", "supervised warmup to a starting policy");
  auto wu_tf = std::make_shared<TrainFlags>();
  auto wu_out = std::make_shared<std::string>("warmup.ckpt");
  wu_tf->attach(wu, /*rl_flags=*/false);
  wu->add_option("--out", *wu_out, "checkpoint output path");
  wu->callback([&rc, wu, wu_tf, wu_out]() { rc = cmd_warmup(wu, *wu_tf, *wu_out); });

  // train
  auto* tr = app.add_subcommand("train", "RL training from a warm checkpoint");
  auto tr_tf = std::make_shared<TrainFlags>();
  auto tr_warm = std::make_shared<std::string>();
  auto tr_dir = std::make_shared<std::string>();
  tr_tf->attach(tr, /*rl_flags=*/true);
  tr->add_option("--warm-start", *tr_warm, "warmup checkpoint (also the KL reference)")
      ->required();
  tr->add_option("--run-dir", *tr_dir, "run directory (default runs/<stamp>-seed<s>-<algo>)");
  tr->callback([&rc, tr, tr_tf, tr_warm, tr_dir]() {
    rc = cmd_train(tr, *tr_tf, *tr_warm, *tr_dir);
  });

  // eval
  auto* ev = app.add_subcommand("eval", "greedy exact-match accuracy of a checkpoint");
  auto ev_task = std::make_shared<TaskFlags>();
  auto ev_ckpt = std::make_shared<std::string>();
  auto ev_size = std::make_shared<int64_t>(200);
  auto ev_seed = std::make_shared<uint64_t>(0);
  ev_task->attach(ev);
  ev->add_option("--checkpoint", *ev_ckpt, "policy checkpoint")->required();
  ev->add_option("--size", *ev_size, "number of instances");
  ev->add_option("--seed", *ev_seed, "instance seed");
  ev->callback([&rc, ev, ev_task, ev_ckpt, ev_size, ev_seed]() {
    rc = cmd_eval(ev, *ev_task, *ev_ckpt, *ev_size, *ev_seed);
  });

  // analyze
  auto* az = app.add_subcommand("analyze", "gradient and behavior diagnostics");
  az->require_subcommand(1);

  auto* fd = az->add_subcommand("fdcheck", "finite-difference gradient check");
  auto fd_loss = std::make_shared<std::string>("all");
  auto fd_coords = std::make_shared<int64_t>(200);
  auto fd_step = std::make_shared<double>(0.0);  // 0 = per-loss default
  auto fd_tol = std::make_shared<double>(1e-6);
  auto fd_seed = std::make_shared<uint64_t>(0);
  auto fd_cfg = std::make_shared<std::string>();
  fd->add_option("--loss", *fd_loss, "warmup|grpo|bppo|all");
  fd->add_option("--coords", *fd_coords, "random coordinates to probe");
  fd->add_option("--step", *fd_step, "initial difference step (0 = per-loss default)");
  fd->add_option("--tol", *fd_tol, "max relative error allowed");
  fd->add_option("--seed", *fd_seed, "scenario/coordinate seed");
  fd->add_option("--config", *fd_cfg, "JSON config; its policy section sets the shape");
  fd->callback([&rc, fd, fd_loss, fd_coords, fd_step, fd_tol, fd_seed, fd_cfg]() {
    rc = cmd_fdcheck(fd, *fd_loss, *fd_coords, *fd_step, *fd_tol, *fd_seed, *fd_cfg);
  });

  auto* gs = az->add_subcommand("grad-sim", "per-response gradient cosine structure");
  auto gs_task = std::make_shared<TaskFlags>();
  auto gs_ckpt = std::make_shared<std::string>();
  auto gs_groups = std::make_shared<int64_t>(100);
  auto gs_gsize = std::make_shared<int64_t>(8);
  auto gs_temp = std::make_shared<double>(1.0);
  auto gs_maxlen = std::make_shared<int64_t>(8);
  auto gs_seed = std::make_shared<uint64_t>(0);
  auto gs_csv = std::make_shared<std::string>();
  gs_task->attach(gs);
  gs->add_option("--checkpoint", *gs_ckpt, "policy checkpoint")->required();
  gs->add_option("--groups", *gs_groups, "prompts to sample");
  gs->add_option("--group-size", *gs_gsize, "responses per prompt");
  gs->add_option("--temperature", *gs_temp, "sampling temperature");
  gs->add_option("--max-response-len", *gs_maxlen, "response token cap");
  gs->add_option("--seed", *gs_seed, "sampling seed");
  gs->add_option("--csv", *gs_csv, "per-group means CSV output");
  gs->callback([&rc, gs, gs_task, gs_ckpt, gs_groups, gs_gsize, gs_temp, gs_maxlen,
                gs_seed, gs_csv]() {
    rc = cmd_grad_sim(gs, *gs_task, *gs_ckpt, *gs_groups, *gs_gsize, *gs_temp,
                      *gs_maxlen, *gs_seed, *gs_csv);
  });

  auto* px = az->add_subcommand("prefix", "commitment score of frozen response prefixes");
  auto px_task = std::make_shared<TaskFlags>();
  auto px_ckpt = std::make_shared<std::string>();
  auto px_lens = std::make_shared<std::vector<int64_t>>();
  auto px_inst = std::make_shared<int64_t>(50);
  auto px_k = std::make_shared<int64_t>(50);
  auto px_maxlen = std::make_shared<int64_t>(16);
  auto px_seed = std::make_shared<uint64_t>(0);
  px_task->attach(px);
  px->add_option("--checkpoint", *px_ckpt, "policy checkpoint")->required();
  px->add_option("--prefix-lens", *px_lens, "prefix lengths (default 0 1)")
      ->delimiter(',');
  px->add_option("--instances", *px_inst, "instances to average over");
  px->add_option("--k", *px_k, "resampled suffixes per instance");
  px->add_option("--max-response-len", *px_maxlen, "response token cap");
  px->add_option("--seed", *px_seed, "sampling seed");
  px->callback([&rc, px, px_task, px_ckpt, px_lens, px_inst, px_k, px_maxlen,
                px_seed]() {
    rc = cmd_prefix(px, *px_task, *px_ckpt, *px_lens, *px_inst, *px_k, *px_maxlen,
                    *px_seed);
  });

  // curate
  auto* cu = app.add_subcommand("curate", "diverse prompt subset from a pool file");
  auto cu_pool = std::make_shared<std::string>();
  auto cu_ckpt = std::make_shared<std::string>();
  auto cu_rand = std::make_shared<bool>(false);
  auto cu_seed = std::make_shared<uint64_t>(0);
  auto cu_cfg = std::make_shared<std::string>();
  auto cu_k = std::make_shared<int64_t>(4);
  auto cu_m = std::make_shared<int64_t>(2);
  auto cu_out = std::make_shared<std::string>();
  cu->add_option("--pool", *cu_pool, "prompt pool: one prompt per line, token ids")
      ->required();
  cu->add_option("--checkpoint", *cu_ckpt, "policy whose features embed the prompts");
  cu->add_flag("--random-init", *cu_rand, "embed with a freshly initialized policy");
  cu->add_option("--seed", *cu_seed, "init seed for --random-init");
  cu->add_option("--config", *cu_cfg, "JSON config; its policy section sets the shape");
  cu->add_option("-k,--clusters", *cu_k, "cluster count");
  cu->add_option("-m,--per-cluster", *cu_m, "selections per cluster");
  cu->add_option("--out", *cu_out, "output file (default stdout)");
  cu->callback([&rc, cu, cu_pool, cu_ckpt, cu_rand, cu_seed, cu_cfg, cu_k, cu_m,
                cu_out]() {
    rc = cmd_curate(cu, *cu_pool, *cu_ckpt, *cu_rand, *cu_seed, *cu_cfg, *cu_k, *cu_m,
                    *cu_out);
  });

  // compare
  auto* cp = app.add_subcommand("compare", "cost/quality report over two run logs");
  auto cp_a = std::make_shared<std::string>();
  auto cp_b = std::make_shared<std::string>();
  auto cp_csv = std::make_shared<std::string>();
  cp->add_option("run_a", *cp_a, "baseline run directory or metrics file")->required();
  cp->add_option("run_b", *cp_b, "comparison run directory or metrics file")->required();
  cp->add_option("--csv", *cp_csv, "per-step token counts CSV output");
  cp->callback([&rc, cp_a, cp_b, cp_csv]() { rc = cmd_compare(*cp_a, *cp_b, *cp_csv); });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitUsage;
  } catch (const ConfigError& e) {
    return fail("config", e.what(), kExitConfig);
  } catch (const IoError& e) {
    return fail("io", e.what(), kExitIo);
  } catch (const NumericError& e) {
    return fail("numeric", e.what(), kExitNumeric);
  } catch (const ShapeError& e) {
    return fail("shape", e.what(), kExitConfig);
  } catch (const Error& e) {
    return fail("runtime", e.what(), kExitOther);
  } catch (const std::exception& e) {
    return fail("internal", e.what(), kExitOther);
  }
  return rc;
}

int cli_main(const std::vector<std::string>& args) {
  std::vector<std::string> full;
  full.reserve(args.size() + 1);
  full.push_back("bppolab");
  full.insert(full.end(), args.begin(), args.end());
  std::vector<const char*> argv;
  argv.reserve(full.size());
  for (const std::string& s : full) argv.push_back(s.c_str());
  return cli_main(static_cast<int>(argv.size()), argv.data());
}

}  // namespace bppo
