#include "config_io.hpp"

#include "bppo/error.hpp"

namespace bppo {

std::string prefix_mode_to_string(PrefixSpec::Mode m) {
  return m == PrefixSpec::Mode::Absolute ? "absolute" : "fraction";
}

PrefixSpec::Mode prefix_mode_from_string(const std::string& s) {
  if (s == "absolute") return PrefixSpec::Mode::Absolute;
  if (s == "fraction") return PrefixSpec::Mode::Fraction;
  throw ConfigError("unknown prefix mode '" + s + "'");
}

std::string selection_to_string(SelectionStrategy s) {
  switch (s) {
    case SelectionStrategy::Random: return "random";
    case SelectionStrategy::ExtremeAdvantage: return "extreme_advantage";
    case SelectionStrategy::MedianLength: return "median_length";
  }
  return "?";
}

SelectionStrategy selection_from_string(const std::string& s) {
  if (s == "random") return SelectionStrategy::Random;
  if (s == "extreme_advantage") return SelectionStrategy::ExtremeAdvantage;
  if (s == "median_length") return SelectionStrategy::MedianLength;
  throw ConfigError("unknown selection strategy '" + s + "'");
}

std::string kl_mode_to_string(KlMode m) {
  return m == KlMode::Exact ? "exact" : "k3";
}

KlMode kl_mode_from_string(const std::string& s) {
  if (s == "exact") return KlMode::Exact;
  if (s == "k3") return KlMode::K3Estimator;
  throw ConfigError("unknown kl mode '" + s + "'");
}

namespace {

template <class T>
void maybe(const nlohmann::json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

}  // namespace

nlohmann::json policy_config_to_json(const PolicyConfig& c) {
  return {
      {"vocab_size", c.vocab_size},     {"context_len", c.context_len},
      {"d_model", c.d_model},           {"n_heads", c.n_heads},
      {"n_layers", c.n_layers},         {"exit_depths", c.exit_depths},
      {"init_scale", c.init_scale},
  };
}

PolicyConfig policy_config_from_json(const nlohmann::json& j) {
  PolicyConfig c;
  try {
    maybe(j, "vocab_size", c.vocab_size);
    maybe(j, "context_len", c.context_len);
    maybe(j, "d_model", c.d_model);
    maybe(j, "n_heads", c.n_heads);
    maybe(j, "n_layers", c.n_layers);
    maybe(j, "exit_depths", c.exit_depths);
    maybe(j, "init_scale", c.init_scale);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("bad policy config: ") + e.what());
  }
  c.validate();
  return c;
}

nlohmann::json objective_config_to_json(const ObjectiveConfig& c) {
  nlohmann::json j = {
      {"epsilon", c.epsilon},
      {"beta", c.beta},
      {"prefix_mode", prefix_mode_to_string(c.prefix.mode)},
      {"selection", selection_to_string(c.selection)},
      {"kl_mode", kl_mode_to_string(c.kl_mode)},
  };
  if (c.prefix.mode == PrefixSpec::Mode::Absolute) {
    j["prefix_tokens"] = c.prefix.tokens;
  } else {
    j["prefix_fraction"] = c.prefix.fraction;
  }
  return j;
}

ObjectiveConfig objective_config_from_json(const nlohmann::json& j, ObjectiveConfig c) {
  try {
    maybe(j, "epsilon", c.epsilon);
    maybe(j, "beta", c.beta);
    if (j.contains("prefix_mode")) {
      c.prefix.mode = prefix_mode_from_string(j.at("prefix_mode").get<std::string>());
    }
    maybe(j, "prefix_tokens", c.prefix.tokens);
    maybe(j, "prefix_fraction", c.prefix.fraction);
    if (j.contains("selection")) {
      c.selection = selection_from_string(j.at("selection").get<std::string>());
    }
    if (j.contains("kl_mode")) {
      c.kl_mode = kl_mode_from_string(j.at("kl_mode").get<std::string>());
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("bad objective config: ") + e.what());
  }
  c.validate();
  return c;
}

nlohmann::json train_config_to_json(const TrainConfig& c) {
  return {
      {"algo", algo_to_string(c.algo)},
      {"task", {{"kind", task_kind_to_string(c.task.kind)},
                {"modulus", c.task.modulus},
                {"length", c.task.length}}},
      {"group_size", c.group_size},
      {"batch_prompts", c.batch_prompts},
      {"steps", c.steps},
      {"inner_epochs", c.inner_epochs},
      {"lr", c.lr},
      {"adam_beta1", c.adam_beta1},
      {"adam_beta2", c.adam_beta2},
      {"adam_eps", c.adam_eps},
      {"temperature", c.temperature},
      {"max_response_len", c.max_response_len},
      {"eval_size", c.eval_size},
      {"eval_every", c.eval_every},
      {"checkpoint_every", c.checkpoint_every},
      {"seed", c.seed},
      {"workers", c.workers},
      {"objective", objective_config_to_json(c.objective)},
      {"policy", policy_config_to_json(c.policy)},
      {"warmup", {{"n_instances", c.warmup.n_instances},
                  {"batch_size", c.warmup.batch_size},
                  {"lr", c.warmup.lr},
                  {"target_accuracy", c.warmup.target_accuracy},
                  {"max_steps", c.warmup.max_steps},
                  {"eval_every", c.warmup.eval_every},
                  {"eval_size", c.warmup.eval_size}}},
  };
}

TrainConfig train_config_from_json(const nlohmann::json& j, TrainConfig c) {
  try {
    if (j.contains("algo")) c.algo = algo_from_string(j.at("algo").get<std::string>());
    if (j.contains("task")) {
      const auto& t = j.at("task");
      if (t.contains("kind")) {
        c.task.kind = task_kind_from_string(t.at("kind").get<std::string>());
      }
      maybe(t, "modulus", c.task.modulus);
      maybe(t, "length", c.task.length);
    }
    maybe(j, "group_size", c.group_size);
    maybe(j, "batch_prompts", c.batch_prompts);
    maybe(j, "steps", c.steps);
    maybe(j, "inner_epochs", c.inner_epochs);
    maybe(j, "lr", c.lr);
    maybe(j, "adam_beta1", c.adam_beta1);
    maybe(j, "adam_beta2", c.adam_beta2);
    maybe(j, "adam_eps", c.adam_eps);
    maybe(j, "temperature", c.temperature);
    maybe(j, "max_response_len", c.max_response_len);
    maybe(j, "eval_size", c.eval_size);
    maybe(j, "eval_every", c.eval_every);
    maybe(j, "checkpoint_every", c.checkpoint_every);
    maybe(j, "seed", c.seed);
    maybe(j, "workers", c.workers);
    if (j.contains("objective")) {
      c.objective = objective_config_from_json(j.at("objective"), c.objective);
    }
    if (j.contains("policy")) c.policy = policy_config_from_json(j.at("policy"));
    if (j.contains("warmup")) {
      const auto& w = j.at("warmup");
      maybe(w, "n_instances", c.warmup.n_instances);
      maybe(w, "batch_size", c.warmup.batch_size);
      maybe(w, "lr", c.warmup.lr);
      maybe(w, "target_accuracy", c.warmup.target_accuracy);
      maybe(w, "max_steps", c.warmup.max_steps);
      maybe(w, "eval_every", c.warmup.eval_every);
      maybe(w, "eval_size", c.warmup.eval_size);
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("bad train config: ") + e.what());
  }
  c.validate();
  return c;
}

}  // namespace bppo
