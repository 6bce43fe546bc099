#pragma once

// Internal JSON (de)serialization helpers shared by checkpointing, the
// trainer's run-directory artifacts and the CLI config file. Not installed.

#include <json.hpp>

#include "bppo/objective.hpp"
#include "bppo/policy.hpp"
#include "bppo/trainer.hpp"

namespace bppo {

std::string prefix_mode_to_string(PrefixSpec::Mode m);
PrefixSpec::Mode prefix_mode_from_string(const std::string& s);
std::string selection_to_string(SelectionStrategy s);
SelectionStrategy selection_from_string(const std::string& s);
std::string kl_mode_to_string(KlMode m);
KlMode kl_mode_from_string(const std::string& s);

nlohmann::json policy_config_to_json(const PolicyConfig& c);
PolicyConfig policy_config_from_json(const nlohmann::json& j);

nlohmann::json objective_config_to_json(const ObjectiveConfig& c);
// starts from `base` and overlays only the keys present in `j`
ObjectiveConfig objective_config_from_json(const nlohmann::json& j, ObjectiveConfig base);

nlohmann::json train_config_to_json(const TrainConfig& c);
TrainConfig train_config_from_json(const nlohmann::json& j, TrainConfig base);

}  // namespace bppo
