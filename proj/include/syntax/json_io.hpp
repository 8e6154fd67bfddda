// JSON (de)serialization for configs, environments and reports.
#pragma once

#include <json.hpp>
#include <string>

#include "syntax/env.hpp"
#include "syntax/estimator.hpp"
#include "syntax/harness.hpp"

namespace syntax {

nlohmann::json to_json(const Weights& w);

nlohmann::json to_json(const SimConfig& cfg);
SimConfig sim_config_from_json(const nlohmann::json& j);

nlohmann::json to_json(const Environment& env);
Environment environment_from_json(const nlohmann::json& j);

nlohmann::json to_json(const ExperimentSpec& spec);
ExperimentSpec experiment_spec_from_json(const nlohmann::json& j);
ExperimentSpec load_experiment_spec(const std::string& path);

nlohmann::json summary_json(const ExperimentReport& report);

}  // namespace syntax
