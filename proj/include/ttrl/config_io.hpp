#pragma once

#include <string>

#include <json.hpp>

#include "ttrl/harness.hpp"

namespace ttrl::config_io {

/// Full configuration tree, suitable for `print-config` and for writing
/// next to experiment outputs.
nlohmann::json experiment_to_json(const harness::ExperimentConfig& config);

/// Applies the fields present in `j` on top of `config`; everything else
/// keeps its current value.
void merge_experiment_json(const nlohmann::json& j, harness::ExperimentConfig& config);

/// Field-level invariants: noise std devs and reward weights non-negative,
/// physics coefficients in range, episode counts and windows consistent.
/// Throws std::invalid_argument on the first violation.
void validate_experiment(const harness::ExperimentConfig& config);

/// Loads a config file: scenario defaults first (the file's "scenario" key,
/// if any), then the file's overrides on top. The result is validated.
harness::ExperimentConfig load_experiment_file(const std::string& path);

void save_experiment_file(const harness::ExperimentConfig& config, const std::string& path);

}  // namespace ttrl::config_io
