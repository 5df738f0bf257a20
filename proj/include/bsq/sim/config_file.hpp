#ifndef BSQ_SIM_CONFIG_FILE_HPP
#define BSQ_SIM_CONFIG_FILE_HPP

#include <string>

#include "bsq/sim/scenario.hpp"

namespace bsq {

/// Parse the flat `section.key = value` scenario format (UTF-8 text, `#`
/// comments, comma-separated lists). Unknown keys are errors. See the README
/// for the full key schema.
ScenarioConfig parse_scenario_config(const std::string& text);

/// Load and parse a scenario file.
ScenarioConfig load_scenario_config(const std::string& path);

}  // namespace bsq

#endif  // BSQ_SIM_CONFIG_FILE_HPP
