#pragma once

#include <string>
#include <vector>

#include "rgmpc/sim.hpp"

namespace rgmpc {

/// Loads a scenario or campaign description from versioned JSON. The scenario
/// is either a named preset ("cwh-500km-default", "cwh-cmpc-polytopic") or an
/// inline plant with box input bounds and linear state constraints.
/// Throws ConfigError on malformed input or unknown versions.
ScenarioConfig load_scenario_config(const std::string& path);
CampaignConfig load_campaign_config(const std::string& path);

ScenarioConfig parse_scenario_config(const std::string& json_text);
CampaignConfig parse_campaign_config(const std::string& json_text);

/// Applies the RGMPC_SEED environment variable override, when set.
void apply_seed_override(ScenarioConfig& cfg);

}  // namespace rgmpc
