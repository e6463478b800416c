#pragma once

#include <string>
#include <vector>

#include <json.hpp>

#include "stackgrid/engine.hpp"

namespace stackgrid {

// Scenario files are JSON: a network block ({buses:[{id,role,load_mw}],
// slack_id, branches:[{from,to,reactance_pu}]}), per-bus microgrid and
// generator parameter lists, the market price, and an optional run block
// (schemes, tolerances, iteration limits, seed, noise std).
ScenarioConfig load_scenario(const std::string& path);
ScenarioConfig scenario_from_json(const nlohmann::json& j, const std::string& origin);
nlohmann::ordered_json scenario_to_json(const ScenarioConfig& cfg);

// Trace CSVs. Numbers are printed with 17 significant digits so values
// round-trip exactly through the text form.
std::string follower_trace_csv(const FollowerRunResult& run,
                               const std::vector<int>& microgrid_bus_labels);
std::string leader_trace_csv(const GaussSeidelResult& run,
                             const std::vector<int>& generator_bus_labels);

nlohmann::ordered_json report_to_json(const ScenarioConfig& cfg,
                                      const EquilibriumReport& rep,
                                      const PowerNetwork& net,
                                      const SeVerification* verification);
nlohmann::ordered_json diagnostics_to_json(const EquilibriumReport& rep,
                                           const PowerNetwork& net);

void write_text_file(const std::string& path, const std::string& content);

}  // namespace stackgrid
