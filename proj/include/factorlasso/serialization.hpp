#pragma once

#include <json.hpp>

#include "factorlasso/lasso_path.hpp"
#include "factorlasso/simulation.hpp"

namespace factorlasso {

inline constexpr int kSchemaVersion = 1;

nlohmann::json grid_to_json(const GridSpec& grid);
/// Accepts {"points": N, "ratio": r} or {"penalties": [...]}.
GridSpec grid_from_json(const nlohmann::json& j, const std::string& field = "grid");

nlohmann::json scenario_to_json(const SimulationScenario& scenario);
/// Missing keys keep their defaults; unknown keys and wrong types raise ConfigError.
SimulationScenario scenario_from_json(const nlohmann::json& j, const std::string& field = "scenario");

nlohmann::json summary_to_json(const MonteCarloSummary& summary);

} // namespace factorlasso
