#pragma once

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "factorlasso/lasso_path.hpp"
#include "factorlasso/simulation.hpp"
#include "factorlasso/types.hpp"

namespace factorlasso::cli {

/// Process exit statuses.
enum ExitCode : int {
    kOk = 0,
    kUsage = 2,
    kData = 3,
    kNumerical = 4,
};

enum class OutputFormat { csv, json, text };

OutputFormat parse_format(const std::string& name, const std::string& field = "format");
std::string format_name(OutputFormat format);

struct SimulateConfig
{
    std::vector<SimulationScenario> scenarios{SimulationScenario{}};
    int workers = 1;
    OutputFormat format = OutputFormat::csv;
    std::optional<std::string> out;
};

struct FitConfig
{
    std::string x;
    std::optional<std::string> y;
    std::optional<std::string> y_column;  ///< header name or 0-based index within the X file
    bool header = false;
    std::optional<Index> k;  ///< empty means "auto" (Bai-Ng selection)
    std::optional<Index> k_max;
    std::optional<double> sigma2;
    bool center = false;
    GridSpec grid = GeometricGrid{};
    OutputFormat format = OutputFormat::json;
    std::optional<std::string> out;
};

struct SelectKConfig
{
    std::string x;
    bool header = false;
    bool center = false;
    std::optional<Index> k_max;
    OutputFormat format = OutputFormat::text;
    std::optional<std::string> out;
};

// JSON config documents. Parsing rejects unknown keys and reports the field
// path of the first problem as a ConfigError.
nlohmann::json to_json(const SimulateConfig& config);
nlohmann::json to_json(const FitConfig& config);
nlohmann::json to_json(const SelectKConfig& config);
SimulateConfig simulate_config_from_json(const nlohmann::json& j);
FitConfig fit_config_from_json(const nlohmann::json& j);
SelectKConfig select_k_config_from_json(const nlohmann::json& j);

/// Named scenario lists:
/// "table1" (n, p sweep), "table2" (n = 100, p = 250, factor strength sweep).
std::vector<SimulationScenario> preset_scenarios(const std::string& name);

// The commands write their result to `out` (or to config.out when set) and
// return an exit status. Errors are reported on `err`.
int cmd_simulate(const SimulateConfig& config, std::ostream& out, std::ostream& err);
int cmd_fit(const FitConfig& config, std::ostream& out, std::ostream& err);
int cmd_select_k(const SelectKConfig& config, std::ostream& out, std::ostream& err);

/// Full command line without the program name, e.g. {"fit", "--x", "data.csv", ...}.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

} // namespace factorlasso::cli
