#include "factorlasso/cli.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <ostream>
#include <set>
#include <sstream>

#include <CLI11.hpp>

#include "factorlasso/augmented_regression.hpp"
#include "factorlasso/covariance_factors.hpp"
#include "factorlasso/csv.hpp"
#include "factorlasso/errors.hpp"
#include "factorlasso/serialization.hpp"

namespace factorlasso::cli {

using nlohmann::json;

namespace {

constexpr const char* kHeuristicSigma2 = "heuristic: residual variance of the least-penalized fit";

// ---------------------------------------------------------------------------
// small formatting helpers

std::string shortest(double value)
{
    if (std::isnan(value))
        return "NA";
    char buffer[64];
    const auto result = std::to_chars(buffer, buffer + sizeof buffer, value);
    return std::string(buffer, result.ptr);
}

std::string fixed(double value, int digits)
{
    if (std::isnan(value))
        return "NA";
    char buffer[64];
    std::snprintf(buffer, sizeof buffer, "%.*f", digits, value);
    return buffer;
}

std::string pad(const std::string& text, std::size_t width)
{
    return text.size() >= width ? text : std::string(width - text.size(), ' ') + text;
}

std::vector<double> to_std(const Vector& v)
{
    return {v.data(), v.data() + v.size()};
}

/// Pretty JSON with every line prefixed by "# ".
std::string comment_block(const json& j)
{
    std::istringstream lines(j.dump(2));
    std::string result, line;
    while (std::getline(lines, line))
        result += "# " + line + "\n";
    return result;
}

void write_output(const std::string& content, const std::optional<std::string>& path, std::ostream& out)
{
    if (!path) {
        out << content;
        return;
    }
    std::ofstream file(*path, std::ios::binary);
    if (!file)
        throw DataError("cannot open '" + *path + "' for writing");
    file << content;
    if (!file)
        throw DataError("failed writing '" + *path + "'");
}

/// Runs a command body and maps the exception hierarchy onto exit statuses.
template <class Body>
int guarded(std::ostream& err, Body&& body)
{
    try {
        body();
        return kOk;
    } catch (const DataError& e) {
        err << "data error: " << e.what() << '\n';
        return kData;
    } catch (const InputError& e) {
        err << "configuration error: " << e.what() << '\n';
        return kUsage;
    } catch (const DegenerateColumnError& e) {
        err << "numerical error: " << e.what() << "; drop constant columns or reduce the factor count\n";
        return kNumerical;
    } catch (const NumericalError& e) {
        err << "numerical error: " << e.what() << '\n';
        return kNumerical;
    } catch (const std::exception& e) {
        err << "internal error: " << e.what() << '\n';
        return 1;
    }
}

// ---------------------------------------------------------------------------
// JSON config reading

void reject_unknown(const json& j, const std::set<std::string>& known)
{
    for (const auto& item : j.items())
        if (!known.contains(item.key()))
            throw ConfigError(item.key(), "unknown key");
}

void check_preamble(const json& j, const std::string& command)
{
    if (!j.is_object())
        throw ConfigError("config", "expected a JSON object");
    if (j.contains("schema_version")) {
        const json& v = j.at("schema_version");
        if (!v.is_number_integer() || v.get<int>() != kSchemaVersion)
            throw ConfigError("schema_version", "expected " + std::to_string(kSchemaVersion));
    }
    if (j.contains("command")) {
        const json& c = j.at("command");
        if (!c.is_string() || c.get<std::string>() != command)
            throw ConfigError("command", "this config is not for '" + command + "'");
    }
}

std::string read_string(const json& j, const std::string& field)
{
    if (!j.is_string())
        throw ConfigError(field, "expected a string");
    return j.get<std::string>();
}

std::optional<std::string> read_optional_string(const json& j, const std::string& field)
{
    if (j.is_null())
        return std::nullopt;
    return read_string(j, field);
}

bool read_bool(const json& j, const std::string& field)
{
    if (!j.is_boolean())
        throw ConfigError(field, "expected true or false");
    return j.get<bool>();
}

long long read_integer(const json& j, const std::string& field)
{
    if (!j.is_number_integer())
        throw ConfigError(field, "expected an integer");
    return j.get<long long>();
}

double read_number(const json& j, const std::string& field)
{
    if (!j.is_number())
        throw ConfigError(field, "expected a number");
    return j.get<double>();
}

json optional_json(const std::optional<std::string>& value)
{
    return value ? json(*value) : json(nullptr);
}

std::optional<Index> parse_k(const std::string& text)
{
    if (text == "auto")
        return std::nullopt;
    Index k = -1;
    const auto [end, ec] = std::from_chars(text.data(), text.data() + text.size(), k);
    if (ec != std::errc() || end != text.data() + text.size() || k < 0)
        throw ConfigError("k", "expected 'auto' or a non-negative integer, got '" + text + "'");
    return k;
}

void validate_grid(const GridSpec& grid)
{
    if (const auto* geometric = std::get_if<GeometricGrid>(&grid)) {
        if (geometric->points < 1)
            throw ConfigError("grid.points", "must be at least 1");
        if (!(geometric->ratio > 0.0 && geometric->ratio < 1.0))
            throw ConfigError("grid.ratio", "must lie in (0, 1)");
        return;
    }
    try {
        make_grid(grid, 1.0);
    } catch (const InputError& e) {
        throw ConfigError("grid.penalties", e.what());
    }
}

void validate(const SimulateConfig& config)
{
    if (config.scenarios.empty())
        throw ConfigError("scenarios", "at least one scenario is required");
    if (config.workers < 1)
        throw ConfigError("workers", "must be at least 1");
    if (config.format != OutputFormat::csv && config.format != OutputFormat::json
        && config.format != OutputFormat::text)
        throw ConfigError("format", "unknown format");
    for (std::size_t i = 0; i < config.scenarios.size(); ++i) {
        try {
            config.scenarios[i].validate();
        } catch (const ConfigError& e) {
            const std::string path = "scenarios[" + std::to_string(i) + "]." + e.field();
            throw ConfigError(path, std::string(e.what()).substr(e.field().size() + 2));
        }
    }
}

void validate(const FitConfig& config)
{
    if (config.x.empty())
        throw ConfigError("x", "a predictor file is required (--x)");
    if (config.y && config.y_column)
        throw ConfigError("y", "give either a response file or a response column, not both");
    if (!config.y && !config.y_column)
        throw ConfigError("y", "a response is required (--y FILE or --y-column NAME)");
    if (config.k && *config.k < 0)
        throw ConfigError("k", "must be non-negative");
    if (config.k_max && *config.k_max < 1)
        throw ConfigError("k_max", "must be at least 1");
    if (config.sigma2 && !(std::isfinite(*config.sigma2) && *config.sigma2 > 0.0))
        throw ConfigError("sigma2", "must be positive and finite");
    validate_grid(config.grid);
}

void validate(const SelectKConfig& config)
{
    if (config.x.empty())
        throw ConfigError("x", "a predictor file is required (--x)");
    if (config.k_max && *config.k_max < 1)
        throw ConfigError("k_max", "must be at least 1");
}

/// DataMatrix reports bad values as InputError; for file input they are data problems.
DataMatrix make_data(Matrix x, bool center)
{
    try {
        return DataMatrix(std::move(x), center);
    } catch (const DataError&) {
        throw;
    } catch (const InputError& e) {
        throw DataError(e.what());
    }
}

Index checked_k_max(const std::optional<Index>& requested, Index n, Index p)
{
    const Index limit = std::min(n, p) - 1;
    const Index k_max = requested.value_or(default_k_max(n, p));
    if (k_max < 1 || k_max > limit)
        throw ConfigError("k_max", "must lie in [1, min(n, p) - 1 = " + std::to_string(limit) + "]");
    return k_max;
}

// ---------------------------------------------------------------------------
// fit

struct FitReport
{
    Index n = 0;
    Index p = 0;
    Index k = 0;
    std::optional<FactorCountSelection> selection;
    Index k_max = 0;
    Vector eigenvalues;  ///< leading k
    Vector shares;       ///< eigenvalues / sum of all eigenvalues
    double sigma2 = 0.0;
    bool sigma2_heuristic = false;
    LassoPath path;
    std::vector<CoefficientEstimate> estimates;
    std::optional<CpReport> cp;
    std::vector<std::string> names;
};

FitReport compute_fit(const FitConfig& config, std::ostream& err)
{
    Dataset dataset = load_csv(config.x, config.header);
    if (config.y_column)
        dataset = take_response_column(std::move(dataset), *config.y_column);
    else
        dataset.y = load_response(*config.y, config.header);
    if (dataset.y->size() != dataset.x.rows())
        throw DataError("response has " + std::to_string(dataset.y->size()) + " values but X has "
                        + std::to_string(dataset.x.rows()) + " rows");

    const DataMatrix data = make_data(std::move(dataset.x), config.center);
    const Vector& y = *dataset.y;
    FitReport report;
    report.n = data.n();
    report.p = data.p();
    report.names = std::move(dataset.names);

    CovarianceSpectrum spectrum;
    if (config.k) {
        report.k = *config.k;
        const Index limit = std::min(report.n, report.p) - 1;
        if (report.k > limit)
            throw ConfigError("k", "must lie in [0, min(n, p) - 1 = " + std::to_string(limit) + "]");
        if (report.k > 0)
            spectrum = covariance_spectrum(data, report.k);
    } else {
        report.k_max = checked_k_max(config.k_max, report.n, report.p);
        spectrum = covariance_spectrum(data, report.k_max);
        report.selection = bai_ng_select(data, spectrum, report.k_max);
        report.k = report.selection->k_hat;
    }

    if (report.k == 0) {
        StandardFit fit = fit_standard(data, y, config.grid);
        report.path = std::move(fit.path);
        report.estimates = std::move(fit.estimates);
    } else {
        const AugmentedDesign design = build_augmented_design(data, spectrum, report.k);
        AugmentedFit fit = fit_augmented(design, y, config.grid);
        report.path = std::move(fit.path);
        report.estimates = std::move(fit.estimates);
        report.eigenvalues = spectrum.eigenvalues.head(report.k);
        const double total = spectrum.eigenvalues.sum();
        report.shares = total > 0.0 ? Vector(report.eigenvalues / total) : Vector::Zero(report.k);
    }

    if (config.sigma2) {
        report.sigma2 = *config.sigma2;
    } else {
        report.sigma2_heuristic = true;
        const double rss = report.path.residual_ss.back();
        const Index df = report.path.n_active.back();
        report.sigma2 = report.n > df ? rss / static_cast<double>(report.n - df) : rss / static_cast<double>(report.n);
        err << "note: sigma2 for Cp not given; using " << kHeuristicSigma2 << " (" << shortest(report.sigma2)
            << ")\n";
    }
    if (report.sigma2 > 0.0)
        report.cp = cp_statistic(report.path, y, report.sigma2);
    else
        err << "warning: the least-penalized fit interpolates the data; Cp is not reported (pass --sigma2)\n";
    return report;
}

std::string beta_name(const FitReport& report, Index j)
{
    if (static_cast<std::size_t>(j) < report.names.size() && !report.names[static_cast<std::size_t>(j)].empty())
        return report.names[static_cast<std::size_t>(j)];
    return "beta_" + std::to_string(j + 1);
}

json fit_to_json(const FitConfig& config, const FitReport& report)
{
    json result = {{"schema_version", kSchemaVersion}, {"config", to_json(config)}, {"n", report.n},
                   {"p", report.p},                    {"k", report.k}};
    if (report.selection) {
        result["k_selection"] = {{"method", "bai-ng"},
                                 {"k_max", report.k_max},
                                 {"sigma2", report.selection->sigma2},
                                 {"criterion", report.selection->criterion}};
    }
    result["eigenvalues"] = to_std(report.eigenvalues);
    result["variance_shares"] = to_std(report.shares);
    result["sigma2"] = {{"value", report.sigma2}, {"source", report.sigma2_heuristic ? kHeuristicSigma2 : "given"}};
    result["penalty_scales"] = {{"internal", "rho in (1/n)||y - D theta||^2 + 2 rho ||theta||_1"},
                                {"table", "n * rho / 2"}};
    if (!report.names.empty())
        result["predictor_names"] = report.names;
    if (report.cp) {
        const std::size_t i = report.cp->argmin;
        result["cp_optimal"] = {{"index", i},
                                {"rho_internal", report.path.grid[i]},
                                {"rho_table", table_scale(report.path.grid[i], report.n)}};
    } else {
        result["cp_optimal"] = nullptr;
    }
    json path = json::array();
    for (std::size_t i = 0; i < report.path.size(); ++i) {
        const auto& estimate = report.estimates[i];
        json point = {{"rho_internal", report.path.grid[i]},
                      {"rho_table", table_scale(report.path.grid[i], report.n)},
                      {"n_active", report.path.n_active[i]},
                      {"converged", static_cast<bool>(report.path.converged[i])},
                      {"alpha", to_std(estimate.alpha)},
                      {"beta", to_std(estimate.beta)}};
        point["cp"] = report.cp ? json(report.cp->cp[i]) : json(nullptr);
        path.push_back(std::move(point));
    }
    result["path"] = std::move(path);
    return result;
}

std::string fit_to_csv(const FitReport& report)
{
    CsvRecords records;
    std::vector<std::string> header{"rho_internal", "rho_table", "n_active", "converged", "cp"};
    for (Index r = 0; r < report.k; ++r)
        header.push_back("alpha_" + std::to_string(r + 1));
    for (Index j = 0; j < report.p; ++j)
        header.push_back(beta_name(report, j));
    records.push_back(std::move(header));
    for (std::size_t i = 0; i < report.path.size(); ++i) {
        const auto& estimate = report.estimates[i];
        std::vector<std::string> row{shortest(report.path.grid[i]),
                                     shortest(table_scale(report.path.grid[i], report.n)),
                                     std::to_string(report.path.n_active[i]),
                                     report.path.converged[i] ? "true" : "false",
                                     report.cp ? shortest(report.cp->cp[i]) : "NA"};
        for (Index r = 0; r < estimate.alpha.size(); ++r)
            row.push_back(shortest(estimate.alpha(r)));
        for (Index j = 0; j < estimate.beta.size(); ++j)
            row.push_back(shortest(estimate.beta(j)));
        records.push_back(std::move(row));
    }
    return write_csv(records);
}

std::string fit_to_text(const FitConfig& config, const FitReport& report)
{
    std::ostringstream os;
    os << comment_block(to_json(config));
    os << "n = " << report.n << ", p = " << report.p << ", k = " << report.k;
    if (report.selection)
        os << " (Bai-Ng selection, k_max = " << report.k_max << ")";
    else if (report.k == 0)
        os << " (plain Lasso on standardized predictors)";
    os << "\n";
    if (report.k > 0) {
        os << "\nfactor  eigenvalue  variance share\n";
        for (Index r = 0; r < report.k; ++r)
            os << pad(std::to_string(r + 1), 6) << pad(fixed(report.eigenvalues(r), 6), 12)
               << pad(fixed(report.shares(r), 4), 16) << "\n";
    }
    os << "\nsigma2 for Cp = " << shortest(report.sigma2) << " ("
       << (report.sigma2_heuristic ? kHeuristicSigma2 : "given") << ")\n";
    os << "penalties: internal rho and table scale n * rho / 2\n\n";
    os << pad("point", 5) << pad("rho_internal", 14) << pad("rho_table", 12) << pad("n_active", 10)
       << pad("Cp", 12) << "\n";
    for (std::size_t i = 0; i < report.path.size(); ++i) {
        os << pad(std::to_string(i), 5) << pad(fixed(report.path.grid[i], 6), 14)
           << pad(fixed(table_scale(report.path.grid[i], report.n), 4), 12)
           << pad(std::to_string(report.path.n_active[i]), 10)
           << pad(report.cp ? fixed(report.cp->cp[i], 3) : "NA", 12)
           << (report.path.converged[i] ? "" : "  (not converged)") << "\n";
    }
    if (report.cp) {
        const std::size_t best = report.cp->argmin;
        const auto& estimate = report.estimates[best];
        os << "\nCp-optimal point " << best << ": rho internal = " << shortest(report.path.grid[best])
           << ", rho table = " << shortest(table_scale(report.path.grid[best], report.n)) << "\n";
        os << "non-zero coefficients:\n";
        for (Index r = 0; r < estimate.alpha.size(); ++r)
            os << "  alpha_" << r + 1 << " = " << fixed(estimate.alpha(r), 6) << "\n";
        for (Index j = 0; j < estimate.beta.size(); ++j)
            if (estimate.beta(j) != 0.0)
                os << "  " << beta_name(report, j) << " = " << fixed(estimate.beta(j), 6) << "\n";
    }
    return os.str();
}

// ---------------------------------------------------------------------------
// select-k

json select_k_to_json(const SelectKConfig& config, Index k_max, const FactorCountSelection& selection)
{
    json curve = json::array();
    for (std::size_t i = 0; i < selection.criterion.size(); ++i)
        curve.push_back({{"kappa", i + 1}, {"criterion", selection.criterion[i]}});
    return {{"schema_version", kSchemaVersion},
            {"config", to_json(config)},
            {"k_max", k_max},
            {"sigma2", selection.sigma2},
            {"curve", std::move(curve)},
            {"k_hat", selection.k_hat}};
}

std::string select_k_to_csv(const FactorCountSelection& selection)
{
    CsvRecords records{{"kappa", "criterion", "selected"}};
    for (std::size_t i = 0; i < selection.criterion.size(); ++i)
        records.push_back({std::to_string(i + 1), shortest(selection.criterion[i]),
                           static_cast<Index>(i + 1) == selection.k_hat ? "true" : "false"});
    return write_csv(records);
}

std::string select_k_to_text(const SelectKConfig& config, Index k_max, const FactorCountSelection& selection)
{
    std::ostringstream os;
    os << comment_block(to_json(config));
    os << "kappa     criterion\n";
    for (std::size_t i = 0; i < selection.criterion.size(); ++i) {
        os << pad(std::to_string(i + 1), 5) << pad(fixed(selection.criterion[i], 8), 14)
           << (static_cast<Index>(i + 1) == selection.k_hat ? "  *" : "") << "\n";
    }
    os << "k_hat = " << selection.k_hat << "\n";
    os << "sigma2 = " << shortest(selection.sigma2) << " (residual variance at k_max = " << k_max << ")\n";
    return os.str();
}

std::string sidecar_path(const std::string& out)
{
    return out + ".config.json";
}

} // namespace

// ---------------------------------------------------------------------------
// public API

OutputFormat parse_format(const std::string& name, const std::string& field)
{
    if (name == "csv")
        return OutputFormat::csv;
    if (name == "json")
        return OutputFormat::json;
    if (name == "text")
        return OutputFormat::text;
    throw ConfigError(field, "expected csv, json or text, got '" + name + "'");
}

std::string format_name(OutputFormat format)
{
    switch (format) {
    case OutputFormat::csv: return "csv";
    case OutputFormat::json: return "json";
    case OutputFormat::text: return "text";
    }
    return "unknown";
}

json to_json(const SimulateConfig& config)
{
    json scenarios = json::array();
    for (const auto& s : config.scenarios)
        scenarios.push_back(scenario_to_json(s));
    return {{"schema_version", kSchemaVersion},
            {"command", "simulate"},
            {"scenarios", std::move(scenarios)},
            {"workers", config.workers},
            {"format", format_name(config.format)},
            {"out", optional_json(config.out)}};
}

json to_json(const FitConfig& config)
{
    json j = {{"schema_version", kSchemaVersion},
              {"command", "fit"},
              {"x", config.x},
              {"y", optional_json(config.y)},
              {"y_column", optional_json(config.y_column)},
              {"header", config.header},
              {"k", config.k ? json(*config.k) : json("auto")},
              {"k_max", config.k_max ? json(*config.k_max) : json(nullptr)},
              {"sigma2", config.sigma2 ? json(*config.sigma2) : json(nullptr)},
              {"center", config.center},
              {"grid", grid_to_json(config.grid)},
              {"format", format_name(config.format)},
              {"out", optional_json(config.out)}};
    return j;
}

json to_json(const SelectKConfig& config)
{
    return {{"schema_version", kSchemaVersion},
            {"command", "select-k"},
            {"x", config.x},
            {"header", config.header},
            {"center", config.center},
            {"k_max", config.k_max ? json(*config.k_max) : json(nullptr)},
            {"format", format_name(config.format)},
            {"out", optional_json(config.out)}};
}

SimulateConfig simulate_config_from_json(const json& j)
{
    check_preamble(j, "simulate");
    reject_unknown(j, {"schema_version", "command", "scenarios", "workers", "format", "out"});
    SimulateConfig config;
    if (j.contains("scenarios")) {
        const json& list = j.at("scenarios");
        if (!list.is_array() || list.empty())
            throw ConfigError("scenarios", "expected a non-empty array");
        config.scenarios.clear();
        for (std::size_t i = 0; i < list.size(); ++i)
            config.scenarios.push_back(scenario_from_json(list[i], "scenarios[" + std::to_string(i) + "]"));
    }
    if (j.contains("workers"))
        config.workers = static_cast<int>(read_integer(j.at("workers"), "workers"));
    if (j.contains("format"))
        config.format = parse_format(read_string(j.at("format"), "format"));
    if (j.contains("out"))
        config.out = read_optional_string(j.at("out"), "out");
    return config;
}

FitConfig fit_config_from_json(const json& j)
{
    check_preamble(j, "fit");
    reject_unknown(j, {"schema_version", "command", "x", "y", "y_column", "header", "k", "k_max", "sigma2", "center",
                       "grid", "format", "out"});
    FitConfig config;
    if (j.contains("x"))
        config.x = read_string(j.at("x"), "x");
    if (j.contains("y"))
        config.y = read_optional_string(j.at("y"), "y");
    if (j.contains("y_column")) {
        const json& c = j.at("y_column");
        if (c.is_number_integer())
            config.y_column = std::to_string(c.get<long long>());
        else
            config.y_column = read_optional_string(c, "y_column");
    }
    if (j.contains("header"))
        config.header = read_bool(j.at("header"), "header");
    if (j.contains("k")) {
        const json& k = j.at("k");
        if (k.is_string())
            config.k = parse_k(k.get<std::string>());
        else
            config.k = read_integer(k, "k");
    }
    if (j.contains("k_max") && !j.at("k_max").is_null())
        config.k_max = read_integer(j.at("k_max"), "k_max");
    if (j.contains("sigma2") && !j.at("sigma2").is_null())
        config.sigma2 = read_number(j.at("sigma2"), "sigma2");
    if (j.contains("center"))
        config.center = read_bool(j.at("center"), "center");
    if (j.contains("grid"))
        config.grid = grid_from_json(j.at("grid"), "grid");
    if (j.contains("format"))
        config.format = parse_format(read_string(j.at("format"), "format"));
    if (j.contains("out"))
        config.out = read_optional_string(j.at("out"), "out");
    validate_grid(config.grid);
    return config;
}

SelectKConfig select_k_config_from_json(const json& j)
{
    check_preamble(j, "select-k");
    reject_unknown(j, {"schema_version", "command", "x", "header", "center", "k_max", "format", "out"});
    SelectKConfig config;
    if (j.contains("x"))
        config.x = read_string(j.at("x"), "x");
    if (j.contains("header"))
        config.header = read_bool(j.at("header"), "header");
    if (j.contains("center"))
        config.center = read_bool(j.at("center"), "center");
    if (j.contains("k_max") && !j.at("k_max").is_null())
        config.k_max = read_integer(j.at("k_max"), "k_max");
    if (j.contains("format"))
        config.format = parse_format(read_string(j.at("format"), "format"));
    if (j.contains("out"))
        config.out = read_optional_string(j.at("out"), "out");
    return config;
}

std::vector<SimulationScenario> preset_scenarios(const std::string& name)
{
    std::vector<SimulationScenario> scenarios;
    if (name == "table1") {
        const std::pair<Index, Index> sizes[] = {{50, 50}, {100, 100}, {250, 250}, {500, 500}, {5000, 100}, {100, 2000}};
        for (const auto& [n, p] : sizes) {
            SimulationScenario s;
            s.label = "table1 n=" + std::to_string(n) + " p=" + std::to_string(p);
            s.n = n;
            s.p = p;
            scenarios.push_back(s);
        }
    } else if (name == "table2") {
        const std::pair<double, double> strengths[] = {{0.06, 0.03}, {0.2, 0.1}, {0.4, 0.2}, {0.6, 0.3}};
        for (const double a : {1.0, 0.0}) {
            for (const auto& [l1, l2] : strengths) {
                SimulationScenario s;
                s.n = 100;
                s.p = 250;
                s.lambda1 = l1;
                s.lambda2 = l2;
                s.alpha1 = a;
                s.alpha2 = -0.5 * a;
                s.label = "table2 lambda=(" + shortest(l1) + "," + shortest(l2) + ") alpha=(" + shortest(s.alpha1)
                          + "," + shortest(s.alpha2) + ")";
                scenarios.push_back(s);
            }
        }
    } else {
        throw ConfigError("preset", "unknown preset '" + name + "' (expected table1 or table2)");
    }
    return scenarios;
}

int cmd_simulate(const SimulateConfig& config, std::ostream& out, std::ostream& err)
{
    return guarded(err, [&] {
        validate(config);
        std::vector<MonteCarloSummary> summaries;
        for (const auto& scenario : config.scenarios) {
            summaries.push_back(run_study(scenario, config.workers));
            const auto& summary = summaries.back();
            if (summary.dropped > 0) {
                err << "warning: " << (scenario.label.empty() ? "scenario" : scenario.label) << ": "
                    << summary.dropped << " of " << scenario.reps << " replications failed and were dropped\n";
                for (const auto& message : summary.failures)
                    err << "  " << message << "\n";
            }
        }
        const json effective = to_json(config);
        std::string content;
        switch (config.format) {
        case OutputFormat::csv:
            content = emit_table(summaries, TableFormat::csv);
            if (config.out)
                write_output(effective.dump(2) + "\n", sidecar_path(*config.out), out);
            break;
        case OutputFormat::text:
            content = comment_block(effective) + emit_table(summaries, TableFormat::text);
            break;
        case OutputFormat::json: {
            json document = {{"schema_version", kSchemaVersion}, {"config", effective}};
            json list = json::array();
            for (const auto& summary : summaries)
                list.push_back(summary_to_json(summary));
            document["summaries"] = std::move(list);
            content = document.dump(2) + "\n";
            break;
        }
        }
        write_output(content, config.out, out);
    });
}

int cmd_fit(const FitConfig& config, std::ostream& out, std::ostream& err)
{
    return guarded(err, [&] {
        validate(config);
        const FitReport report = compute_fit(config, err);
        std::string content;
        switch (config.format) {
        case OutputFormat::csv: {
            content = fit_to_csv(report);
            if (config.out) {
                json sidecar = fit_to_json(config, report);
                sidecar.erase("path");
                write_output(sidecar.dump(2) + "\n", sidecar_path(*config.out), out);
            }
            break;
        }
        case OutputFormat::json: content = fit_to_json(config, report).dump(2) + "\n"; break;
        case OutputFormat::text: content = fit_to_text(config, report); break;
        }
        write_output(content, config.out, out);
    });
}

int cmd_select_k(const SelectKConfig& config, std::ostream& out, std::ostream& err)
{
    return guarded(err, [&] {
        validate(config);
        const Dataset dataset = load_csv(config.x, config.header);
        const DataMatrix data = make_data(dataset.x, config.center);
        const Index k_max = checked_k_max(config.k_max, data.n(), data.p());
        const CovarianceSpectrum spectrum = covariance_spectrum(data, k_max);
        const FactorCountSelection selection = bai_ng_select(data, spectrum, k_max);
        std::string content;
        switch (config.format) {
        case OutputFormat::csv:
            content = select_k_to_csv(selection);
            if (config.out)
                write_output(to_json(config).dump(2) + "\n", sidecar_path(*config.out), out);
            break;
        case OutputFormat::json: content = select_k_to_json(config, k_max, selection).dump(2) + "\n"; break;
        case OutputFormat::text: content = select_k_to_text(config, k_max, selection); break;
        }
        write_output(content, config.out, out);
    });
}

namespace {

json load_config_file(const std::string& path)
{
    std::string text;
    try {
        text = read_text_file(path);
    } catch (const DataError& e) {
        throw ConfigError("config", e.what());
    }
    try {
        return json::parse(text);
    } catch (const json::parse_error& e) {
        throw ConfigError("config", std::string("invalid JSON in '") + path + "': " + e.what());
    }
}

} // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err)
{
    CLI::App app{"Factor-augmented sparse regression: simulation study, model fitting and factor-count selection",
                 "factorlasso"};
    app.require_subcommand(1);
    const std::vector<std::string> formats{"csv", "json", "text"};

    // simulate
    auto* simulate = app.add_subcommand("simulate", "Run the Monte Carlo study and tabulate the results");
    std::string sim_config_path, sim_preset, sim_format, sim_out, sim_label;
    std::uint64_t sim_seed = 0;
    int sim_workers = 1, sim_reps = 0, sim_grid_points = 0;
    Index sim_n = 0, sim_p = 0, sim_k_fit = 0;
    double sim_l1 = 0, sim_l2 = 0, sim_a1 = 0, sim_a2 = 0, sim_sigma2 = 0, sim_grid_ratio = 0;
    auto* o_sim_config = simulate->add_option("--config", sim_config_path, "JSON config file");
    auto* o_sim_preset = simulate->add_option("--preset", sim_preset, "Scenario list: table1 or table2");
    auto* o_sim_seed = simulate->add_option("--seed", sim_seed, "Base seed for every scenario");
    auto* o_sim_workers = simulate->add_option("--workers", sim_workers, "Worker threads");
    auto* o_sim_format = simulate->add_option("--format", sim_format, "Output format (default csv)")
                             ->check(CLI::IsMember(formats));
    auto* o_sim_out = simulate->add_option("--out", sim_out, "Output file (default stdout)");
    auto* o_sim_label = simulate->add_option("--label", sim_label, "Scenario label");
    auto* o_sim_reps = simulate->add_option("--reps", sim_reps, "Replications per scenario");
    auto* o_sim_n = simulate->add_option("--n", sim_n, "Sample size");
    auto* o_sim_p = simulate->add_option("--p", sim_p, "Number of predictors (even)");
    auto* o_sim_l1 = simulate->add_option("--lambda1", sim_l1, "Variance share of factor 1");
    auto* o_sim_l2 = simulate->add_option("--lambda2", sim_l2, "Variance share of factor 2");
    auto* o_sim_a1 = simulate->add_option("--alpha1", sim_a1, "Coefficient of factor 1");
    auto* o_sim_a2 = simulate->add_option("--alpha2", sim_a2, "Coefficient of factor 2");
    auto* o_sim_sigma2 = simulate->add_option("--sigma2-eps", sim_sigma2, "Noise variance");
    auto* o_sim_k_fit = simulate->add_option("--k-fit", sim_k_fit, "Factors used by the augmented fit");
    auto* o_sim_points = simulate->add_option("--grid-points", sim_grid_points, "Penalty grid size");
    auto* o_sim_ratio = simulate->add_option("--grid-ratio", sim_grid_ratio, "Smallest / largest penalty");
    o_sim_config->excludes(o_sim_preset);

    // fit
    auto* fit = app.add_subcommand("fit", "Fit the augmented (or plain, k = 0) Lasso path to CSV data");
    std::string fit_config_path, fit_x, fit_y, fit_y_column, fit_k, fit_format, fit_out;
    Index fit_k_max = 0;
    double fit_sigma2 = 0, fit_grid_ratio = 0;
    int fit_grid_points = 0;
    bool fit_header = false, fit_center = false;
    auto* o_fit_config = fit->add_option("--config", fit_config_path, "JSON config file");
    auto* o_fit_x = fit->add_option("--x", fit_x, "Predictor CSV (one observation per row)");
    auto* o_fit_y = fit->add_option("--y", fit_y, "Single-column response CSV");
    auto* o_fit_y_column = fit->add_option("--y-column", fit_y_column, "Response column in the X file (name or 0-based index)");
    auto* o_fit_header = fit->add_flag("--header", fit_header, "Input files have a header row");
    auto* o_fit_k = fit->add_option("--k", fit_k, "Number of factors or 'auto' (default)");
    auto* o_fit_k_max = fit->add_option("--k-max", fit_k_max, "Largest factor count considered by 'auto'");
    auto* o_fit_sigma2 = fit->add_option("--sigma2", fit_sigma2, "Error variance for Cp");
    auto* o_fit_center = fit->add_flag("--center", fit_center, "Center the predictor columns");
    auto* o_fit_points = fit->add_option("--grid-points", fit_grid_points, "Penalty grid size");
    auto* o_fit_ratio = fit->add_option("--grid-ratio", fit_grid_ratio, "Smallest / largest penalty");
    auto* o_fit_format = fit->add_option("--format", fit_format, "Output format (default json)")
                             ->check(CLI::IsMember(formats));
    auto* o_fit_out = fit->add_option("--out", fit_out, "Output file (default stdout)");
    o_fit_y->excludes(o_fit_y_column);

    // select-k
    auto* select = app.add_subcommand("select-k", "Estimate the number of factors with the Bai-Ng criterion");
    std::string sel_config_path, sel_x, sel_format, sel_out;
    Index sel_k_max = 0;
    bool sel_header = false, sel_center = false;
    auto* o_sel_config = select->add_option("--config", sel_config_path, "JSON config file");
    auto* o_sel_x = select->add_option("--x", sel_x, "Predictor CSV (one observation per row)");
    auto* o_sel_header = select->add_flag("--header", sel_header, "The file has a header row");
    auto* o_sel_center = select->add_flag("--center", sel_center, "Center the predictor columns");
    auto* o_sel_k_max = select->add_option("--k-max", sel_k_max, "Largest factor count considered");
    auto* o_sel_format = select->add_option("--format", sel_format, "Output format (default text)")
                             ->check(CLI::IsMember(formats));
    auto* o_sel_out = select->add_option("--out", sel_out, "Output file (default stdout)");

    try {
        std::vector<std::string> reversed(args.rbegin(), args.rend());
        app.parse(std::move(reversed));
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? kOk : kUsage;
    }

    auto given = [](const CLI::Option* option) { return option->count() > 0; };

    if (simulate->parsed()) {
        SimulateConfig config;
        const int status = guarded(err, [&] {
            if (given(o_sim_config))
                config = simulate_config_from_json(load_config_file(sim_config_path));
            if (given(o_sim_preset))
                config.scenarios = preset_scenarios(sim_preset);
            if (given(o_sim_workers))
                config.workers = sim_workers;
            if (given(o_sim_format))
                config.format = parse_format(sim_format);
            if (given(o_sim_out))
                config.out = sim_out;
            for (auto& s : config.scenarios) {
                if (given(o_sim_seed))
                    s.base_seed = sim_seed;
                if (given(o_sim_label))
                    s.label = sim_label;
                if (given(o_sim_reps))
                    s.reps = sim_reps;
                if (given(o_sim_n))
                    s.n = sim_n;
                if (given(o_sim_p))
                    s.p = sim_p;
                if (given(o_sim_l1))
                    s.lambda1 = sim_l1;
                if (given(o_sim_l2))
                    s.lambda2 = sim_l2;
                if (given(o_sim_a1))
                    s.alpha1 = sim_a1;
                if (given(o_sim_a2))
                    s.alpha2 = sim_a2;
                if (given(o_sim_sigma2))
                    s.sigma2_eps = sim_sigma2;
                if (given(o_sim_k_fit))
                    s.k_fit = sim_k_fit;
                if (given(o_sim_points) || given(o_sim_ratio)) {
                    GeometricGrid grid = std::holds_alternative<GeometricGrid>(s.grid) ? std::get<GeometricGrid>(s.grid)
                                                                                       : GeometricGrid{};
                    if (given(o_sim_points))
                        grid.points = sim_grid_points;
                    if (given(o_sim_ratio))
                        grid.ratio = sim_grid_ratio;
                    s.grid = grid;
                }
            }
            validate(config);
        });
        if (status != kOk)
            return status;
        return cmd_simulate(config, out, err);
    }

    if (fit->parsed()) {
        FitConfig config;
        const int status = guarded(err, [&] {
            if (given(o_fit_config))
                config = fit_config_from_json(load_config_file(fit_config_path));
            if (given(o_fit_x))
                config.x = fit_x;
            if (given(o_fit_y)) {
                config.y = fit_y;
                config.y_column.reset();
            }
            if (given(o_fit_y_column)) {
                config.y_column = fit_y_column;
                config.y.reset();
            }
            if (given(o_fit_header))
                config.header = fit_header;
            if (given(o_fit_k))
                config.k = parse_k(fit_k);
            if (given(o_fit_k_max))
                config.k_max = fit_k_max;
            if (given(o_fit_sigma2))
                config.sigma2 = fit_sigma2;
            if (given(o_fit_center))
                config.center = fit_center;
            if (given(o_fit_points) || given(o_fit_ratio)) {
                GeometricGrid grid = std::holds_alternative<GeometricGrid>(config.grid)
                                         ? std::get<GeometricGrid>(config.grid)
                                         : GeometricGrid{};
                if (given(o_fit_points))
                    grid.points = fit_grid_points;
                if (given(o_fit_ratio))
                    grid.ratio = fit_grid_ratio;
                config.grid = grid;
            }
            if (given(o_fit_format))
                config.format = parse_format(fit_format);
            if (given(o_fit_out))
                config.out = fit_out;
            validate(config);
        });
        if (status != kOk)
            return status;
        return cmd_fit(config, out, err);
    }

    SelectKConfig config;
    const int status = guarded(err, [&] {
        if (given(o_sel_config))
            config = select_k_config_from_json(load_config_file(sel_config_path));
        if (given(o_sel_x))
            config.x = sel_x;
        if (given(o_sel_header))
            config.header = sel_header;
        if (given(o_sel_center))
            config.center = sel_center;
        if (given(o_sel_k_max))
            config.k_max = sel_k_max;
        if (given(o_sel_format))
            config.format = parse_format(sel_format);
        if (given(o_sel_out))
            config.out = sel_out;
        validate(config);
    });
    if (status != kOk)
        return status;
    return cmd_select_k(config, out, err);
}

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err)
{
    std::vector<std::string> args;
    for (int i = 1; i < argc; ++i)
        args.emplace_back(argv[i]);
    return run(args, out, err);
}

} // namespace factorlasso::cli
