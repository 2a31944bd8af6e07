#include "factorlasso/serialization.hpp"

#include <set>

#include "factorlasso/errors.hpp"

namespace factorlasso {

using nlohmann::json;

namespace {

double read_number(const json& j, const std::string& field)
{
    if (!j.is_number())
        throw ConfigError(field, "expected a number");
    return j.get<double>();
}

long long read_integer(const json& j, const std::string& field)
{
    if (!j.is_number_integer())
        throw ConfigError(field, "expected an integer");
    return j.get<long long>();
}

void reject_unknown(const json& j, const std::set<std::string>& known, const std::string& field)
{
    for (const auto& item : j.items())
        if (!known.contains(item.key()))
            throw ConfigError(field + "." + item.key(), "unknown key");
}

json metrics_to_json(const ReplicationResult& r)
{
    json out = json::object();
    for (const auto& field : kReplicationMetrics)
        out[field.name] = r.*field.member;
    return out;
}

} // namespace

json grid_to_json(const GridSpec& grid)
{
    if (const auto* geometric = std::get_if<GeometricGrid>(&grid))
        return {{"points", geometric->points}, {"ratio", geometric->ratio}};
    return {{"penalties", std::get<ExplicitGrid>(grid).penalties}};
}

GridSpec grid_from_json(const json& j, const std::string& field)
{
    if (!j.is_object())
        throw ConfigError(field, "expected an object");
    reject_unknown(j, {"points", "ratio", "penalties"}, field);
    if (j.contains("penalties")) {
        if (j.contains("points") || j.contains("ratio"))
            throw ConfigError(field, "give either penalties or points/ratio, not both");
        const json& list = j.at("penalties");
        if (!list.is_array())
            throw ConfigError(field + ".penalties", "expected an array");
        ExplicitGrid grid;
        for (std::size_t i = 0; i < list.size(); ++i)
            grid.penalties.push_back(read_number(list[i], field + ".penalties[" + std::to_string(i) + "]"));
        return grid;
    }
    GeometricGrid grid;
    if (j.contains("points"))
        grid.points = static_cast<int>(read_integer(j.at("points"), field + ".points"));
    if (j.contains("ratio"))
        grid.ratio = read_number(j.at("ratio"), field + ".ratio");
    return grid;
}

json scenario_to_json(const SimulationScenario& s)
{
    json support = json::array();
    for (const auto& entry : s.beta_support)
        support.push_back({{"index", entry.index}, {"value", entry.value}});
    return {{"label", s.label},         {"n", s.n},
            {"p", s.p},                 {"lambda1", s.lambda1},
            {"lambda2", s.lambda2},     {"alpha1", s.alpha1},
            {"alpha2", s.alpha2},       {"beta_support", support},
            {"sigma2_eps", s.sigma2_eps}, {"k_fit", s.k_fit},
            {"grid", grid_to_json(s.grid)}, {"reps", s.reps},
            {"base_seed", s.base_seed}};
}

SimulationScenario scenario_from_json(const json& j, const std::string& field)
{
    if (!j.is_object())
        throw ConfigError(field, "expected an object");
    reject_unknown(j,
                   {"label", "n", "p", "lambda1", "lambda2", "alpha1", "alpha2", "beta_support", "sigma2_eps",
                    "k_fit", "grid", "reps", "base_seed"},
                   field);
    SimulationScenario s;
    auto sub = [&](const char* key) { return field + "." + key; };
    if (j.contains("label")) {
        if (!j.at("label").is_string())
            throw ConfigError(sub("label"), "expected a string");
        s.label = j.at("label").get<std::string>();
    }
    if (j.contains("n"))
        s.n = read_integer(j.at("n"), sub("n"));
    if (j.contains("p"))
        s.p = read_integer(j.at("p"), sub("p"));
    if (j.contains("lambda1"))
        s.lambda1 = read_number(j.at("lambda1"), sub("lambda1"));
    if (j.contains("lambda2"))
        s.lambda2 = read_number(j.at("lambda2"), sub("lambda2"));
    if (j.contains("alpha1"))
        s.alpha1 = read_number(j.at("alpha1"), sub("alpha1"));
    if (j.contains("alpha2"))
        s.alpha2 = read_number(j.at("alpha2"), sub("alpha2"));
    if (j.contains("beta_support")) {
        const json& list = j.at("beta_support");
        if (!list.is_array())
            throw ConfigError(sub("beta_support"), "expected an array");
        s.beta_support.clear();
        for (std::size_t i = 0; i < list.size(); ++i) {
            const std::string item = sub("beta_support") + "[" + std::to_string(i) + "]";
            const json& e = list[i];
            if (!e.is_object() || !e.contains("index") || !e.contains("value"))
                throw ConfigError(item, "expected {\"index\": ..., \"value\": ...}");
            reject_unknown(e, {"index", "value"}, item);
            s.beta_support.push_back({read_integer(e.at("index"), item + ".index"),
                                      read_number(e.at("value"), item + ".value")});
        }
    }
    if (j.contains("sigma2_eps"))
        s.sigma2_eps = read_number(j.at("sigma2_eps"), sub("sigma2_eps"));
    if (j.contains("k_fit"))
        s.k_fit = read_integer(j.at("k_fit"), sub("k_fit"));
    if (j.contains("grid"))
        s.grid = grid_from_json(j.at("grid"), sub("grid"));
    if (j.contains("reps"))
        s.reps = static_cast<int>(read_integer(j.at("reps"), sub("reps")));
    if (j.contains("base_seed")) {
        if (!j.at("base_seed").is_number_unsigned())
            throw ConfigError(sub("base_seed"), "expected a non-negative integer");
        s.base_seed = j.at("base_seed").get<std::uint64_t>();
    }
    try {
        s.validate();
    } catch (const ConfigError& e) {
        throw ConfigError(field + "." + e.field(), std::string(e.what()).substr(e.field().size() + 2));
    }
    return s;
}

json summary_to_json(const MonteCarloSummary& summary)
{
    return {{"scenario", scenario_to_json(summary.scenario)},
            {"completed", summary.completed},
            {"dropped", summary.dropped},
            {"failures", summary.failures},
            {"mean", metrics_to_json(summary.mean)},
            {"standard_error", metrics_to_json(summary.standard_error)},
            {"penalty_scale", "table (n * rho / 2)"}};
}

} // namespace factorlasso
