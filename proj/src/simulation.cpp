#include "factorlasso/simulation.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cmath>
#include <iomanip>
#include <limits>
#include <mutex>
#include <optional>
#include <random>
#include <sstream>
#include <thread>

#include "factorlasso/covariance_factors.hpp"
#include "factorlasso/csv.hpp"
#include "factorlasso/errors.hpp"

namespace factorlasso {

namespace {

constexpr std::size_t kKeptFailureMessages = 5;

std::uint64_t splitmix64(std::uint64_t x)
{
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

double l1_distance(const Vector& a, const Vector& b)
{
    return (a - b).lpNorm<1>();
}

/// Sum |alpha_hat - alpha| with the shorter vector padded by zeros.
double alpha_distance(const Vector& estimate, const Vector& truth)
{
    const Index len = std::max(estimate.size(), truth.size());
    double total = 0.0;
    for (Index r = 0; r < len; ++r) {
        const double a = r < estimate.size() ? estimate(r) : 0.0;
        const double b = r < truth.size() ? truth(r) : 0.0;
        total += std::abs(a - b);
    }
    return total;
}

/// Eigenvectors are defined up to sign; metrics on alpha compare against the
/// population factors, so estimated loadings are oriented towards them.
void orient_to_population(CovarianceSpectrum& spectrum, const PopulationLaw& law)
{
    const Index shared = std::min(spectrum.stored(), law.loadings.cols());
    for (Index r = 0; r < shared; ++r)
        if (spectrum.eigenvectors.col(r).dot(law.loadings.col(r)) < 0.0)
            spectrum.eigenvectors.col(r) *= -1.0;
}

} // namespace

void SimulationScenario::validate() const
{
    if (n < 2)
        throw ConfigError("n", "must be at least 2");
    if (p < 2 || p % 2 != 0)
        throw ConfigError("p", "must be even and at least 2");
    if (!(lambda1 > 0.0 && lambda1 < 1.0))
        throw ConfigError("lambda1", "must lie in (0, 1)");
    if (!(lambda2 > 0.0 && lambda2 < 1.0))
        throw ConfigError("lambda2", "must lie in (0, 1)");
    if (!(lambda1 + lambda2 < 1.0))
        throw ConfigError("lambda1+lambda2", "must be below 1 so the idiosyncratic variance 1 - lambda1 - lambda2 is positive");
    if (!std::isfinite(alpha1) || !std::isfinite(alpha2))
        throw ConfigError("alpha", "must be finite");
    for (std::size_t i = 0; i < beta_support.size(); ++i) {
        const auto& entry = beta_support[i];
        if (entry.index < 1 || entry.index > p)
            throw ConfigError("beta_support[" + std::to_string(i) + "].index",
                              "must lie in [1, p = " + std::to_string(p) + "]");
        if (!std::isfinite(entry.value))
            throw ConfigError("beta_support[" + std::to_string(i) + "].value", "must be finite");
    }
    if (!(sigma2_eps > 0.0) || !std::isfinite(sigma2_eps))
        throw ConfigError("sigma2_eps", "must be positive");
    if (k_fit < 1 || k_fit >= std::min(n, p))
        throw ConfigError("k_fit", "must lie in [1, min(n, p) - 1]");
    if (reps < 1)
        throw ConfigError("reps", "must be at least 1");
    if (const auto* geometric = std::get_if<GeometricGrid>(&grid)) {
        if (geometric->points < 1)
            throw ConfigError("grid.points", "must be at least 1");
        if (!(geometric->ratio > 0.0 && geometric->ratio < 1.0))
            throw ConfigError("grid.ratio", "must lie in (0, 1)");
    } else {
        try {
            make_grid(grid, 1.0);
        } catch (const InputError& e) {
            throw ConfigError("grid.penalties", e.what());
        }
    }
}

Vector SimulationScenario::alpha() const
{
    return Vector{{alpha1, alpha2}};
}

Vector SimulationScenario::beta() const
{
    Vector b = Vector::Zero(p);
    for (const auto& entry : beta_support)
        b(entry.index - 1) += entry.value;
    return b;
}

PopulationLaw SimulationScenario::law() const
{
    const auto [psi1, psi2] = make_loadings(p);
    PopulationLaw law;
    law.loadings.resize(p, 2);
    law.loadings.col(0) = psi1;
    law.loadings.col(1) = psi2;
    law.lambdas = Vector{{lambda1, lambda2}};
    law.sigma_z2 = sigma_z2();
    return law;
}

TrueModel SimulationScenario::truth() const
{
    return TrueModel{alpha(), beta(), law()};
}

std::pair<Vector, Vector> make_loadings(Index p)
{
    if (p < 2 || p % 2 != 0)
        throw InputError("loadings need an even p >= 2, got " + std::to_string(p));
    const double unit = 1.0 / std::sqrt(static_cast<double>(p));
    Vector psi1 = Vector::Constant(p, unit);
    Vector psi2 = Vector::Constant(p, unit);
    psi2.tail(p / 2).setConstant(-unit);
    return {std::move(psi1), std::move(psi2)};
}

std::uint64_t replication_seed(std::uint64_t base_seed, std::uint64_t rep_index)
{
    return splitmix64(splitmix64(base_seed) ^ splitmix64(rep_index + 0x632be59bd9b4e019ULL));
}

SimulatedData generate_dataset(const SimulationScenario& scenario, std::uint64_t seed)
{
    scenario.validate();
    const Index n = scenario.n;
    const Index p = scenario.p;
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal;

    // Row by row: xi_i1, xi_i2, Z_i1..Z_ip, eps_i.
    SimulatedData out;
    out.xi.resize(n, 2);
    out.eps.resize(n);
    Matrix z(n, p);
    for (Index i = 0; i < n; ++i) {
        out.xi(i, 0) = normal(rng);
        out.xi(i, 1) = normal(rng);
        for (Index j = 0; j < p; ++j)
            z(i, j) = normal(rng);
        out.eps(i) = normal(rng);
    }

    const auto [psi1, psi2] = make_loadings(p);
    const double dim = static_cast<double>(p);
    out.x = std::sqrt(dim * scenario.lambda1) * out.xi.col(0) * psi1.transpose()
            + std::sqrt(dim * scenario.lambda2) * out.xi.col(1) * psi2.transpose()
            + std::sqrt(scenario.sigma_z2()) * z;
    out.eps *= std::sqrt(scenario.sigma2_eps);
    out.y = scenario.alpha1 * out.xi.col(0) + scenario.alpha2 * out.xi.col(1) + out.x * scenario.beta() + out.eps;
    return out;
}

ReplicationResult run_replication(const SimulationScenario& scenario, std::uint64_t rep_index)
{
    const SimulatedData sample = generate_dataset(scenario, replication_seed(scenario.base_seed, rep_index));
    const DataMatrix data(sample.x);
    const Index n = scenario.n;
    const Index k_max = default_k_max(n, scenario.p);
    const TrueModel truth = scenario.truth();
    CovarianceSpectrum spectrum = covariance_spectrum(data, std::max(k_max, scenario.k_fit));
    orient_to_population(spectrum, *truth.law);

    ReplicationResult result;

    // Augmented model.
    const AugmentedDesign design = build_augmented_design(data, spectrum, scenario.k_fit);
    const AugmentedFit fit = fit_augmented(design, sample.y, scenario.grid);
    std::size_t best_est = 0;
    std::size_t best_pred = 0;
    double best_est_value = std::numeric_limits<double>::infinity();
    double best_pred_value = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < fit.estimates.size(); ++i) {
        const CoefficientEstimate& estimate = fit.estimates[i];
        const double alpha_err = alpha_distance(estimate.alpha, truth.alpha);
        const double beta_err = l1_distance(estimate.beta, truth.beta);
        if (alpha_err + beta_err < best_est_value) {
            best_est_value = alpha_err + beta_err;
            best_est = i;
            result.min_alpha_err = alpha_err;
            result.min_beta_err = beta_err;
        }
        const double pred = sample_prediction_error(truth.alpha, truth.beta, sample.xi, data, estimate, design.scores);
        if (pred < best_pred_value) {
            best_pred_value = pred;
            best_pred = i;
        }
    }
    result.rho_at_min_est = table_scale(fit.path.grid[best_est], n);
    result.min_sample_pred = best_pred_value;
    result.exact_pred_at_that_rho = exact_prediction_error(truth, fit.estimates[best_pred], spectrum);
    result.rho_at_min_pred = table_scale(fit.path.grid[best_pred], n);
    const CpReport cp = cp_statistic(fit.path, sample.y, scenario.sigma2_eps);
    result.rho_cp = table_scale(fit.path.grid[cp.argmin], n);

    result.k_hat = k_max >= 1 ? static_cast<double>(bai_ng_select(data, spectrum, k_max).k_hat) : 0.0;

    // Plain Lasso on X.
    const StandardFit baseline = fit_standard(data, sample.y, scenario.grid);
    const Vector beta_lr = population_beta_lr(truth);
    const FactorScores no_scores{Matrix(n, 0), 0, Vector()};
    result.baseline_min_beta_err = std::numeric_limits<double>::infinity();
    result.baseline_min_beta_lr_err = std::numeric_limits<double>::infinity();
    best_pred = 0;
    best_pred_value = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < baseline.estimates.size(); ++i) {
        const CoefficientEstimate& estimate = baseline.estimates[i];
        result.baseline_min_beta_err = std::min(result.baseline_min_beta_err, l1_distance(estimate.beta, truth.beta));
        result.baseline_min_beta_lr_err = std::min(result.baseline_min_beta_lr_err, l1_distance(estimate.beta, beta_lr));
        const double pred = sample_prediction_error(truth.alpha, truth.beta, sample.xi, data, estimate, no_scores);
        if (pred < best_pred_value) {
            best_pred_value = pred;
            best_pred = i;
        }
    }
    result.baseline_sample_pred = best_pred_value;
    result.baseline_exact_pred = exact_prediction_error(truth, baseline.estimates[best_pred], spectrum);
    result.baseline_rho_at_min_pred = table_scale(baseline.path.grid[best_pred], n);
    return result;
}

MonteCarloSummary summarize(const SimulationScenario& scenario, const std::vector<ReplicationResult>& results,
                            int dropped)
{
    MonteCarloSummary summary;
    summary.scenario = scenario;
    summary.completed = static_cast<int>(results.size());
    summary.dropped = dropped;
    if (results.empty())
        return summary;
    const double count = static_cast<double>(results.size());
    for (const auto& field : kReplicationMetrics) {
        double sum = 0.0;
        for (const auto& r : results)
            sum += r.*field.member;
        const double mean = sum / count;
        double squares = 0.0;
        for (const auto& r : results)
            squares += (r.*field.member - mean) * (r.*field.member - mean);
        summary.mean.*field.member = mean;
        summary.standard_error.*field.member = results.size() > 1 ? std::sqrt(squares / (count - 1.0) / count) : 0.0;
    }
    return summary;
}

MonteCarloSummary run_study(const SimulationScenario& scenario, int workers)
{
    scenario.validate();
    const std::size_t reps = static_cast<std::size_t>(scenario.reps);
    std::vector<std::optional<ReplicationResult>> slots(reps);
    std::vector<std::string> messages(reps);
    std::atomic<std::size_t> next{0};

    auto work = [&] {
        for (std::size_t i = next++; i < reps; i = next++) {
            try {
                slots[i] = run_replication(scenario, i);
            } catch (const Error& e) {
                messages[i] = "replication " + std::to_string(i) + ": " + e.what();
            }
        }
    };
    const int threads = std::clamp(workers, 1, static_cast<int>(reps));
    if (threads == 1) {
        work();
    } else {
        std::vector<std::jthread> pool;
        pool.reserve(static_cast<std::size_t>(threads));
        for (int t = 0; t < threads; ++t)
            pool.emplace_back(work);
    }

    std::vector<ReplicationResult> results;
    std::vector<std::string> failures;
    results.reserve(reps);
    for (std::size_t i = 0; i < reps; ++i) {
        if (slots[i])
            results.push_back(*slots[i]);
        else if (failures.size() < kKeptFailureMessages)
            failures.push_back(messages[i]);
    }
    const int dropped = static_cast<int>(reps - results.size());
    if (results.empty())
        throw NumericalError("all " + std::to_string(reps) + " replications failed; first: " + failures.front());
    MonteCarloSummary summary = summarize(scenario, results, dropped);
    summary.failures = std::move(failures);
    return summary;
}

namespace {

struct TableRow
{
    std::string model;
    const MonteCarloSummary* summary;
    std::vector<std::optional<double>> values;
};

const std::vector<std::string>& table_header()
{
    static const std::vector<std::string> header{
        "model", "n", "p", "lambda1", "lambda2", "alpha1", "alpha2", "reps", "dropped",
        "sum_abs_alpha_err", "sum_abs_beta_lr_err", "sum_abs_beta_err", "opt_rho_est_table",
        "sample_pred", "exact_pred", "opt_rho_pred_table", "cp_rho_table", "k_hat"};
    return header;
}

std::vector<TableRow> table_rows(const std::vector<MonteCarloSummary>& summaries)
{
    std::vector<TableRow> rows;
    for (const auto& s : summaries) {
        const ReplicationResult& m = s.mean;
        rows.push_back({"augmented", &s,
                        {m.min_alpha_err, std::nullopt, m.min_beta_err, m.rho_at_min_est, m.min_sample_pred,
                         m.exact_pred_at_that_rho, m.rho_at_min_pred, m.rho_cp, m.k_hat}});
    }
    for (const auto& s : summaries) {
        const ReplicationResult& m = s.mean;
        rows.push_back({"standard", &s,
                        {std::nullopt, m.baseline_min_beta_lr_err, m.baseline_min_beta_err, std::nullopt,
                         m.baseline_sample_pred, m.baseline_exact_pred, m.baseline_rho_at_min_pred, std::nullopt,
                         std::nullopt}});
    }
    return rows;
}

/// precision 0 selects the shortest representation that round-trips.
std::string format_number(double value, int precision)
{
    if (precision == 0) {
        char buffer[32];
        const auto result = std::to_chars(buffer, buffer + sizeof buffer, value);
        return std::string(buffer, result.ptr);
    }
    std::ostringstream out;
    out << std::setprecision(precision) << value;
    return out.str();
}

std::vector<std::string> render_row(const TableRow& row, int precision)
{
    const SimulationScenario& sc = row.summary->scenario;
    std::vector<std::string> cells{row.model,
                                   std::to_string(sc.n),
                                   std::to_string(sc.p),
                                   format_number(sc.lambda1, precision),
                                   format_number(sc.lambda2, precision),
                                   format_number(sc.alpha1, precision),
                                   format_number(sc.alpha2, precision),
                                   std::to_string(row.summary->completed + row.summary->dropped),
                                   std::to_string(row.summary->dropped)};
    for (const auto& value : row.values)
        cells.push_back(value ? format_number(*value, precision) : std::string());
    return cells;
}

} // namespace

std::string emit_table(const std::vector<MonteCarloSummary>& summaries, TableFormat format)
{
    if (summaries.empty())
        throw InputError("no summaries to tabulate");
    const auto rows = table_rows(summaries);
    if (format == TableFormat::csv) {
        std::vector<std::vector<std::string>> records{table_header()};
        for (const auto& row : rows)
            records.push_back(render_row(row, 0));
        return write_csv(records);
    }

    std::vector<std::vector<std::string>> cells{table_header()};
    for (const auto& row : rows)
        cells.push_back(render_row(row, 4));
    std::vector<std::size_t> widths(table_header().size(), 0);
    for (const auto& line : cells)
        for (std::size_t c = 0; c < line.size(); ++c)
            widths[c] = std::max(widths[c], line[c].size());
    std::ostringstream out;
    for (const auto& line : cells) {
        for (std::size_t c = 0; c < line.size(); ++c) {
            if (c > 0)
                out << "  ";
            out << std::setw(static_cast<int>(widths[c])) << (line[c].empty() ? "-" : line[c]);
        }
        out << '\n';
    }
    return out.str();
}

std::string emit_table(const std::vector<MonteCarloSummary>& summaries, const std::string& format)
{
    if (format == "csv")
        return emit_table(summaries, TableFormat::csv);
    if (format == "text")
        return emit_table(summaries, TableFormat::text);
    throw InputError("unknown table format '" + format + "' (expected csv or text)");
}

} // namespace factorlasso
