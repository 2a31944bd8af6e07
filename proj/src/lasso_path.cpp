#include "factorlasso/lasso_path.hpp"

#include <algorithm>
#include <cassert>
#include <cmath>
#include <limits>
#include <string>

#include "factorlasso/errors.hpp"

namespace factorlasso {

namespace {

constexpr double kNormalizationTolerance = 1e-8;

double soft_threshold(double z, double threshold)
{
    if (z > threshold)
        return z - threshold;
    if (z < -threshold)
        return z + threshold;
    return 0.0;
}

double column_correlation(const Matrix& design, Index j, const Vector& v, double inv_n)
{
    return inv_n * design.col(j).dot(v);
}

int count_nonzero(const Vector& v)
{
    return static_cast<int>((v.array() != 0.0).count());
}

} // namespace

void validate(const LassoProblem& problem)
{
    const Matrix& d = problem.design;
    if (d.rows() < 1 || d.cols() < 1)
        throw InputError("design matrix is empty");
    if (problem.response.size() != d.rows())
        throw InputError("response length " + std::to_string(problem.response.size()) + " does not match "
                         + std::to_string(d.rows()) + " design rows");
    if (!(problem.penalty >= 0.0) || !std::isfinite(problem.penalty))
        throw InputError("penalty must be finite and non-negative");
    if (!d.allFinite() || !problem.response.allFinite())
        throw InputError("lasso problem contains non-finite values");
    const double n = static_cast<double>(d.rows());
    for (Index j = 0; j < d.cols(); ++j) {
        const double second_moment = d.col(j).squaredNorm() / n;
        if (std::abs(second_moment - 1.0) > kNormalizationTolerance)
            throw InputError("design column " + std::to_string(j) + " has empirical second moment "
                             + std::to_string(second_moment) + ", expected 1");
    }
}

double rho_max(const Matrix& design, const Vector& response)
{
    const double inv_n = 1.0 / static_cast<double>(design.rows());
    double best = 0.0;
    for (Index j = 0; j < design.cols(); ++j)
        best = std::max(best, std::abs(column_correlation(design, j, response, inv_n)));
    return best;
}

double lasso_objective(const LassoProblem& problem, const Vector& coefficients)
{
    const double n = static_cast<double>(problem.design.rows());
    return (problem.response - problem.design * coefficients).squaredNorm() / n
           + 2.0 * problem.penalty * coefficients.lpNorm<1>();
}

double kkt_violation(const LassoProblem& problem, const Vector& coefficients)
{
    const double inv_n = 1.0 / static_cast<double>(problem.design.rows());
    const Vector residual = problem.response - problem.design * coefficients;
    double worst = 0.0;
    for (Index j = 0; j < coefficients.size(); ++j) {
        const double g = column_correlation(problem.design, j, residual, inv_n);
        const double violation = coefficients(j) == 0.0
                                     ? std::max(0.0, std::abs(g) - problem.penalty)
                                     : std::abs(g - problem.penalty * (coefficients(j) > 0.0 ? 1.0 : -1.0));
        worst = std::max(worst, violation);
    }
    return worst;
}

namespace {

/// Quantities shared by every point of a path.
struct Precomputed
{
    Matrix gram;         ///< D^T D / n
    Vector correlation;  ///< D^T y / n
};

Precomputed precompute(const Matrix& design, const Vector& response)
{
    const double inv_n = 1.0 / static_cast<double>(design.rows());
    Precomputed out;
    out.gram = Matrix::Zero(design.cols(), design.cols());
    out.gram.selfadjointView<Eigen::Lower>().rankUpdate(design.transpose(), inv_n);
    out.gram = out.gram.selfadjointView<Eigen::Lower>();
    out.correlation = inv_n * (design.transpose() * response);
    return out;
}

/// Minimises the objective on the current orthant face (active set and signs
/// held fixed) and steps from `theta` towards that minimiser, stopping at the
/// first coordinate that would change sign. The objective is a convex
/// quadratic along the segment with its minimum at the far end, so any step
/// taken decreases it.
std::optional<Vector> face_step(const Vector& theta, double rho, const Precomputed& shared)
{
    std::vector<Index> active;
    for (Index j = 0; j < theta.size(); ++j)
        if (theta(j) != 0.0)
            active.push_back(j);
    if (active.empty())
        return std::nullopt;
    const Index a = static_cast<Index>(active.size());
    Matrix gram(a, a);
    Vector rhs(a);
    for (Index u = 0; u < a; ++u) {
        const Index ju = active[static_cast<std::size_t>(u)];
        rhs(u) = shared.correlation(ju) - rho * (theta(ju) > 0.0 ? 1.0 : -1.0);
        for (Index v = 0; v < a; ++v)
            gram(u, v) = shared.gram(ju, active[static_cast<std::size_t>(v)]);
    }
    Eigen::LDLT<Matrix> ldlt(gram);
    if (ldlt.info() != Eigen::Success || !ldlt.isPositive() || ldlt.vectorD().minCoeff() <= 0.0)
        return std::nullopt;
    const Vector target = ldlt.solve(rhs);
    if (!target.allFinite())
        return std::nullopt;

    double step = 1.0;
    Index blocking = -1;
    for (Index u = 0; u < a; ++u) {
        const double current = theta(active[static_cast<std::size_t>(u)]);
        if ((target(u) > 0.0) != (current > 0.0) || target(u) == 0.0) {
            const double crossing = current / (current - target(u));
            if (crossing < step) {
                step = crossing;
                blocking = u;
            }
        }
    }
    Vector candidate = Vector::Zero(theta.size());
    for (Index u = 0; u < a; ++u) {
        const Index ju = active[static_cast<std::size_t>(u)];
        const double moved = theta(ju) + step * (target(u) - theta(ju));
        // keep the sign pattern: anything that reached or crossed zero is dropped
        candidate(ju) = (u == blocking || (moved > 0.0) != (theta(ju) > 0.0)) ? 0.0 : moved;
    }
    return candidate;
}

constexpr int kActiveSweepsPerFaceSolve = 10;
constexpr int kActiveSweepsPerKktCheck = 100;

LassoSolution coordinate_descent(const LassoProblem& problem, const std::optional<Vector>& warm_start,
                                 const SolverOptions& options, const Precomputed* shared_in)
{
    const Matrix& d = problem.design;
    const Index m = d.cols();
    const double inv_n = 1.0 / static_cast<double>(d.rows());
    const double rho = problem.penalty;

    Vector theta = Vector::Zero(m);
    if (warm_start) {
        if (warm_start->size() != m)
            throw InputError("warm start has length " + std::to_string(warm_start->size()) + ", expected "
                             + std::to_string(m));
        theta = *warm_start;
    }
    Vector residual = problem.response - d * theta;

    std::optional<Precomputed> owned;
    auto shared = [&]() -> const Precomputed& {
        if (shared_in)
            return *shared_in;
        if (!owned)
            owned = precompute(d, problem.response);
        return *owned;
    };

    auto sweep = [&](bool active_only) {
        double max_change = 0.0;
        for (Index j = 0; j < m; ++j) {
            const double old = theta(j);
            if (active_only && old == 0.0)
                continue;
            const double updated = soft_threshold(old + column_correlation(d, j, residual, inv_n), rho);
            if (updated != old) {
                residual.noalias() -= (updated - old) * d.col(j);
                theta(j) = updated;
                max_change = std::max(max_change, std::abs(updated - old));
            }
        }
        return max_change;
    };
    auto threshold = [&] { return options.tolerance * std::max(1.0, theta.lpNorm<Eigen::Infinity>()); };

    [[maybe_unused]] double current_objective = lasso_objective(problem, theta);
    int sweeps = 0;
    auto after_sweep = [&] {
        ++sweeps;
#ifndef NDEBUG
        const double objective = lasso_objective(problem, theta);
        assert(objective <= current_objective + 1e-12 * std::max(1.0, std::abs(current_objective)));
        current_objective = objective;
#endif
        if (options.on_sweep)
            options.on_sweep(sweeps, theta);
    };
    auto try_face_solve = [&] {
        std::optional<Vector> candidate = face_step(theta, rho, shared());
        if (!candidate)
            return false;
        const double before = lasso_objective(problem, theta);
        const double after = lasso_objective(problem, *candidate);
        if (!(after <= before))
            return false;
        theta = std::move(*candidate);
        residual = problem.response - d * theta;
        current_objective = after;
        return true;
    };

    while (true) {
        if (sweeps >= options.max_sweeps)
            throw NonConvergenceError(theta, sweeps);
        const double change = sweep(false);
        after_sweep();
        if (change < threshold()) {
            // Refresh the residual to shed accumulated rounding before the KKT check.
            residual = problem.response - d * theta;
            if (kkt_violation(problem, theta) <= 0.1 * options.kkt_tolerance)
                return {std::move(theta), sweeps};
            continue;
        }
        int active_sweeps = 0;
        while (sweeps < options.max_sweeps) {
            const double active_change = sweep(true);
            after_sweep();
            if (active_change < threshold())
                break;
            ++active_sweeps;
            if (active_sweeps % kActiveSweepsPerFaceSolve == 0 && try_face_solve())
                break;
            // With more active columns than rank(D) the minimisers form a face and
            // the iterates can drift along it; stationarity is what matters then.
            if (active_sweeps % kActiveSweepsPerKktCheck == 0) {
                residual = problem.response - d * theta;
                if (kkt_violation(problem, theta) <= options.kkt_tolerance)
                    return {std::move(theta), sweeps};
            }
        }
    }
}

} // namespace

LassoSolution lasso_fit(const LassoProblem& problem, const std::optional<Vector>& warm_start,
                        const SolverOptions& options)
{
    validate(problem);
    return coordinate_descent(problem, warm_start, options, nullptr);
}

std::vector<double> make_grid(const GridSpec& spec, double rho_max_value)
{
    if (const auto* explicit_grid = std::get_if<ExplicitGrid>(&spec)) {
        const auto& values = explicit_grid->penalties;
        if (values.empty())
            throw InputError("explicit penalty grid is empty");
        for (std::size_t i = 0; i < values.size(); ++i) {
            if (!(values[i] >= 0.0) || !std::isfinite(values[i]))
                throw InputError("penalty grid entries must be finite and non-negative");
            if (i > 0 && !(values[i] < values[i - 1]))
                throw InputError("penalty grid must be strictly descending");
        }
        return values;
    }
    const auto& geometric = std::get<GeometricGrid>(spec);
    if (geometric.points < 1)
        throw InputError("grid needs at least one point");
    if (!(geometric.ratio > 0.0 && geometric.ratio < 1.0))
        throw InputError("grid ratio must lie in (0, 1)");
    if (!(rho_max_value > 0.0))
        throw InputError("rho_max is zero: the response is orthogonal to every column");
    std::vector<double> grid(static_cast<std::size_t>(geometric.points));
    grid[0] = rho_max_value;
    const double last = static_cast<double>(geometric.points - 1);
    for (int i = 1; i < geometric.points; ++i)
        grid[static_cast<std::size_t>(i)] = rho_max_value * std::pow(geometric.ratio, static_cast<double>(i) / last);
    return grid;
}

LassoPath lasso_path(const Matrix& design, const Vector& response, const GridSpec& spec, const PathOptions& options)
{
    validate(LassoProblem{design, response, 0.0});
    LassoPath path;
    path.grid = make_grid(spec, rho_max(design, response));

    const std::size_t points = path.grid.size();
    path.coefficients.reserve(points);
    path.n_active.reserve(points);
    path.converged.reserve(points);
    path.sweeps.reserve(points);
    path.residual_ss.reserve(points);

    const Precomputed shared = precompute(design, response);
    std::optional<Vector> warm;
    for (std::size_t i = 0; i < points; ++i) {
        const LassoProblem problem{design, response, path.grid[i]};
        Vector theta;
        int sweeps = 0;
        bool converged = true;
        try {
            LassoSolution solution = coordinate_descent(problem, warm, options.solver, &shared);
            theta = std::move(solution.coefficients);
            sweeps = solution.sweeps;
        } catch (const NonConvergenceError& error) {
            if (options.stop_on_failure)
                throw NonConvergenceError(error.last_iterate(), error.sweeps(), i);
            theta = error.last_iterate();
            sweeps = error.sweeps();
            converged = false;
        }
        path.n_active.push_back(count_nonzero(theta));
        path.converged.push_back(converged);
        path.sweeps.push_back(sweeps);
        path.residual_ss.push_back((response - design * theta).squaredNorm());
        warm = theta;
        path.coefficients.push_back(std::move(theta));
    }
    return path;
}

CpReport cp_statistic(const LassoPath& path, const Vector& response, double sigma2)
{
    if (!(sigma2 > 0.0) || !std::isfinite(sigma2))
        throw InputError("sigma2 must be positive");
    const double n = static_cast<double>(response.size());
    CpReport report;
    report.sigma2_used = sigma2;
    report.cp.assign(path.size(), std::numeric_limits<double>::quiet_NaN());
    bool any = false;
    for (std::size_t i = 0; i < path.size(); ++i) {
        if (!path.converged[i])
            continue;
        report.cp[i] = path.residual_ss[i] / sigma2 - n + 2.0 * static_cast<double>(path.n_active[i]);
        if (!any || report.cp[i] < report.cp[report.argmin]) {
            report.argmin = i;
            any = true;
        }
    }
    if (!any)
        throw NumericalError("Cp undefined: no converged grid points");
    return report;
}

} // namespace factorlasso
