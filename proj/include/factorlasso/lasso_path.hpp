#pragma once

#include <cstddef>
#include <functional>
#include <optional>
#include <variant>
#include <vector>

#include "factorlasso/types.hpp"

namespace factorlasso {

// Objective convention throughout:
//     (1/n) ||y - D theta||_2^2 + 2 rho ||theta||_1
// with columns of D normalised to (1/n) sum_i d_ij^2 = 1.

/// Non-owning view of one penalised least-squares problem.
struct LassoProblem
{
    const Matrix& design;
    const Vector& response;
    double penalty = 0.0;
};

struct SolverOptions
{
    double tolerance = 1e-8;  ///< max coordinate change relative to max(1, ||theta||_inf)
    int max_sweeps = 10000;
    double kkt_tolerance = 1e-6;
    /// Called after every sweep with the sweep count and current iterate.
    std::function<void(int, const Vector&)> on_sweep;
};

struct LassoSolution
{
    Vector coefficients;
    int sweeps = 0;
};

/// Explicit penalties, strictly descending and non-negative.
struct ExplicitGrid
{
    std::vector<double> penalties;
};

/// `points` values from rho_max geometrically down to ratio * rho_max.
struct GeometricGrid
{
    int points = 100;
    double ratio = 1e-3;
};

using GridSpec = std::variant<ExplicitGrid, GeometricGrid>;

struct PathOptions
{
    SolverOptions solver;
    /// When false a non-converged point is recorded (converged = false) and the
    /// path continues from its last iterate instead of throwing.
    bool stop_on_failure = true;
};

struct LassoPath
{
    std::vector<double> grid;
    std::vector<Vector> coefficients;
    std::vector<int> n_active;
    std::vector<bool> converged;
    std::vector<int> sweeps;
    std::vector<double> residual_ss;

    std::size_t size() const noexcept { return grid.size(); }
};

struct CpReport
{
    std::vector<double> cp;  ///< NaN at non-converged points
    double sigma2_used = 0.0;
    std::size_t argmin = 0;
};

/// Throws InputError on shape mismatch, non-finite entries or columns whose
/// empirical second moment differs from 1 by more than 1e-8.
void validate(const LassoProblem& problem);

/// Smallest penalty whose solution is the zero vector: (1/n) max_j |D_j^T y|.
double rho_max(const Matrix& design, const Vector& response);

double lasso_objective(const LassoProblem& problem, const Vector& coefficients);

/// Largest violation of the subgradient optimality conditions at `coefficients`.
double kkt_violation(const LassoProblem& problem, const Vector& coefficients);

/// Cyclic coordinate descent with an active-set inner loop.
/// Throws NonConvergenceError (carrying the last iterate) past max_sweeps.
LassoSolution lasso_fit(const LassoProblem& problem, const std::optional<Vector>& warm_start = std::nullopt,
                        const SolverOptions& options = {});

std::vector<double> make_grid(const GridSpec& spec, double rho_max_value);

/// Warm-started path along the grid.
LassoPath lasso_path(const Matrix& design, const Vector& response, const GridSpec& spec,
                     const PathOptions& options = {});

/// Cp = RSS / sigma2 - n + 2 df with df the number of non-zero coefficients.
CpReport cp_statistic(const LassoPath& path, const Vector& response, double sigma2);

/// Penalty on the scale used by LARS-style tables: n * rho / 2.
inline double table_scale(double rho, Index n)
{
    return static_cast<double>(n) * rho / 2.0;
}

} // namespace factorlasso
