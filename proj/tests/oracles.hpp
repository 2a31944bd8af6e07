#pragma once

// Brute-force reference computations used by the unit and acceptance tests.
// Each one is deliberately naive and shares no code with the library.

#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <vector>

#include <Eigen/Dense>

namespace oracle {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Index = Eigen::Index;

inline Matrix gaussian_matrix(Index rows, Index cols, std::mt19937_64& rng)
{
    std::normal_distribution<double> normal(0.0, 1.0);
    Matrix m(rows, cols);
    for (Index i = 0; i < rows; ++i)
        for (Index j = 0; j < cols; ++j)
            m(i, j) = normal(rng);
    return m;
}

/// Columns rescaled so that (1/n) sum_i d_ij^2 = 1.
inline Matrix unit_second_moment(Matrix d)
{
    const double n = static_cast<double>(d.rows());
    for (Index j = 0; j < d.cols(); ++j)
        d.col(j) /= std::sqrt(d.col(j).squaredNorm() / n);
    return d;
}

/// (1/n) sum_i X_i X_i^T with explicit loops.
inline Matrix covariance_double_loop(const Matrix& x)
{
    const Index n = x.rows();
    const Index p = x.cols();
    Matrix s = Matrix::Zero(p, p);
    for (Index a = 0; a < p; ++a)
        for (Index b = 0; b < p; ++b) {
            double sum = 0.0;
            for (Index i = 0; i < n; ++i)
                sum += x(i, a) * x(i, b);
            s(a, b) = sum / static_cast<double>(n);
        }
    return s;
}

inline double lasso_objective(const Matrix& d, const Vector& y, double rho, const Vector& theta)
{
    const double n = static_cast<double>(d.rows());
    return (y - d * theta).squaredNorm() / n + 2.0 * rho * theta.lpNorm<1>();
}

/// Global minimum of (1/n)||y - D theta||^2 + 2 rho ||theta||_1 by enumerating
/// all 3^m sign patterns. For each pattern the sign-constrained stationary point
/// (D_A^T D_A)^{-1} (D_A^T y - n rho s_A) is evaluated with the true objective;
/// the pattern of the optimum reproduces the optimum exactly, and every other
/// candidate is a feasible point, so the smallest value found is the minimum.
/// Requires every column subset to have full rank (n > m, generic data).
inline double lasso_minimum_by_enumeration(const Matrix& d, const Vector& y, double rho, Vector* argmin = nullptr)
{
    const Index m = d.cols();
    const double n = static_cast<double>(d.rows());
    Index patterns = 1;
    for (Index j = 0; j < m; ++j)
        patterns *= 3;
    double best = std::numeric_limits<double>::infinity();
    std::vector<int> sign(static_cast<std::size_t>(m));
    for (Index code = 0; code < patterns; ++code) {
        Index rest = code;
        std::vector<Index> active;
        for (Index j = 0; j < m; ++j) {
            sign[static_cast<std::size_t>(j)] = static_cast<int>(rest % 3) - 1;
            rest /= 3;
            if (sign[static_cast<std::size_t>(j)] != 0)
                active.push_back(j);
        }
        Vector theta = Vector::Zero(m);
        if (!active.empty()) {
            const Index a = static_cast<Index>(active.size());
            Matrix da(d.rows(), a);
            Vector sa(a);
            for (Index c = 0; c < a; ++c) {
                da.col(c) = d.col(active[static_cast<std::size_t>(c)]);
                sa(c) = sign[static_cast<std::size_t>(active[static_cast<std::size_t>(c)])];
            }
            const Vector rhs = da.transpose() * y - n * rho * sa;
            const Vector sol = (da.transpose() * da).fullPivLu().solve(rhs);
            for (Index c = 0; c < a; ++c)
                theta(active[static_cast<std::size_t>(c)]) = sol(c);
        }
        const double value = lasso_objective(d, y, rho, theta);
        if (value < best) {
            best = value;
            if (argmin)
                *argmin = theta;
        }
    }
    return best;
}

struct MonteCarloEstimate
{
    double mean = 0.0;
    double standard_error = 0.0;
};

/// Fresh draws X = sum_r sqrt(p lambda_r) xi_r psi_r + Z, Z ~ N(0, sigma_z2 I), and
/// the squared discrepancy (alpha^T xi + beta^T X - alpha_hat^T xi_hat - beta_hat^T X)^2
/// with xi_hat_r = psi_hat_r^T X / sqrt(p lambda_hat_r).
inline MonteCarloEstimate prediction_error_monte_carlo(const Matrix& loadings, const Vector& lambdas, double sigma_z2,
                                                      const Vector& alpha, const Vector& beta,
                                                      const Matrix& loadings_hat, const Vector& lambdas_hat,
                                                      const Vector& alpha_hat, const Vector& beta_hat,
                                                      std::int64_t draws, std::uint64_t seed)
{
    const Index p = loadings.rows();
    const Index k0 = loadings.cols();
    const Index k = loadings_hat.cols();
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    const double sz = std::sqrt(sigma_z2);
    const double pd = static_cast<double>(p);

    // Everything enters through a few inner products, so precompute them.
    const Vector beta_diff = beta - beta_hat;
    Matrix score_map(k, p);  // rows psi_hat_r^T / sqrt(p lambda_hat_r)
    for (Index r = 0; r < k; ++r)
        score_map.row(r) = loadings_hat.col(r).transpose() / std::sqrt(pd * lambdas_hat(r));

    double sum = 0.0, sum_sq = 0.0;
    Vector x(p), xi(k0);
    for (std::int64_t t = 0; t < draws; ++t) {
        for (Index r = 0; r < k0; ++r)
            xi(r) = normal(rng);
        for (Index j = 0; j < p; ++j)
            x(j) = sz * normal(rng);
        for (Index r = 0; r < k0; ++r)
            x += std::sqrt(pd * lambdas(r)) * xi(r) * loadings.col(r);
        double e = alpha.dot(xi) + beta_diff.dot(x);
        if (k > 0)
            e -= alpha_hat.dot(score_map * x);
        const double sq = e * e;
        sum += sq;
        sum_sq += sq * sq;
    }
    const double dn = static_cast<double>(draws);
    const double mean = sum / dn;
    const double var = std::max(0.0, (sum_sq / dn - mean * mean)) * dn / (dn - 1.0);
    return {mean, std::sqrt(var / dn)};
}

/// Sigma = Gamma + Psi with Gamma = p * sum_r lambda_r delta_r delta_r^T (rank k)
/// and Psi diagonal in [0, d2]. Lambdas are spaced so that every gap and the
/// smallest lambda are at least v, and d2 = p v / 8 keeps p v > 6 d2.
struct PerturbationInstance
{
    Index p = 0;
    Index k = 0;
    Matrix gamma;
    Vector lambdas;   ///< eigenvalues of gamma / p, decreasing
    Matrix loadings;  ///< p x k eigenvectors of gamma
    Vector psi_diag;
    double d2 = 0.0;  ///< max_j Psi_jj
    double v = 0.0;   ///< eigenvalue separation
};

inline PerturbationInstance make_perturbation_instance(Index p, Index k, std::uint64_t seed)
{
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    PerturbationInstance inst;
    inst.p = p;
    inst.k = k;
    const Matrix q = gaussian_matrix(p, k, rng).householderQr().householderQ() * Matrix::Identity(p, k);
    Vector lambdas(k);
    double level = 0.0;
    double v = std::numeric_limits<double>::infinity();
    for (Index r = k - 1; r >= 0; --r) {
        const double step = 0.1 + 0.4 * unit(rng);
        level += step;
        v = std::min(v, step);
        lambdas(r) = level;
    }
    inst.v = v;
    inst.lambdas = lambdas;
    inst.loadings = q;
    inst.gamma = Matrix::Zero(p, p);
    for (Index r = 0; r < k; ++r)
        inst.gamma += static_cast<double>(p) * lambdas(r) * q.col(r) * q.col(r).transpose();
    inst.d2 = static_cast<double>(p) * v / 8.0;
    inst.psi_diag.resize(p);
    for (Index j = 0; j < p; ++j)
        inst.psi_diag(j) = inst.d2 * unit(rng);
    inst.psi_diag(static_cast<Index>(unit(rng) * static_cast<double>(p)) % p) = inst.d2;
    return inst;
}

} // namespace oracle
