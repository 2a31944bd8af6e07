#pragma once

#include <vector>

#include "factorlasso/types.hpp"

namespace factorlasso {

/// Observations in rows. Optionally column-centered at construction.
class DataMatrix
{
public:
    /// Throws InputError unless n >= 2, p >= 1 and every entry is finite.
    explicit DataMatrix(Matrix values, bool center = false);

    const Matrix& values() const noexcept { return values_; }
    bool centered() const noexcept { return centered_; }
    Index n() const noexcept { return values_.rows(); }
    Index p() const noexcept { return values_.cols(); }

private:
    Matrix values_;
    bool centered_;
};

/// Eigenstructure of (1/p) * S for a p x p covariance S.
///
/// Eigenvalues are sorted non-increasing and clamped at zero when rounding
/// leaves them in (-1e-10, 0). Eigenvectors are the leading columns (as many
/// as were requested) and each has its largest-magnitude entry positive.
struct CovarianceSpectrum
{
    Index p = 0;
    Vector eigenvalues;   ///< all p eigenvalues
    Matrix eigenvectors;  ///< p x k_stored, column r is psi_r

    Index stored() const noexcept { return eigenvectors.cols(); }
};

struct FactorScores
{
    Matrix scores;       ///< n x k
    Index k = 0;
    Vector lambda_used;  ///< leading k eigenvalues
};

struct ProjectionResult
{
    Matrix projected;     ///< rows are P_k X_i
    Vector col_norms;     ///< s_j
    Matrix standardized;  ///< projected with column j divided by s_j
};

struct FactorCountSelection
{
    Index k_hat = 0;
    double sigma2 = 0.0;
    std::vector<double> criterion;  ///< criterion[kappa - 1] for kappa = 1..k_max
};

/// (1/n) * sum_i X_i X_i^T.
Matrix empirical_covariance(const DataMatrix& data);

/// Full symmetric eigendecomposition of S / p, keeping the leading k_max eigenvectors.
/// Throws InputError when S is not symmetric (1e-12 relative) or k_max > p,
/// NumericalError when the eigensolver fails to converge.
CovarianceSpectrum eigendecompose_scaled(const Matrix& covariance, Index k_max);

/// Convenience: eigendecompose_scaled(empirical_covariance(data), k_max).
CovarianceSpectrum covariance_spectrum(const DataMatrix& data, Index k_max);

/// xi_ir = psi_r^T X_i / sqrt(p lambda_r) for r < k.
/// Throws DegenerateFactorError when lambda_k <= 1e-12 * max(1, lambda_1).
FactorScores factor_scores(const DataMatrix& data, const CovarianceSpectrum& spectrum, Index k);

/// Removes the span of the leading k eigenvectors from every row and rescales
/// columns to unit empirical second moment. k = 0 leaves the data unprojected.
/// Throws DegenerateColumnError listing every j with s_j <= 1e-12.
ProjectionResult project_standardize(const DataMatrix& data, const CovarianceSpectrum& spectrum, Index k);

/// Mean squared residual after removing `components` principal components.
double residual_variance(const DataMatrix& data, const CovarianceSpectrum& spectrum, Index components);

/// Noise-level estimate for the factor-count criterion: residual variance at k_max.
double bai_ng_sigma2(const DataMatrix& data, const CovarianceSpectrum& spectrum, Index k_max);

/// Minimises V(kappa) + kappa * sigma2 * ((n + p) / (n p)) * log(min(n, p)) over kappa = 1..k_max.
/// Ties (within 1e-12 of the mean data second moment) go to the smaller kappa.
FactorCountSelection bai_ng_select(const DataMatrix& data, const CovarianceSpectrum& spectrum, Index k_max);

/// min(8, n - 1, p - 1)
Index default_k_max(Index n, Index p);

} // namespace factorlasso
