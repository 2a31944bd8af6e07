#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "factorlasso/covariance_factors.hpp"
#include "factorlasso/lasso_path.hpp"
#include "factorlasso/types.hpp"

namespace factorlasso {

/// Regression design [xi_hat | X_tilde] with everything needed to undo the projection.
struct AugmentedDesign
{
    Matrix phi;  ///< n x (k + p)
    Index k = 0;
    Index p = 0;
    Vector col_norms;  ///< s_j of the projected predictors
    CovarianceSpectrum spectrum;
    FactorScores scores;
};

/// Coefficients of the unprojected augmented model.
struct CoefficientEstimate
{
    Vector alpha;        ///< k factor coefficients (empty for plain regression)
    Vector beta;         ///< p predictor coefficients
    double rho = 0.0;
    Vector tilde_theta;  ///< raw solver coefficients
};

struct AugmentedFit
{
    LassoPath path;
    std::vector<CoefficientEstimate> estimates;
};

/// Plain Lasso on standardized X; `estimates` hold un-standardized beta.
struct StandardFit
{
    LassoPath path;
    Vector col_norms;
    std::vector<CoefficientEstimate> estimates;
};

/// Population law of a Gaussian approximate factor model with orthonormal loadings:
///   X = sum_r sqrt(p lambda_r) xi_r psi_r + Z,  Cov(Z) = sigma_z2 I,  xi ~ N(0, I).
struct PopulationLaw
{
    Matrix loadings;  ///< p x k0, orthonormal columns psi_r
    Vector lambdas;   ///< k0 factor variances on the (1/p) scale
    double sigma_z2 = 0.0;

    Index p() const noexcept { return loadings.rows(); }
    /// Cov(X) applied to v without forming the p x p matrix.
    Vector covariance_times(const Vector& v) const;
    Matrix covariance() const;
};

/// True regression coefficients plus (optionally) the law generating X.
struct TrueModel
{
    Vector alpha;
    Vector beta;
    std::optional<PopulationLaw> law;
};

AugmentedDesign build_augmented_design(const DataMatrix& data, Index k);
/// Reuses an existing spectrum (must store at least k eigenvectors).
AugmentedDesign build_augmented_design(const DataMatrix& data, const CovarianceSpectrum& spectrum, Index k);

/// beta_j = beta_tilde_j / s_j, alpha_r = alpha_tilde_r - sqrt(p lambda_r) sum_j psi_rj beta_j.
CoefficientEstimate back_transform(const Vector& tilde_theta, const AugmentedDesign& design, double rho = 0.0);

AugmentedFit fit_augmented(const AugmentedDesign& design, const Vector& response, const GridSpec& grid,
                           const PathOptions& options = {});

StandardFit fit_standard(const DataMatrix& data, const Vector& response, const GridSpec& grid,
                         const PathOptions& options = {});

/// (1/n) sum_i (alpha^T xi_i + beta^T X_i - alpha_hat^T xi_hat_i - beta_hat^T X_i)^2.
/// `scores` may have k = 0 when the estimate has no factor part.
double sample_prediction_error(const Vector& true_alpha, const Vector& true_beta, const Matrix& true_xi,
                               const DataMatrix& data, const CoefficientEstimate& estimate,
                               const FactorScores& scores);

/// Expected squared prediction error on a fresh draw from the population law, in closed form.
/// Factor scores of the new observation are formed with the estimated spectrum.
/// Throws UnsupportedInputError when `truth.law` is empty.
double exact_prediction_error(const TrueModel& truth, const CoefficientEstimate& estimate,
                              const CovarianceSpectrum& spectrum);

/// beta + sum_r alpha_r delta_r / sqrt(p mu_r) with (mu_r, delta_r) the eigenpairs of Cov(X)/p.
Vector population_beta_lr(const TrueModel& truth);

struct RestrictedEigenvalueOptions
{
    Index support_size = 1;
    double cone = 1.0;
    std::int64_t budget = 1000;
    std::uint64_t seed = 0;
};

/// Randomised search for min sqrt(D^T G D) / ||D_J||_2 over |J| <= s and
/// ||D_{J^c}||_1 <= c0 ||D_J||_1, G = Phi^T Phi / n. The result is the smallest
/// observed ratio, hence an upper bound on the restricted eigenvalue constant.
/// For a fixed seed a larger budget never increases the estimate.
double re_constant_estimate(const Matrix& phi, const RestrictedEigenvalueOptions& options);

} // namespace factorlasso
