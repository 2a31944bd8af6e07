#include "factorlasso/augmented_regression.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <string>

#include "factorlasso/errors.hpp"

namespace factorlasso {

namespace {

CovarianceSpectrum empty_spectrum(Index p)
{
    CovarianceSpectrum spectrum;
    spectrum.p = p;
    spectrum.eigenvectors.resize(p, 0);
    return spectrum;
}

void check_law(const PopulationLaw& law)
{
    if (law.loadings.cols() != law.lambdas.size())
        throw InputError("population law: loadings and lambdas disagree on the factor count");
    if (!(law.sigma_z2 >= 0.0))
        throw InputError("population law: idiosyncratic variance must be non-negative");
}

} // namespace

Vector PopulationLaw::covariance_times(const Vector& v) const
{
    const double dim = static_cast<double>(p());
    Vector out = sigma_z2 * v;
    for (Index r = 0; r < lambdas.size(); ++r)
        out.noalias() += (dim * lambdas(r) * loadings.col(r).dot(v)) * loadings.col(r);
    return out;
}

Matrix PopulationLaw::covariance() const
{
    const double dim = static_cast<double>(p());
    Matrix cov = sigma_z2 * Matrix::Identity(p(), p());
    for (Index r = 0; r < lambdas.size(); ++r)
        cov.noalias() += dim * lambdas(r) * loadings.col(r) * loadings.col(r).transpose();
    return cov;
}

AugmentedDesign build_augmented_design(const DataMatrix& data, Index k)
{
    return build_augmented_design(data, covariance_spectrum(data, k), k);
}

AugmentedDesign build_augmented_design(const DataMatrix& data, const CovarianceSpectrum& spectrum, Index k)
{
    if (k < 1)
        throw InputError("augmented design needs k >= 1");
    AugmentedDesign design;
    design.k = k;
    design.p = data.p();
    design.scores = factor_scores(data, spectrum, k);
    ProjectionResult projection = project_standardize(data, spectrum, k);
    design.col_norms = std::move(projection.col_norms);

    design.phi.resize(data.n(), k + data.p());
    design.phi.leftCols(k) = design.scores.scores;
    design.phi.rightCols(data.p()) = projection.standardized;

    design.spectrum.p = spectrum.p;
    design.spectrum.eigenvalues = spectrum.eigenvalues;
    design.spectrum.eigenvectors = spectrum.eigenvectors.leftCols(k);
    return design;
}

CoefficientEstimate back_transform(const Vector& tilde_theta, const AugmentedDesign& design, double rho)
{
    if (tilde_theta.size() != design.k + design.p)
        throw InputError("coefficient vector has length " + std::to_string(tilde_theta.size()) + ", expected "
                         + std::to_string(design.k + design.p));
    CoefficientEstimate estimate;
    estimate.rho = rho;
    estimate.tilde_theta = tilde_theta;
    estimate.beta = tilde_theta.tail(design.p).cwiseQuotient(design.col_norms);
    estimate.alpha = tilde_theta.head(design.k);
    const double p = static_cast<double>(design.p);
    for (Index r = 0; r < design.k; ++r)
        estimate.alpha(r) -= std::sqrt(p * design.spectrum.eigenvalues(r))
                             * design.spectrum.eigenvectors.col(r).dot(estimate.beta);
    return estimate;
}

AugmentedFit fit_augmented(const AugmentedDesign& design, const Vector& response, const GridSpec& grid,
                           const PathOptions& options)
{
    if (response.size() != design.phi.rows())
        throw InputError("response length does not match the design");
    AugmentedFit fit;
    fit.path = lasso_path(design.phi, response, grid, options);
    fit.estimates.reserve(fit.path.size());
    for (std::size_t i = 0; i < fit.path.size(); ++i)
        fit.estimates.push_back(back_transform(fit.path.coefficients[i], design, fit.path.grid[i]));
    return fit;
}

StandardFit fit_standard(const DataMatrix& data, const Vector& response, const GridSpec& grid,
                         const PathOptions& options)
{
    if (response.size() != data.n())
        throw InputError("response length does not match the data");
    ProjectionResult standardized = project_standardize(data, empty_spectrum(data.p()), 0);
    StandardFit fit;
    fit.col_norms = std::move(standardized.col_norms);
    fit.path = lasso_path(standardized.standardized, response, grid, options);
    fit.estimates.reserve(fit.path.size());
    for (std::size_t i = 0; i < fit.path.size(); ++i) {
        CoefficientEstimate estimate;
        estimate.rho = fit.path.grid[i];
        estimate.tilde_theta = fit.path.coefficients[i];
        estimate.alpha.resize(0);
        estimate.beta = fit.path.coefficients[i].cwiseQuotient(fit.col_norms);
        fit.estimates.push_back(std::move(estimate));
    }
    return fit;
}

double sample_prediction_error(const Vector& true_alpha, const Vector& true_beta, const Matrix& true_xi,
                               const DataMatrix& data, const CoefficientEstimate& estimate,
                               const FactorScores& scores)
{
    const Matrix& x = data.values();
    if (true_beta.size() != x.cols() || estimate.beta.size() != x.cols())
        throw InputError("coefficient length does not match the data");
    if (true_xi.rows() != x.rows() || true_xi.cols() != true_alpha.size())
        throw InputError("true factors have the wrong shape");
    if (scores.scores.cols() != estimate.alpha.size() || (estimate.alpha.size() > 0 && scores.scores.rows() != x.rows()))
        throw InputError("estimated scores do not match the estimate");

    Vector diff = x * (true_beta - estimate.beta);
    if (true_alpha.size() > 0)
        diff.noalias() += true_xi * true_alpha;
    if (estimate.alpha.size() > 0)
        diff.noalias() -= scores.scores * estimate.alpha;
    return diff.squaredNorm() / static_cast<double>(x.rows());
}

double exact_prediction_error(const TrueModel& truth, const CoefficientEstimate& estimate,
                              const CovarianceSpectrum& spectrum)
{
    if (!truth.law)
        throw UnsupportedInputError("exact prediction error needs the population law of X");
    const PopulationLaw& law = *truth.law;
    check_law(law);
    const Index p = law.p();
    const Index k = estimate.alpha.size();
    if (truth.alpha.size() != law.lambdas.size())
        throw InputError("true alpha length does not match the number of population factors");
    if (truth.beta.size() != p || estimate.beta.size() != p)
        throw InputError("coefficient length does not match the population dimension");
    if (k > 0 && (spectrum.p != p || spectrum.stored() < k))
        throw InputError("spectrum does not provide the estimated factor directions");

    // Discrepancy d = alpha^T xi + w^T X on a fresh draw.
    const double dim = static_cast<double>(p);
    Vector w = truth.beta - estimate.beta;
    for (Index r = 0; r < k; ++r)
        w.noalias() -= (estimate.alpha(r) / std::sqrt(dim * spectrum.eigenvalues(r))) * spectrum.eigenvectors.col(r);

    double error = truth.alpha.squaredNorm() + w.dot(law.covariance_times(w));
    for (Index r = 0; r < truth.alpha.size(); ++r)
        error += 2.0 * truth.alpha(r) * std::sqrt(dim * law.lambdas(r)) * law.loadings.col(r).dot(w);
    return std::max(0.0, error);
}

Vector population_beta_lr(const TrueModel& truth)
{
    if (!truth.law)
        throw UnsupportedInputError("beta_LR needs the population law of X");
    const PopulationLaw& law = *truth.law;
    check_law(law);
    if (truth.alpha.size() != law.lambdas.size() || truth.beta.size() != law.p())
        throw InputError("true coefficients do not match the population law");
    const double dim = static_cast<double>(law.p());
    Vector beta_lr = truth.beta;
    for (Index r = 0; r < law.lambdas.size(); ++r) {
        const double mu = law.lambdas(r) + law.sigma_z2 / dim;
        beta_lr.noalias() += (truth.alpha(r) / std::sqrt(dim * mu)) * law.loadings.col(r);
    }
    return beta_lr;
}

double re_constant_estimate(const Matrix& phi, const RestrictedEigenvalueOptions& options)
{
    const Index m = phi.cols();
    const Index s = options.support_size;
    if (s < 1 || 2 * s > m)
        throw InputError("support size must lie in [1, m / 2]");
    if (options.budget < 1)
        throw InputError("budget must be at least 1");
    if (!(options.cone >= 0.0))
        throw InputError("cone constant must be non-negative");

    const Matrix gram = phi.transpose() * phi / static_cast<double>(phi.rows());
    std::mt19937_64 rng(options.seed);
    std::normal_distribution<double> normal;
    std::uniform_real_distribution<double> uniform;

    std::vector<Index> order(static_cast<std::size_t>(m));
    Vector delta(m);
    auto ratio = [&](double support_norm) {
        std::vector<Index> nz;
        for (Index j = 0; j < m; ++j)
            if (delta(j) != 0.0)
                nz.push_back(j);
        double quad = 0.0;
        for (Index a : nz)
            for (Index b : nz)
                quad += delta(a) * gram(a, b) * delta(b);
        return std::sqrt(std::max(0.0, quad)) / support_norm;
    };

    double best = std::numeric_limits<double>::infinity();
    for (std::int64_t sample = 0; sample < options.budget; ++sample) {
        std::iota(order.begin(), order.end(), Index{0});
        const Index support = 1 + static_cast<Index>(uniform(rng) * static_cast<double>(s)) % s;
        // partial Fisher-Yates: order[0, support) is J0, the rest its complement
        for (Index i = 0; i < support; ++i) {
            const Index pick = i + static_cast<Index>(uniform(rng) * static_cast<double>(m - i)) % (m - i);
            std::swap(order[static_cast<std::size_t>(i)], order[static_cast<std::size_t>(pick)]);
        }
        delta.setZero();
        for (Index i = 0; i < support; ++i)
            delta(order[static_cast<std::size_t>(i)]) = normal(rng);
        const double support_l1 = delta.lpNorm<1>();
        const double support_l2 = delta.norm();
        best = std::min(best, ratio(support_l2));

        // Complement mass: either a few coordinates or the whole complement.
        const Index rest = m - support;
        const bool sparse = uniform(rng) < 0.5;
        const Index count = sparse ? 1 + static_cast<Index>(uniform(rng) * static_cast<double>(support)) % support
                                   : rest;
        for (Index i = 0; i < count && sparse; ++i) {
            const Index from = support + i;
            const Index pick = from + static_cast<Index>(uniform(rng) * static_cast<double>(m - from)) % (m - from);
            std::swap(order[static_cast<std::size_t>(from)], order[static_cast<std::size_t>(pick)]);
        }
        double complement_l1 = 0.0;
        for (Index i = 0; i < count; ++i) {
            const double value = normal(rng);
            delta(order[static_cast<std::size_t>(support + i)]) = value;
            complement_l1 += std::abs(value);
        }
        if (complement_l1 == 0.0)
            continue;
        const double scale = uniform(rng) * options.cone * support_l1 / complement_l1;
        for (Index i = 0; i < count; ++i)
            delta(order[static_cast<std::size_t>(support + i)]) *= scale;
        best = std::min(best, ratio(support_l2));
    }
    return best;
}

} // namespace factorlasso
