#include "factorlasso/covariance_factors.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "factorlasso/errors.hpp"

namespace factorlasso {

namespace {

constexpr double kClampThreshold = 1e-10;
constexpr double kSymmetryTolerance = 1e-12;
constexpr double kDegenerateEigenvalue = 1e-12;
constexpr double kDegenerateColumn = 1e-12;
constexpr double kTieTolerance = 1e-12;

void normalize_sign(Eigen::Ref<Vector> v)
{
    Index arg = 0;
    double best = -1.0;
    for (Index j = 0; j < v.size(); ++j) {
        // strict comparison keeps the lowest index on ties
        if (std::abs(v(j)) > best) {
            best = std::abs(v(j));
            arg = j;
        }
    }
    if (v(arg) < 0.0)
        v = -v;
}

void check_spectrum_covers(const CovarianceSpectrum& spectrum, const DataMatrix& data, Index k)
{
    if (spectrum.p != data.p())
        throw InputError("spectrum dimension " + std::to_string(spectrum.p) + " does not match data with p = "
                         + std::to_string(data.p()));
    if (k < 0 || k > spectrum.stored())
        throw InputError("requested " + std::to_string(k) + " components but the spectrum stores "
                         + std::to_string(spectrum.stored()));
}

} // namespace

DataMatrix::DataMatrix(Matrix values, bool center) : values_(std::move(values)), centered_(center)
{
    if (values_.rows() < 2)
        throw InputError("data matrix needs at least 2 observations, got " + std::to_string(values_.rows()));
    if (values_.cols() < 1)
        throw InputError("data matrix needs at least 1 column");
    if (!values_.allFinite())
        throw InputError("data matrix contains non-finite entries");
    if (centered_)
        values_.rowwise() -= values_.colwise().mean();
}

Matrix empirical_covariance(const DataMatrix& data)
{
    const Matrix& x = data.values();
    Matrix s = Matrix::Zero(x.cols(), x.cols());
    s.selfadjointView<Eigen::Lower>().rankUpdate(x.transpose());
    s = s.selfadjointView<Eigen::Lower>();
    return s / static_cast<double>(x.rows());
}

CovarianceSpectrum eigendecompose_scaled(const Matrix& covariance, Index k_max)
{
    const Index p = covariance.rows();
    if (p < 1 || covariance.cols() != p)
        throw InputError("covariance must be a non-empty square matrix");
    if (k_max < 0 || k_max > p)
        throw InputError("k_max = " + std::to_string(k_max) + " must lie in [0, p = " + std::to_string(p) + "]");
    if (!covariance.allFinite())
        throw InputError("covariance contains non-finite entries");
    const double scale = std::max(1.0, covariance.cwiseAbs().maxCoeff());
    if ((covariance - covariance.transpose()).cwiseAbs().maxCoeff() > kSymmetryTolerance * scale)
        throw InputError("covariance matrix is not symmetric");

    const Matrix scaled = covariance / static_cast<double>(p);
    Eigen::SelfAdjointEigenSolver<Matrix> solver(scaled, Eigen::ComputeEigenvectors);
    if (solver.info() != Eigen::Success)
        throw NumericalError("symmetric eigensolver did not converge");

    // Eigen returns ascending order.
    CovarianceSpectrum spectrum;
    spectrum.p = p;
    spectrum.eigenvalues = solver.eigenvalues().reverse();
    for (Index r = 0; r < p; ++r) {
        double& value = spectrum.eigenvalues(r);
        if (value < 0.0 && value > -kClampThreshold)
            value = 0.0;
    }
    spectrum.eigenvectors.resize(p, k_max);
    for (Index r = 0; r < k_max; ++r) {
        spectrum.eigenvectors.col(r) = solver.eigenvectors().col(p - 1 - r);
        normalize_sign(spectrum.eigenvectors.col(r));
    }
    return spectrum;
}

CovarianceSpectrum covariance_spectrum(const DataMatrix& data, Index k_max)
{
    return eigendecompose_scaled(empirical_covariance(data), k_max);
}

FactorScores factor_scores(const DataMatrix& data, const CovarianceSpectrum& spectrum, Index k)
{
    if (k < 1)
        throw InputError("factor count must be at least 1");
    check_spectrum_covers(spectrum, data, k);
    const double floor = kDegenerateEigenvalue * std::max(1.0, spectrum.eigenvalues(0));
    if (!(spectrum.eigenvalues(k - 1) > floor))
        throw DegenerateFactorError(k, spectrum.eigenvalues(k - 1));

    const double p = static_cast<double>(data.p());
    FactorScores out;
    out.k = k;
    out.lambda_used = spectrum.eigenvalues.head(k);
    out.scores = data.values() * spectrum.eigenvectors.leftCols(k);
    for (Index r = 0; r < k; ++r)
        out.scores.col(r) /= std::sqrt(p * out.lambda_used(r));
    return out;
}

ProjectionResult project_standardize(const DataMatrix& data, const CovarianceSpectrum& spectrum, Index k)
{
    check_spectrum_covers(spectrum, data, k);
    ProjectionResult out;
    if (k == 0) {
        out.projected = data.values();
    } else {
        const auto basis = spectrum.eigenvectors.leftCols(k);
        out.projected = data.values() - (data.values() * basis) * basis.transpose();
    }
    const double n = static_cast<double>(data.n());
    out.col_norms = (out.projected.colwise().squaredNorm() / n).cwiseSqrt().transpose();

    std::vector<Index> degenerate;
    for (Index j = 0; j < out.col_norms.size(); ++j)
        if (!(out.col_norms(j) > kDegenerateColumn))
            degenerate.push_back(j);
    if (!degenerate.empty())
        throw DegenerateColumnError(std::move(degenerate));

    out.standardized = out.projected * out.col_norms.cwiseInverse().asDiagonal();
    return out;
}

double residual_variance(const DataMatrix& data, const CovarianceSpectrum& spectrum, Index components)
{
    check_spectrum_covers(spectrum, data, components);
    const Matrix& x = data.values();
    const double np = static_cast<double>(x.rows()) * static_cast<double>(x.cols());
    if (components == 0)
        return x.squaredNorm() / np;
    const auto basis = spectrum.eigenvectors.leftCols(components);
    const Matrix residual = x - (x * basis) * basis.transpose();
    return residual.squaredNorm() / np;
}

double bai_ng_sigma2(const DataMatrix& data, const CovarianceSpectrum& spectrum, Index k_max)
{
    if (k_max > std::min(data.n(), data.p()) - 1)
        throw InputError("k_max = " + std::to_string(k_max) + " exceeds min(n, p) - 1");
    return residual_variance(data, spectrum, k_max);
}

FactorCountSelection bai_ng_select(const DataMatrix& data, const CovarianceSpectrum& spectrum, Index k_max)
{
    if (k_max < 1)
        throw InputError("k_max must be at least 1");
    FactorCountSelection out;
    out.sigma2 = bai_ng_sigma2(data, spectrum, k_max);

    const double n = static_cast<double>(data.n());
    const double p = static_cast<double>(data.p());
    const double penalty_unit = out.sigma2 * ((n + p) / (n * p)) * std::log(std::min(n, p));

    out.criterion.reserve(static_cast<std::size_t>(k_max));
    for (Index kappa = 1; kappa <= k_max; ++kappa)
        out.criterion.push_back(residual_variance(data, spectrum, kappa) + static_cast<double>(kappa) * penalty_unit);

    const double tie = kTieTolerance * data.values().squaredNorm() / (n * p);
    const double best = *std::min_element(out.criterion.begin(), out.criterion.end());
    for (std::size_t i = 0; i < out.criterion.size(); ++i) {
        if (out.criterion[i] <= best + tie) {
            out.k_hat = static_cast<Index>(i) + 1;
            break;
        }
    }
    return out;
}

Index default_k_max(Index n, Index p)
{
    return std::max<Index>(0, std::min<Index>({8, n - 1, p - 1}));
}

} // namespace factorlasso
