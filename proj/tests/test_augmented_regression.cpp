#include <doctest.h>

#include <cmath>
#include <random>

#include <Eigen/Eigenvalues>

#include "factorlasso/augmented_regression.hpp"
#include "factorlasso/errors.hpp"
#include "factorlasso/simulation.hpp"
#include "oracles.hpp"

using namespace factorlasso;

namespace {

// 5 x 3 fixture; reference values from tests/fixtures/tiny_design.py (numpy).
Matrix tiny_x()
{
    Matrix x(5, 3);
    x << 2.0, 1.0, 0.0,
         1.0, 3.0, -1.0,
         0.0, -1.0, 2.0,
         -2.0, 0.5, 1.0,
         1.5, -2.0, -1.0;
    return x;
}

Matrix tiny_phi_reference()
{
    Matrix phi(5, 4);
    phi << 0.9177009402619456, 0.99191553833030999, -0.38349162340231824, 0.73099019807437349,
           1.7583923624202944, -0.36142464261168911, 0.43082108930813245, 0.32013495215297094,
           -0.86560407227741987, 0.57108871328931621, 0.30067298391331049, 1.4715150850337499,
           -0.48376312025004359, -1.2782092368178379, 1.3067315083249202, 0.69516474007516071,
           -0.28737452490957527, 1.3876291366928768, -1.6939232230780574, -1.3094106618641661;
    return phi;
}

Vector random_vector(Index size, std::mt19937_64& rng)
{
    return oracle::gaussian_matrix(size, 1, rng).col(0);
}

/// sum_r a_r xi_ir + sum_j b_j X_ij for both coefficient versions.
void check_fitted_values(const DataMatrix& data, const AugmentedDesign& design, const Vector& tilde, double tol)
{
    const CoefficientEstimate est = back_transform(tilde, design);
    const Vector projected_fit = design.phi * tilde;
    Vector original_fit = data.values() * est.beta;
    if (design.k > 0)
        original_fit += design.scores.scores * est.alpha;
    CHECK((projected_fit - original_fit).cwiseAbs().maxCoeff() <= tol);
}

} // namespace

TEST_CASE("tiny fixture design")
{
    const DataMatrix data(tiny_x());
    const AugmentedDesign design = build_augmented_design(data, 1);
    CHECK(design.k == 1);
    CHECK(design.p == 3);
    REQUIRE(design.phi.rows() == 5);
    REQUIRE(design.phi.cols() == 4);
    CHECK((design.phi - tiny_phi_reference()).cwiseAbs().maxCoeff() <= 1e-12);
    const Vector norms = (Vector(3) << 1.252053722544784, 0.9299021721854676, 0.9254941239707707).finished();
    CHECK((design.col_norms - norms).cwiseAbs().maxCoeff() <= 1e-12);
    CHECK(design.spectrum.eigenvalues(0) == doctest::Approx(1.1370346841740242).epsilon(1e-12));

    std::mt19937_64 rng(1);
    for (int trial = 0; trial < 20; ++trial)
        check_fitted_values(data, design, random_vector(4, rng), 1e-10);
}

TEST_CASE("block Gram structure of the augmented design")
{
    SimulationScenario scenario;
    for (int rep = 0; rep < 3; ++rep) {
        const auto sample = generate_dataset(scenario, replication_seed(3, rep));
        const DataMatrix data(sample.x);
        const AugmentedDesign design = build_augmented_design(data, 2);
        const Matrix gram = design.phi.transpose() * design.phi / static_cast<double>(scenario.n);
        CHECK((gram.topLeftCorner(2, 2) - Matrix::Identity(2, 2)).cwiseAbs().maxCoeff() <= 1e-8);
        CHECK(gram.topRightCorner(2, scenario.p).cwiseAbs().maxCoeff() <= 1e-8);
        CHECK((gram.diagonal().array() - 1.0).abs().maxCoeff() <= 1e-8);
    }
}

TEST_CASE("projection recovers the idiosyncratic part")
{
    // X_i = c_i sqrt(p) psi + Z_i with Z_i orthogonal to psi and sum_i c_i Z_i = 0,
    // so psi is an exact eigenvector of the sample covariance and P X_i = Z_i.
    const Index n = 40, p = 8;
    std::mt19937_64 rng(5);
    const Vector psi = Vector::Constant(p, 1.0 / std::sqrt(double(p)));
    const Vector c = 3.0 * random_vector(n, rng);
    Matrix z = 0.3 * oracle::gaussian_matrix(n, p, rng);
    z -= (z * psi) * psi.transpose();
    z -= c * (c.transpose() * z) / c.squaredNorm();
    const Matrix x = c * (std::sqrt(double(p)) * psi).transpose() + z;
    const DataMatrix data(x);
    const AugmentedDesign design = build_augmented_design(data, 1);
    for (Index j = 0; j < p; ++j) {
        const double s = std::sqrt(z.col(j).squaredNorm() / n);
        CHECK(design.col_norms(j) == doctest::Approx(s).epsilon(1e-9));
        CHECK((design.phi.col(1 + j) - z.col(j) / s).cwiseAbs().maxCoeff() <= 1e-6);
    }
}

TEST_CASE("back transform")
{
    std::mt19937_64 rng(7);
    const DataMatrix data(oracle::gaussian_matrix(20, 6, rng));
    const AugmentedDesign design = build_augmented_design(data, 2);

    SUBCASE("zero beta leaves alpha unchanged")
    {
        Vector tilde = Vector::Zero(8);
        tilde.head(2) << 0.7, -1.2;
        const auto est = back_transform(tilde, design, 0.3);
        CHECK(est.beta.isZero(0.0));
        CHECK(est.alpha == tilde.head(2));
        CHECK(est.rho == 0.3);
        CHECK(est.tilde_theta == tilde);
    }
    SUBCASE("unit normalizers and a single beta")
    {
        AugmentedDesign unit = design;
        unit.col_norms.setOnes();
        for (Index j = 0; j < 6; ++j) {
            Vector tilde = Vector::Zero(8);
            tilde.head(2) << 0.5, 0.25;
            tilde(2 + j) = 1.0;
            const auto est = back_transform(tilde, unit);
            for (Index r = 0; r < 2; ++r) {
                const double expected = tilde(r) - std::sqrt(6.0 * unit.spectrum.eigenvalues(r)) * unit.spectrum.eigenvectors(j, r);
                CHECK(est.alpha(r) == doctest::Approx(expected).epsilon(1e-14));
            }
            CHECK(est.beta == Vector::Unit(6, j));
        }
    }
    SUBCASE("fitted-value identity on random inputs")
    {
        for (int trial = 0; trial < 50; ++trial)
            check_fitted_values(data, design, random_vector(8, rng), 1e-10);
    }
    CHECK_THROWS_AS(back_transform(Vector::Zero(5), design), InputError);
}

TEST_CASE("augmented and standard fits")
{
    SimulationScenario scenario;
    scenario.n = 60;
    scenario.p = 40;
    const auto sample = generate_dataset(scenario, 17);
    const DataMatrix data(sample.x);
    const AugmentedDesign design = build_augmented_design(data, 2);

    SUBCASE("augmented path")
    {
        const auto fit = fit_augmented(design, sample.y, GeometricGrid{20, 1e-2});
        REQUIRE(fit.estimates.size() == 20);
        CHECK(fit.estimates[0].alpha.isZero(0.0));
        CHECK(fit.estimates[0].beta.isZero(0.0));
        for (std::size_t i = 0; i < fit.path.size(); ++i) {
            CHECK(fit.estimates[i].rho == fit.path.grid[i]);
            CHECK(fit.estimates[i].tilde_theta == fit.path.coefficients[i]);
            check_fitted_values(data, design, fit.path.coefficients[i], 1e-10);
        }
        CHECK_THROWS_AS(fit_augmented(design, sample.y.head(10), GeometricGrid{}), InputError);
    }
    SUBCASE("standard path")
    {
        const auto fit = fit_standard(data, sample.y, GeometricGrid{20, 1e-2});
        REQUIRE(fit.estimates.size() == 20);
        CHECK(fit.estimates[0].beta.isZero(0.0));
        CHECK(fit.estimates[0].alpha.size() == 0);
        for (std::size_t i = 0; i < fit.path.size(); ++i) {
            const Vector expected = fit.path.coefficients[i].cwiseQuotient(fit.col_norms);
            CHECK((fit.estimates[i].beta - expected).cwiseAbs().maxCoeff() <= 1e-15);
        }
        Matrix x = sample.x;
        x.col(3).setZero();
        CHECK_THROWS_AS(fit_standard(DataMatrix(x), sample.y, GeometricGrid{}), DegenerateColumnError);
    }
}

TEST_CASE("sample prediction error")
{
    std::mt19937_64 rng(9);
    const Index n = 30, p = 5;
    const DataMatrix data(oracle::gaussian_matrix(n, p, rng));
    const Matrix xi = oracle::gaussian_matrix(n, 2, rng);
    const Vector alpha = (Vector(2) << 1.0, -0.5).finished();
    const Vector beta = random_vector(p, rng);

    FactorScores exact;
    exact.scores = xi;
    exact.k = 2;
    CoefficientEstimate truth_estimate;
    truth_estimate.alpha = alpha;
    truth_estimate.beta = beta;
    CHECK(sample_prediction_error(alpha, beta, xi, data, truth_estimate, exact) == doctest::Approx(0.0));

    const double delta = 0.3;
    CoefficientEstimate shifted;
    shifted.alpha = Vector::Zero(0);
    shifted.beta = beta + delta * Vector::Unit(p, 0);
    FactorScores none;
    const double expected = delta * delta * data.values().col(0).squaredNorm() / n;
    CHECK(sample_prediction_error(Vector::Zero(2), beta, xi, data, shifted, none)
          == doctest::Approx(expected).epsilon(1e-12));
}

TEST_CASE("exact prediction error")
{
    SimulationScenario scenario;
    const TrueModel truth = scenario.truth();
    const Index p = scenario.p;

    // Truth plugged in: sum_r alpha_r^2 sigma_z^2 / (p lambda_r) = 0.01 + 0.005.
    CovarianceSpectrum population;
    population.p = p;
    population.eigenvalues = Vector::Zero(p);
    population.eigenvalues.head(2) = truth.law->lambdas;
    population.eigenvectors = truth.law->loadings;
    CoefficientEstimate perfect;
    perfect.alpha = truth.alpha;
    perfect.beta = truth.beta;
    CHECK(exact_prediction_error(truth, perfect, population) == doctest::Approx(0.015).epsilon(1e-12));

    TrueModel no_factors = truth;
    no_factors.alpha.setZero();
    CoefficientEstimate plain;
    plain.alpha = Vector::Zero(2);
    plain.beta = truth.beta;
    CHECK(exact_prediction_error(no_factors, plain, population) == doctest::Approx(0.0).scale(1.0));

    TrueModel lawless = truth;
    lawless.law.reset();
    CHECK_THROWS_AS(exact_prediction_error(lawless, perfect, population), UnsupportedInputError);

    SUBCASE("agrees with Monte Carlo for an estimated model")
    {
        const auto sample = generate_dataset(scenario, 31);
        const DataMatrix data(sample.x);
        const AugmentedDesign design = build_augmented_design(data, 2);
        const auto fit = fit_augmented(design, sample.y, GeometricGrid{30, 1e-2});
        const auto& est = fit.estimates[20];
        const double closed = exact_prediction_error(truth, est, design.spectrum);
        const auto mc = oracle::prediction_error_monte_carlo(
            truth.law->loadings, truth.law->lambdas, truth.law->sigma_z2, truth.alpha, truth.beta,
            design.spectrum.eigenvectors.leftCols(2), design.spectrum.eigenvalues.head(2), est.alpha, est.beta, 200000, 8);
        CHECK(std::abs(closed - mc.mean) <= 3.0 * mc.standard_error);
    }
}

TEST_CASE("nonsparse coefficients of the standard model")
{
    SimulationScenario scenario;
    scenario.p = 4;
    scenario.n = 10;
    scenario.beta_support = {{1, 1.0}, {4, -1.0}};
    const TrueModel truth = scenario.truth();

    // Numeric eigenpairs of Cov(X) / p for the 4 x 4 population covariance.
    const Matrix cov = truth.law->covariance();
    Eigen::SelfAdjointEigenSolver<Matrix> solver(cov / 4.0);
    const Vector mu = solver.eigenvalues().reverse();
    const Matrix vectors = solver.eigenvectors().rowwise().reverse();
    Vector expected = truth.beta;
    for (Index r = 0; r < 2; ++r) {
        Vector delta = vectors.col(r);
        if (delta.dot(truth.law->loadings.col(r)) < 0)
            delta = -delta;
        expected += truth.alpha(r) / std::sqrt(4.0 * mu(r)) * delta;
    }
    CHECK((population_beta_lr(truth) - expected).cwiseAbs().maxCoeff() <= 1e-12);

    // Closed form: beta_j + (1/sqrt(p)) (alpha_1 / sqrt(p mu_1) +- alpha_2 / sqrt(p mu_2)).
    const double mu1 = 0.4 + 0.4 / 4.0, mu2 = 0.2 + 0.4 / 4.0;
    for (Index j = 0; j < 4; ++j) {
        const double sign = j < 2 ? 1.0 : -1.0;
        const double value = truth.beta(j) + 0.5 * (1.0 / std::sqrt(4.0 * mu1) + sign * -0.5 / std::sqrt(4.0 * mu2));
        CHECK(population_beta_lr(truth)(j) == doctest::Approx(value).epsilon(1e-12));
    }

    TrueModel zero_alpha = truth;
    zero_alpha.alpha.setZero();
    CHECK(population_beta_lr(zero_alpha) == truth.beta);
}

TEST_CASE("restricted eigenvalue diagnostic")
{
    const Index n = 50, m = 10;
    std::mt19937_64 rng(13);
    const Matrix q = oracle::gaussian_matrix(n, m, rng).householderQr().householderQ() * Matrix::Identity(n, m);
    const Matrix orthonormal = std::sqrt(double(n)) * q;

    SUBCASE("identity Gram")
    {
        const double est = re_constant_estimate(orthonormal, {1, 1.0, 10000, 1});
        CHECK(est <= 1.0 + 1e-12);
        CHECK(est >= 0.5);
    }
    SUBCASE("duplicated column")
    {
        Matrix dup = orthonormal;
        dup.col(7) = dup.col(2);
        const double small = re_constant_estimate(dup, {1, 1.0, 100000, 2});
        const double coarse = re_constant_estimate(dup, {1, 1.0, 100, 2});
        CHECK(small <= coarse);
        CHECK(small < 0.1);
    }
    SUBCASE("budget monotonicity")
    {
        const Matrix phi = oracle::gaussian_matrix(n, m, rng);
        for (std::uint64_t seed = 0; seed < 5; ++seed)
            CHECK(re_constant_estimate(phi, {2, 3.0, 100000, seed}) <= re_constant_estimate(phi, {2, 3.0, 100, seed}));
    }
    CHECK_THROWS_AS(re_constant_estimate(orthonormal, {6, 1.0, 10, 0}), InputError);
    CHECK_THROWS_AS(re_constant_estimate(orthonormal, {1, 1.0, 0, 0}), InputError);
}
