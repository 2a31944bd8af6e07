#include <doctest.h>

#include <cmath>
#include <cstring>
#include <set>

#include "factorlasso/covariance_factors.hpp"
#include "factorlasso/csv.hpp"
#include "factorlasso/errors.hpp"
#include "factorlasso/serialization.hpp"
#include "factorlasso/simulation.hpp"

using namespace factorlasso;

namespace {

bool same_bits(const ReplicationResult& a, const ReplicationResult& b)
{
    for (const auto& field : kReplicationMetrics)
        if (std::memcmp(&(a.*field.member), &(b.*field.member), sizeof(double)) != 0)
            return false;
    return true;
}

SimulationScenario small_scenario()
{
    SimulationScenario s;
    s.n = 40;
    s.p = 40;
    s.reps = 6;
    s.grid = GeometricGrid{30, 1e-2};
    return s;
}

} // namespace

TEST_CASE("loadings")
{
    const auto [a2, b2] = make_loadings(2);
    CHECK(a2(0) == doctest::Approx(0.70710678118654752));
    CHECK(a2(1) == doctest::Approx(0.70710678118654752));
    CHECK(b2(0) == doctest::Approx(0.70710678118654752));
    CHECK(b2(1) == doctest::Approx(-0.70710678118654752));
    const auto [a4, b4] = make_loadings(4);
    CHECK(b4 == (Vector(4) << 0.5, 0.5, -0.5, -0.5).finished());
    for (const Index p : {2, 6, 10, 100, 250}) {
        const auto [psi1, psi2] = make_loadings(p);
        CHECK(psi1.norm() == doctest::Approx(1.0).epsilon(1e-15));
        CHECK(psi2.norm() == doctest::Approx(1.0).epsilon(1e-15));
        // Entries j and j + p/2 cancel exactly; the floating-point dot product only up to rounding.
        for (Index j = 0; j < p / 2; ++j)
            CHECK(psi1(j) * psi2(j) + psi1(j + p / 2) * psi2(j + p / 2) == 0.0);
        CHECK(std::abs(psi1.dot(psi2)) <= 1e-15);
    }
    CHECK_THROWS_AS(make_loadings(5), InputError);
    CHECK_THROWS_AS(make_loadings(0), InputError);
}

TEST_CASE("scenario defaults and validation")
{
    const SimulationScenario s;
    REQUIRE(s.beta_support.size() == 4);
    CHECK(s.beta_support[0].index == 10);
    CHECK(s.beta_support[1].index == 20);
    CHECK(s.beta_support[2].index == 21);
    CHECK(s.beta_support[3].index == 40);
    CHECK(s.beta()(9) == 1.0);
    CHECK(s.beta()(19) == 0.3);
    CHECK(s.beta()(20) == -0.3);
    CHECK(s.beta()(39) == -1.0);
    CHECK(s.beta().cwiseAbs().sum() == doctest::Approx(2.6));
    CHECK(s.sigma2_eps == 0.1);
    CHECK(s.sigma_z2() == doctest::Approx(0.4));
    CHECK_NOTHROW(s.validate());

    auto field_of = [](SimulationScenario bad) {
        try {
            bad.validate();
        } catch (const ConfigError& e) {
            return e.field();
        }
        return std::string("none");
    };
    SimulationScenario bad = s;
    bad.lambda1 = 0.7;
    bad.lambda2 = 0.3;
    CHECK(field_of(bad) == "lambda1+lambda2");
    bad = s;
    bad.p = 30;
    CHECK(field_of(bad) == "beta_support[3].index");
    bad = s;
    bad.p = 101;
    CHECK(field_of(bad) == "p");
    bad = s;
    bad.reps = 0;
    CHECK(field_of(bad) == "reps");
    bad = s;
    bad.k_fit = 0;
    CHECK(field_of(bad) == "k_fit");
    bad = s;
    bad.sigma2_eps = -1.0;
    CHECK(field_of(bad) == "sigma2_eps");
    bad = s;
    bad.grid = GeometricGrid{10, 2.0};
    CHECK(field_of(bad) == "grid.ratio");
}

TEST_CASE("generator")
{
    SimulationScenario s;
    SUBCASE("determinism")
    {
        const auto a = generate_dataset(s, 42);
        const auto b = generate_dataset(s, 42);
        const auto c = generate_dataset(s, 43);
        CHECK(a.x == b.x);
        CHECK(a.y == b.y);
        CHECK(a.xi == b.xi);
        CHECK(a.eps == b.eps);
        CHECK(a.x != c.x);
    }
    SUBCASE("response composition")
    {
        const auto d = generate_dataset(s, 5);
        const Vector expected = s.alpha1 * d.xi.col(0) + s.alpha2 * d.xi.col(1) + d.x * s.beta() + d.eps;
        CHECK((d.y - expected).cwiseAbs().maxCoeff() <= 1e-12);
    }
    SUBCASE("moments at n = 10^4")
    {
        SimulationScenario big;
        big.n = 10000;
        big.p = 10;
        big.beta_support = {{1, 1.0}};
        const auto d = generate_dataset(big, 7);
        const double n = static_cast<double>(big.n);
        // Var(X_ij^2) = 2 for a unit-variance Gaussian, so the sample second moment has SE sqrt(2 / n).
        const double se = std::sqrt(2.0 / n);
        for (Index j = 0; j < big.p; ++j)
            CHECK(std::abs(d.x.col(j).squaredNorm() / n - 1.0) <= 5.0 * se);
        // For Gaussian rows E||S - Sigma||_F^2 = (||Sigma||_F^2 + tr(Sigma)^2) / n, about 0.0126 here.
        const Matrix sigma = big.law().covariance();
        const Matrix empirical = empirical_covariance(DataMatrix(d.x));
        const double expected_sq = (sigma.squaredNorm() + sigma.trace() * sigma.trace()) / n;
        CHECK((empirical - sigma).squaredNorm() <= 2.0 * expected_sq);

        big.n = 40000;
        const auto larger = generate_dataset(big, 8);
        CHECK((empirical_covariance(DataMatrix(larger.x)) - sigma).norm() < 0.1);
        CHECK(std::abs(d.eps.squaredNorm() / n - big.sigma2_eps) <= 5.0 * std::sqrt(2.0 / n) * big.sigma2_eps);
    }
}

TEST_CASE("replication seeds")
{
    std::set<std::uint64_t> seen;
    for (std::uint64_t i = 0; i < 1000; ++i)
        seen.insert(replication_seed(20100701, i));
    CHECK(seen.size() == 1000);
    CHECK(replication_seed(1, 2) == replication_seed(1, 2));
    CHECK(replication_seed(1, 2) != replication_seed(2, 1));
}

TEST_CASE("study driver")
{
    SUBCASE("single replication")
    {
        SimulationScenario s = small_scenario();
        s.reps = 1;
        const auto summary = run_study(s);
        const auto single = run_replication(s, 0);
        CHECK(summary.completed == 1);
        CHECK(summary.dropped == 0);
        CHECK(same_bits(summary.mean, single));
        for (const auto& field : kReplicationMetrics)
            CHECK(summary.standard_error.*field.member == 0.0);
    }
    SUBCASE("worker count does not change the result")
    {
        const SimulationScenario s = small_scenario();
        const auto serial = run_study(s, 1);
        const auto parallel = run_study(s, 4);
        CHECK(same_bits(serial.mean, parallel.mean));
        CHECK(same_bits(serial.standard_error, parallel.standard_error));
    }
    SUBCASE("aggregation")
    {
        ReplicationResult a, b;
        a.min_alpha_err = 1.0;
        b.min_alpha_err = 3.0;
        const auto summary = summarize(SimulationScenario{}, {a, b}, 1);
        CHECK(summary.mean.min_alpha_err == 2.0);
        CHECK(summary.standard_error.min_alpha_err == doctest::Approx(1.0));
        CHECK(summary.completed == 2);
        CHECK(summary.dropped == 1);
    }
    SUBCASE("metrics are non-negative and k_hat is recorded")
    {
        const auto r = run_replication(SimulationScenario{}, 0);
        for (const auto& field : kReplicationMetrics)
            CHECK(r.*field.member >= 0.0);
        CHECK(r.k_hat == 2.0);
    }
}

TEST_CASE("study tendencies")
{
    SUBCASE("penalties for prediction are smaller than for estimation")
    {
        SimulationScenario s;
        s.reps = 20;
        const auto summary = run_study(s, 4);
        CHECK(summary.mean.rho_at_min_pred <= summary.mean.rho_at_min_est);
    }
    SUBCASE("without factor effects both models estimate beta comparably")
    {
        SimulationScenario s;
        s.n = 100;
        s.p = 250;
        s.alpha1 = 0.0;
        s.alpha2 = 0.0;
        s.reps = 20;
        const auto summary = run_study(s, 4);
        const double aug = summary.mean.min_beta_err;
        const double base = summary.mean.baseline_min_beta_err;
        CHECK(std::abs(aug - base) <= 0.2 * std::max(aug, base));
    }
}

TEST_CASE("table emission")
{
    SimulationScenario s1 = small_scenario();
    s1.reps = 2;
    SimulationScenario s2 = s1;
    s2.n = 60;
    const auto m1 = run_study(s1);
    const auto m2 = run_study(s2);

    CHECK_THROWS_AS(emit_table({}, TableFormat::csv), InputError);
    CHECK_THROWS_AS(emit_table({m1}, "xml"), InputError);

    SUBCASE("csv round trip")
    {
        const auto records = parse_csv(emit_table({m1}, "csv"));
        REQUIRE(records.size() == 3);
        CHECK(records[0][0] == "model");
        CHECK(records[0][9] == "sum_abs_alpha_err");
        CHECK(records[1][0] == "augmented");
        CHECK(records[2][0] == "standard");
        for (const auto& row : records)
            CHECK(row.size() == records[0].size());
        CHECK(std::stod(records[1][9]) == doctest::Approx(m1.mean.min_alpha_err).epsilon(1e-12));
        CHECK(records[2][9].empty());
        CHECK(std::stod(records[2][10]) == doctest::Approx(m1.mean.baseline_min_beta_lr_err).epsilon(1e-12));
    }
    SUBCASE("row order follows the input")
    {
        const auto records = parse_csv(emit_table({m2, m1}, TableFormat::csv));
        REQUIRE(records.size() == 5);
        CHECK(records[1][1] == "60");
        CHECK(records[2][1] == "40");
        CHECK(records[3][1] == "60");
        CHECK(records[4][1] == "40");
    }
    SUBCASE("text table")
    {
        const std::string text = emit_table({m1, m2}, "text");
        CHECK(text.find("augmented") != std::string::npos);
        CHECK(text.find("standard") != std::string::npos);
        CHECK(text.find("sum_abs_beta_err") != std::string::npos);
    }
}

TEST_CASE("scenario serialization")
{
    SimulationScenario s = small_scenario();
    s.label = "custom";
    s.grid = ExplicitGrid{{0.5, 0.1, 0.01}};
    const auto back = scenario_from_json(scenario_to_json(s));
    CHECK(scenario_to_json(back) == scenario_to_json(s));

    auto field_of = [](const nlohmann::json& j) {
        try {
            scenario_from_json(j);
        } catch (const ConfigError& e) {
            return e.field();
        }
        return std::string("none");
    };
    CHECK(field_of({{"bogus", 1}}) == "scenario.bogus");
    CHECK(field_of({{"n", "ten"}}) == "scenario.n");
    CHECK(field_of({{"lambda1", 0.8}, {"lambda2", 0.3}}) == "scenario.lambda1+lambda2");
    CHECK(field_of({{"grid", {{"points", 10}, {"penalties", {1.0}}}}}) == "scenario.grid");
    CHECK(field_of({{"beta_support", {{{"index", 500}, {"value", 1.0}}}}}) == "scenario.beta_support[0].index");

    const auto summary = summarize(s, {ReplicationResult{}}, 0);
    const auto j = summary_to_json(summary);
    CHECK(j.at("mean").size() == kReplicationMetrics.size());
    CHECK(j.at("standard_error").contains("exact_pred_at_that_rho"));
}
