#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "factorlasso/augmented_regression.hpp"
#include "factorlasso/lasso_path.hpp"
#include "factorlasso/types.hpp"

namespace factorlasso {

/// Non-zero regression coefficient; `index` is the 1-based predictor number.
struct BetaEntry
{
    Index index = 1;
    double value = 0.0;
};

/// Two-factor Gaussian design with unit predictor variance:
///   X_ij = sqrt(p l1) xi_i1 psi_1j + sqrt(p l2) xi_i2 psi_2j + Z_ij,  Z ~ N(0, 1 - l1 - l2)
///   Y_i  = a1 xi_i1 + a2 xi_i2 + sum_j beta_j X_ij + eps_i,          eps ~ N(0, sigma2_eps)
struct SimulationScenario
{
    std::string label;
    Index n = 100;
    Index p = 100;
    double lambda1 = 0.4;
    double lambda2 = 0.2;
    double alpha1 = 1.0;
    double alpha2 = -0.5;
    std::vector<BetaEntry> beta_support = {{10, 1.0}, {20, 0.3}, {21, -0.3}, {40, -1.0}};
    double sigma2_eps = 0.1;
    Index k_fit = 2;
    GridSpec grid = GeometricGrid{};
    int reps = 200;
    std::uint64_t base_seed = 20100701;

    /// Throws ConfigError naming the violated field.
    void validate() const;

    double sigma_z2() const noexcept { return 1.0 - lambda1 - lambda2; }
    Vector alpha() const;
    Vector beta() const;
    PopulationLaw law() const;
    TrueModel truth() const;
};

struct SimulatedData
{
    Matrix x;    ///< n x p
    Vector y;    ///< n
    Matrix xi;   ///< n x 2
    Vector eps;  ///< n
};

/// Metrics of one replication. Penalties are on the table scale n * rho / 2.
struct ReplicationResult
{
    double min_alpha_err = 0.0;
    double min_beta_err = 0.0;
    double rho_at_min_est = 0.0;
    double min_sample_pred = 0.0;
    double exact_pred_at_that_rho = 0.0;
    double rho_at_min_pred = 0.0;
    double rho_cp = 0.0;
    double k_hat = 0.0;
    double baseline_min_beta_err = 0.0;
    double baseline_min_beta_lr_err = 0.0;
    double baseline_sample_pred = 0.0;
    double baseline_exact_pred = 0.0;
    double baseline_rho_at_min_pred = 0.0;
};

struct MetricField
{
    const char* name;
    double ReplicationResult::*member;
};

inline constexpr std::array<MetricField, 13> kReplicationMetrics{{
    {"min_alpha_err", &ReplicationResult::min_alpha_err},
    {"min_beta_err", &ReplicationResult::min_beta_err},
    {"rho_at_min_est", &ReplicationResult::rho_at_min_est},
    {"min_sample_pred", &ReplicationResult::min_sample_pred},
    {"exact_pred_at_that_rho", &ReplicationResult::exact_pred_at_that_rho},
    {"rho_at_min_pred", &ReplicationResult::rho_at_min_pred},
    {"rho_cp", &ReplicationResult::rho_cp},
    {"k_hat", &ReplicationResult::k_hat},
    {"baseline_min_beta_err", &ReplicationResult::baseline_min_beta_err},
    {"baseline_min_beta_lr_err", &ReplicationResult::baseline_min_beta_lr_err},
    {"baseline_sample_pred", &ReplicationResult::baseline_sample_pred},
    {"baseline_exact_pred", &ReplicationResult::baseline_exact_pred},
    {"baseline_rho_at_min_pred", &ReplicationResult::baseline_rho_at_min_pred},
}};

struct MonteCarloSummary
{
    SimulationScenario scenario;
    int completed = 0;
    int dropped = 0;
    std::vector<std::string> failures;  ///< first few failure messages
    ReplicationResult mean;
    ReplicationResult standard_error;
};

enum class TableFormat { csv, text };

/// psi_1 = 1/sqrt(p) everywhere; psi_2 = +1/sqrt(p) on the first half, -1/sqrt(p) on the second.
/// Throws InputError for odd p or p < 2.
std::pair<Vector, Vector> make_loadings(Index p);

/// Independent seed for replication `rep_index` (splitmix64 of both inputs).
std::uint64_t replication_seed(std::uint64_t base_seed, std::uint64_t rep_index);

SimulatedData generate_dataset(const SimulationScenario& scenario, std::uint64_t seed);

ReplicationResult run_replication(const SimulationScenario& scenario, std::uint64_t rep_index);

/// Runs scenario.reps replications on up to `workers` threads. Failed
/// replications are dropped and counted; throws NumericalError if all fail.
MonteCarloSummary run_study(const SimulationScenario& scenario, int workers = 1);

/// Aggregates already-computed replications (in the order given).
MonteCarloSummary summarize(const SimulationScenario& scenario, const std::vector<ReplicationResult>& results,
                            int dropped = 0);

/// Augmented and baseline rows for each summary, in the order given.
std::string emit_table(const std::vector<MonteCarloSummary>& summaries, TableFormat format);
std::string emit_table(const std::vector<MonteCarloSummary>& summaries, const std::string& format);

} // namespace factorlasso
