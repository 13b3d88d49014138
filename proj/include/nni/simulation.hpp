#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "nni/matching.hpp"
#include "nni/survey.hpp"

namespace nni {

enum class PopulationId { P1, P2, P3, P4, P5, P6 };

PopulationId population_from_string(const std::string& s);
std::string to_string(PopulationId id);

// Number of covariates entering the outcome formula (and the response model).
std::size_t active_covariate_count(PopulationId id);
// P1-P3 are linear in x; P4-P6 add x1^2 + x2^2 - 2/3.
bool has_quadratic_terms(PopulationId id);
// E(y | x) under the generating formula.
double conditional_mean(PopulationId id, const std::vector<double>& x);

struct PopulationSpec {
    PopulationId id = PopulationId::P1;
    std::int64_t size = 50000;
};

// Logistic response model: logit p(x) = sum of the active covariates.
double response_probability(const std::vector<double>& x);

// Fully observed finite population with response flags drawn. Guards that
// the realized response rate lands in [0.70, 0.80].
SurveyDataset generate_population(const PopulationSpec& spec, std::uint64_t seed);

// Size variable log(|y + nu| + 4), nu ~ N(0,1), for the PPS design.
std::vector<double> pps_size_values(const SurveyDataset& population, std::uint64_t seed);

// Finite-population quantile: inf{xi : F_N(xi) >= alpha}.
double population_quantile(const SurveyDataset& population, double alpha);
double population_mean(const SurveyDataset& population);
double population_proportion_below(const SurveyDataset& population, double c);

enum class DesignKind { Srs, PoissonPps };

struct ScenarioConfig {
    PopulationSpec population;
    DesignKind design = DesignKind::Srs;
    std::size_t srs_sample_size = 800;
    double pps_expected_size = 400.0;
    // Default: second order for P1-P3, first order for
    // P4-P6 (accurate versus deliberately inaccurate matching variable).
    std::optional<BasisSpec> matching_basis;
    std::size_t mc_reps = 2000;
    std::uint64_t seed = 20260826;
    bool run_proposed = true;
    bool run_naive = true;
    bool force_full_response = false;  // oracle mode: no missingness
    unsigned threads = 1;

    BasisSpec effective_basis() const;
};

ScenarioConfig scenario_from_config_file(const std::string& path);
std::string default_scenario_config_text();

// One Monte Carlo replicate of the full pipeline. NaN marks a value that
// was not computed (method disabled or failed).
struct ReplicateRow {
    std::size_t index = 0;
    double mu_hat = 0.0, eta_hat = 0.0, xi_hat = 0.0;
    double var_mu_prop, var_eta_prop, var_xi_prop;
    double var_mu_naive, var_eta_naive, var_xi_naive;
    double s_deriv;
    bool xi_prop_failed = false;  // derivative floor breach

    static std::string csv_header();
    std::string csv_row() const;
};

struct MethodMetrics {
    double mean_variance = 0.0;
    double relative_bias_pct = 0.0;  // {mean(V-hat) - V_mc}/V_mc * 100
    double coverage_pct = 0.0;
    std::size_t used_reps = 0;
};

struct TargetMetrics {
    double truth = 0.0;
    double bias = 0.0;     // mean(point) - truth
    double se = 0.0;       // Monte Carlo standard deviation of the point
    double mc_variance = 0.0;
    std::optional<MethodMetrics> proposed;
    std::optional<MethodMetrics> naive;
};

struct MonteCarloReport {
    double true_mu = 0.0, true_eta = 0.0, true_xi = 0.0;
    double proportion_threshold = 0.0;  // c, the population 80th percentile
    TargetMetrics mu, eta, xi;
    std::vector<ReplicateRow> replicates;
    std::size_t failures = 0;
    double max_balance_ratio = 0.0;  // Assumption-2 guard, reported
    int clipped_probabilities = 0;
    double wall_seconds = 0.0;
};

// Full Monte Carlo loop: draw, fit, match, estimate, variance, CI hit.
// Deterministic for a fixed seed regardless of the thread count.
MonteCarloReport run_scenario(const ScenarioConfig& config);

// Recomputes the per-target metrics from replicate rows. The report always
// derives its tables from this one-pass reduction, so an independent
// recomputation over replicates.csv must match it exactly.
void compute_metrics(MonteCarloReport& report, const ScenarioConfig& config);

// D_N + B_N decomposition of sqrt(n)(mu_nni - mu) on one sample, using the
// known generating formula for the true conditional mean. The identity
// D_N + B_N = sqrt(n)(mu_nni - mu) holds exactly.
struct BiasDecomposition {
    double d_term = 0.0;
    double b_term = 0.0;
    double scaled_error = 0.0;  // sqrt(n)(mu_nni - mu)
};
BiasDecomposition bias_decomposition(PopulationId id, double population_mean_value,
                                     const SurveyDataset& sample,
                                     const MatchAssignment& assignment);

// One rendered row of the simulation tables.
struct TableRow {
    std::string target;      // "mu", "eta", "xi"
    std::string population;  // "P1".."P6"
    bool accurate_matching = true;
    double bias = 0.0;  // raw scale; the table prints x100
    double se = 0.0;
    std::optional<double> proposed_rb, proposed_cr;
    std::optional<double> naive_rb, naive_cr;
};

std::vector<TableRow> make_table_rows(const ScenarioConfig& config,
                                      const MonteCarloReport& report);
// Aligned text table in the simulation-results layout; relative bias above
// 1000 renders as ">1000".
std::string emit_table_text(const std::vector<TableRow>& rows);
std::string emit_table_csv(const std::vector<TableRow>& rows);

void write_replicates_csv(const MonteCarloReport& report, const std::string& path);
void write_report_csv(const ScenarioConfig& config, const MonteCarloReport& report,
                      const std::string& path);

}  // namespace nni
