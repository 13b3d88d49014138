#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "nni/estimators.hpp"
#include "nni/matching.hpp"
#include "nni/smoothers.hpp"
#include "nni/survey.hpp"

namespace nni {

inline constexpr double kZ975 = 1.959964;

// Replicate weight matrix with factors c_k.
struct ReplicationScheme {
    enum class Kind { DeleteOneJackknife, Bootstrap };
    Kind kind = Kind::DeleteOneJackknife;
    std::vector<double> factors;                // c_k, length L
    std::vector<std::vector<double>> weights;   // L rows of n replicate weights

    std::size_t replicate_count() const { return weights.size(); }
};

// Delete-one jackknife: L = n, c_k = (n-1)/n, row k has weight 0 at k and
// n w_i/(n-1) elsewhere.
ReplicationScheme build_jackknife(const std::vector<double>& base_weights);

// Rao-Wu rescaling bootstrap: n-1 with-replacement draws per replicate,
// c_k = 1/B, weights w_i (n/(n-1)) m_i^(k); replicate weight totals match
// the base total in expectation.
ReplicationScheme build_bootstrap(const std::vector<double>& base_weights, std::size_t n_boot,
                                  std::uint64_t seed);

// sum_k c_k (replicate_k - estimate)^2.
double v_rep(double estimate, const std::vector<double>& replicate_estimates,
             const std::vector<double>& factors);

// psi_i = mu(m_i) + delta_i (1+k_i) {z(y_i) - mu(m_i)}; for nonrespondents
// this is mu(m_i) exactly and never touches the outcome slot.
std::vector<double> pseudo_observations(const SurveyDataset& data,
                                        const MatchAssignment& assignment,
                                        const std::vector<double>& m, const SmoothedCurve& mu_hat,
                                        const ParameterSpec& spec);

// Same linearization with the quantile score z(y) = I(y <= xi) - alpha.
std::vector<double> pseudo_observations_quantile(const SurveyDataset& data,
                                                 const MatchAssignment& assignment,
                                                 const std::vector<double>& m,
                                                 const SmoothedCurve& mu_s, double alpha,
                                                 double xi);

// Weighted sums of a fixed per-unit vector under each replicate row.
std::vector<double> replicate_weighted_sums(const std::vector<double>& values,
                                            const ReplicationScheme& scheme);

struct VarianceReport {
    std::string target;
    std::string method;  // "proposed" or "naive"
    double point = 0.0;
    double variance = 0.0;
    double ci_low = 0.0;
    double ci_high = 0.0;
    std::size_t replicate_count = 0;
    std::optional<double> derivative;  // S'(xi-hat) for quantile targets

    static std::string csv_header();
    std::string csv_row() const;
};

// Proposed replication variance for a mean-type target: replicates of the
// fixed pseudo-observations under replicate weights; matching and k_i are
// never redone.
VarianceReport proposed_variance_mean(const SurveyDataset& data, const MatchAssignment& assignment,
                                      const ParameterSpec& spec, const SmoothedCurve& mu_hat,
                                      const std::vector<double>& m,
                                      const ReplicationScheme& scheme, double point_estimate);

// Proposed variance for a quantile: S'(xi)^{-2} V_rep of the linearized
// estimating-function replicates. Throws when |S'(xi)| < 1e-6 (flat
// estimating function), never falling back silently.
VarianceReport proposed_variance_quantile(const SurveyDataset& data,
                                          const MatchAssignment& assignment, double alpha,
                                          const SmoothedCurve& mu_s, const KernelConfig& config,
                                          const std::vector<double>& m,
                                          const ReplicationScheme& scheme, double xi_hat);

// Naive baseline, retained deliberately so the failure mode can be
// reproduced: each replicate drops its zero-weight units, refits the
// matching model under the replicate weights, redoes the matching among
// the survivors, and recomputes the point estimator. The refit moves
// every matching value by a little, which flips a non-vanishing share of
// borderline matches per replicate and blows the variance up by an order
// of magnitude. Invalid as a variance method; see the simulation tables.
struct NaiveReplicates {
    // estimates[s][k]: replicate k of spec s; NaN where the replicate
    // could not be computed.
    std::vector<std::vector<double>> estimates;
    int skipped = 0;  // replicates without a fittable respondent set
};
NaiveReplicates naive_replicates(const SurveyDataset& data, BasisSpec basis,
                                 const std::vector<ParameterSpec>& specs,
                                 const ReplicationScheme& scheme);

std::pair<double, double> confidence_interval(double point, double variance);

}  // namespace nni
