#pragma once

#include <string>
#include <vector>

#include "nni/survey.hpp"

namespace nni {

// Power-series basis for the scalar matching variable m(x):
// first-order terms only, or first-order plus all squares and
// pairwise products.
enum class BasisSpec { FirstOrder, FirstAndSecondOrder };

std::size_t basis_size(BasisSpec basis, std::size_t p);
std::vector<std::string> basis_term_names(BasisSpec basis, std::size_t p);
std::vector<double> basis_terms(BasisSpec basis, const std::vector<double>& x);

struct MatchingModel {
    BasisSpec basis = BasisSpec::FirstOrder;
    std::size_t covariate_dim = 0;
    std::vector<double> coefficients;

    // m(x) = basis(x)' beta. Throws on dimension mismatch.
    double evaluate(const std::vector<double>& x) const;
};

// Weighted least squares of y on the basis over respondents, using design
// weights. Throws on zero respondents or rank deficiency (the error names
// the collinear columns).
MatchingModel fit_matching_model(const SurveyDataset& data, BasisSpec basis);

// Same fit with caller-supplied per-unit weights (one per dataset row);
// respondents with zero or negative weight are left out. Used by the naive
// replication baseline, which refits the model under each replicate's weights.
MatchingModel fit_matching_model(const SurveyDataset& data, BasisSpec basis,
                                 const std::vector<double>& weights);

// m(x_i) for every unit in the dataset, in order.
std::vector<double> matching_values(const MatchingModel& model, const SurveyDataset& data);

// Donor assignment for every nonrespondent plus donor-use counts.
struct MatchAssignment {
    // Index into the dataset of the donor, -1 for respondents.
    std::vector<int> donor_index;
    // Unweighted donor-use count per unit (zero for nonrespondents).
    std::vector<int> multiplicity;
    // Design-weighted multiplicity k_i = sum_j (pi_i/pi_j)(1-delta_j) d_ij.
    std::vector<double> weighted_multiplicity;
};

// 1-NN donor search on the scalar matching variable. Ties are broken by
// the smallest unit id, making the assignment fully deterministic.
// Respondents are sorted once; each recipient is a binary search.
MatchAssignment nearest_neighbor_match(const std::vector<double>& m, const SurveyDataset& data);

// Donor search against an explicit respondent subset, sorted by (m, id).
// nearest_neighbor_match is built on these; the naive replication baseline
// reuses them so both apply the identical distance and tie rule.
struct SortedRespondent {
    double m;
    std::int64_t id;
    std::uint32_t index;  // into the dataset
};
std::vector<SortedRespondent> sorted_respondents(const std::vector<double>& m,
                                                 const SurveyDataset& data);
// Dataset index of the nearest entry to q; ties go to the smallest id.
std::uint32_t nearest_respondent(const std::vector<SortedRespondent>& sorted, double q);

// Recomputes k_i for a given assignment (exact evaluation of the
// weighted-multiplicity formula).
std::vector<double> weighted_multiplicity(const MatchAssignment& assignment,
                                          const SurveyDataset& data);

// Mean |m_donor - m_recipient| over nonrespondents.
double scalar_match_discrepancy(const std::vector<double>& m, const MatchAssignment& assignment,
                                const SurveyDataset& data);

struct MultivariateDiscrepancy {
    double mean_distance = 0.0;
    bool euclidean_fallback = false;  // covariance was singular
};

// Matches nonrespondents on raw x by Mahalanobis distance (brute force)
// and reports the mean donor-recipient distance. Falls back to Euclidean
// distance when the empirical covariance is singular.
MultivariateDiscrepancy mahalanobis_match_discrepancy(const SurveyDataset& data);

}  // namespace nni
