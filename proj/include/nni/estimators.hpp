#pragma once

#include <functional>

#include "nni/matching.hpp"
#include "nni/survey.hpp"

namespace nni {

// Which finite-population quantity is targeted. The proportion uses the
// strict indicator I(y < c); the quantile score uses I(y <= xi) - alpha.
// The two indicators are deliberately distinct.
struct ParameterSpec {
    enum class Kind { MeanOfG, ProportionBelow, Quantile };
    Kind kind = Kind::MeanOfG;
    std::function<double(double)> g;  // MeanOfG only
    double threshold = 0.0;           // ProportionBelow
    double alpha = 0.0;               // Quantile

    static ParameterSpec mean();
    static ParameterSpec mean_of(std::function<double(double)> fn);
    static ParameterSpec proportion_below(double c);
    static ParameterSpec quantile(double a);

    // g(y) for MeanOfG, I(y < c) for ProportionBelow. Not defined for
    // quantiles, whose score depends on the running xi.
    double score(double y) const;
};

struct PointEstimate {
    double value = 0.0;
    double donor_form_value = 0.0;  // donor-weight form, equal to value
    std::size_t sample_size = 0;
    std::int64_t population_size = 0;
    std::size_t respondent_count = 0;
};

// NNI estimator of a mean-type parameter, computed through both the
// imputed-sum form and the donor-weight form; the two must agree to 1e-12
// (relative), which this function asserts.
PointEstimate nni_mean_estimate(const SurveyDataset& data, const MatchAssignment& assignment,
                                const ParameterSpec& spec);

// F_nni(xi) - alpha with Hajek normalization; nondecreasing step in xi.
double nni_estimating_function(const SurveyDataset& data, const MatchAssignment& assignment,
                               double alpha, double xi);

// inf{xi : S_nni(xi) >= 0}, attained at an observed donor value. Solved by
// an exact scan over the sorted donor-weighted support, never by generic
// root finding on the step function.
PointEstimate nni_quantile_estimate(const SurveyDataset& data, const MatchAssignment& assignment,
                                    double alpha);

}  // namespace nni
