#pragma once

#include <vector>

#include "nni/estimators.hpp"
#include "nni/matching.hpp"
#include "nni/survey.hpp"

namespace nni {

double gaussian_pdf(double t);
double gaussian_cdf(double t);

// Gaussian kernel (fixed); default bandwidth rule h = 1.5 n^{-1/5}.
struct KernelConfig {
    double bandwidth = 0.0;

    static KernelConfig with_bandwidth(double h);
    static KernelConfig for_sample_size(std::size_t n);
};

// Weighted Nadaraya-Watson regression curve over the scalar matching
// variable. Immutable after construction; evaluation is pure.
class SmoothedCurve {
  public:
    struct Value {
        double value = 0.0;
        bool degenerate = false;  // kernel mass underflowed; nearest z returned
    };

    SmoothedCurve(std::vector<double> m, std::vector<double> z, std::vector<double> w, double h);

    Value evaluate(double q) const;
    double operator()(double q) const { return evaluate(q).value; }
    double bandwidth() const { return bandwidth_; }

  private:
    std::vector<double> m_, z_, w_;
    double bandwidth_;
};

// curve(q) = sum w_i K((q-m_i)/h) z_i / sum w_i K((q-m_i)/h).
SmoothedCurve kernel_regression(std::vector<double> m, std::vector<double> z,
                                std::vector<double> w, const KernelConfig& config);

// Weighted kernel density: (sum w_i)^{-1} h^{-1} sum w_i K((xi-y_i)/h).
double kernel_density(const std::vector<double>& y, const std::vector<double>& w,
                      const KernelConfig& config, double xi);

// Weighted smoothed CDF: (sum w_i)^{-1} sum w_i Phi((xi-y_i)/h).
// kernel_density is its exact derivative in xi.
double smoothed_cdf(const std::vector<double>& y, const std::vector<double>& w,
                    const KernelConfig& config, double xi);

// Derivative of the smoothed quantile estimating function at xi: the
// weighted kernel density of the donor-weighted respondent outcomes, with
// Hajek normalization (weights (1+k_i)/pi_i sum to N-hat exactly).
double s_derivative(const SurveyDataset& data, const MatchAssignment& assignment,
                    const KernelConfig& config, double xi);

}  // namespace nni
