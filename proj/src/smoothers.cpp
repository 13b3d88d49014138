#include "nni/smoothers.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>
#include <utility>

namespace nni {

namespace {
constexpr double kInvSqrt2Pi = 0.3989422804014326779;
constexpr double kMassFloor = 1e-300;
}  // namespace

double gaussian_pdf(double t) { return kInvSqrt2Pi * std::exp(-0.5 * t * t); }

double gaussian_cdf(double t) { return 0.5 * std::erfc(-t * 0.7071067811865475244); }

KernelConfig KernelConfig::with_bandwidth(double h) {
    if (!(h > 0.0)) throw std::invalid_argument("bandwidth must be positive");
    return KernelConfig{h};
}

KernelConfig KernelConfig::for_sample_size(std::size_t n) {
    if (n == 0) throw std::invalid_argument("bandwidth rule needs a positive sample size");
    return KernelConfig{1.5 * std::pow(static_cast<double>(n), -0.2)};
}

SmoothedCurve::SmoothedCurve(std::vector<double> m, std::vector<double> z, std::vector<double> w,
                             double h)
    : m_(std::move(m)), z_(std::move(z)), w_(std::move(w)), bandwidth_(h) {
    if (m_.empty() || m_.size() != z_.size() || m_.size() != w_.size())
        throw std::invalid_argument("curve inputs must be nonempty and aligned");
    if (!(bandwidth_ > 0.0)) throw std::invalid_argument("bandwidth must be positive");
}

SmoothedCurve::Value SmoothedCurve::evaluate(double q) const {
    const double inv_h = 1.0 / bandwidth_;
    double mass = 0.0, sum = 0.0;
    for (std::size_t i = 0; i < m_.size(); ++i) {
        const double t = (q - m_[i]) * inv_h;
        const double k = w_[i] * std::exp(-0.5 * t * t);
        mass += k;
        sum += k * z_[i];
    }
    if (mass > kMassFloor) return {sum / mass, false};
    // Degenerate extrapolation far outside the data: nearest point's z.
    std::size_t best = 0;
    double best_d = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < m_.size(); ++i) {
        const double d = std::abs(q - m_[i]);
        if (d < best_d) {
            best_d = d;
            best = i;
        }
    }
    return {z_[best], true};
}

SmoothedCurve kernel_regression(std::vector<double> m, std::vector<double> z,
                                std::vector<double> w, const KernelConfig& config) {
    return SmoothedCurve(std::move(m), std::move(z), std::move(w), config.bandwidth);
}

double kernel_density(const std::vector<double>& y, const std::vector<double>& w,
                      const KernelConfig& config, double xi) {
    if (y.size() != w.size() || y.empty())
        throw std::invalid_argument("density inputs must be nonempty and aligned");
    const double inv_h = 1.0 / config.bandwidth;
    double mass = 0.0, sum = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) {
        mass += w[i];
        sum += w[i] * gaussian_pdf((xi - y[i]) * inv_h);
    }
    if (!(mass > 0.0)) throw std::invalid_argument("total weight must be positive");
    return sum * inv_h / mass;
}

double smoothed_cdf(const std::vector<double>& y, const std::vector<double>& w,
                    const KernelConfig& config, double xi) {
    if (y.size() != w.size() || y.empty())
        throw std::invalid_argument("CDF inputs must be nonempty and aligned");
    const double inv_h = 1.0 / config.bandwidth;
    double mass = 0.0, sum = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) {
        mass += w[i];
        sum += w[i] * gaussian_cdf((xi - y[i]) * inv_h);
    }
    if (!(mass > 0.0)) throw std::invalid_argument("total weight must be positive");
    return sum / mass;
}

double s_derivative(const SurveyDataset& data, const MatchAssignment& assignment,
                    const KernelConfig& config, double xi) {
    std::vector<double> y, w;
    y.reserve(data.units.size());
    w.reserve(data.units.size());
    for (std::size_t i = 0; i < data.units.size(); ++i) {
        const Unit& u = data.units[i];
        if (!u.responded) continue;
        if (!u.y.has_value())
            throw std::invalid_argument("respondent without outcome (unit " + std::to_string(u.id) +
                                        ")");
        y.push_back(*u.y);
        w.push_back((1.0 + assignment.weighted_multiplicity[i]) / u.inclusion_prob);
    }
    if (y.empty()) throw std::invalid_argument("no respondents for derivative estimation");
    return kernel_density(y, w, config, xi);
}

}  // namespace nni
