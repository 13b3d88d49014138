#include "nni/variance.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <stdexcept>
#include <tuple>

#include "nni/random.hpp"

namespace nni {

ReplicationScheme build_jackknife(const std::vector<double>& base_weights) {
    const std::size_t n = base_weights.size();
    if (n < 2) throw std::invalid_argument("jackknife needs at least two units");
    ReplicationScheme scheme;
    scheme.kind = ReplicationScheme::Kind::DeleteOneJackknife;
    const double nd = static_cast<double>(n);
    scheme.factors.assign(n, (nd - 1.0) / nd);
    scheme.weights.assign(n, {});
    const double scale = nd / (nd - 1.0);
    for (std::size_t k = 0; k < n; ++k) {
        auto& row = scheme.weights[k];
        row.resize(n);
        for (std::size_t i = 0; i < n; ++i) row[i] = scale * base_weights[i];
        row[k] = 0.0;
    }
    return scheme;
}

ReplicationScheme build_bootstrap(const std::vector<double>& base_weights, std::size_t n_boot,
                                  std::uint64_t seed) {
    const std::size_t n = base_weights.size();
    if (n < 2) throw std::invalid_argument("bootstrap needs at least two units");
    if (n_boot == 0) throw std::invalid_argument("bootstrap needs at least one replicate");
    ReplicationScheme scheme;
    scheme.kind = ReplicationScheme::Kind::Bootstrap;
    scheme.factors.assign(n_boot, 1.0 / static_cast<double>(n_boot));
    scheme.weights.assign(n_boot, {});
    Rng rng(seed);
    const double scale = static_cast<double>(n) / static_cast<double>(n - 1);
    std::vector<std::uint32_t> counts(n);
    for (std::size_t k = 0; k < n_boot; ++k) {
        std::fill(counts.begin(), counts.end(), 0u);
        for (std::size_t d = 0; d + 1 < n; ++d) ++counts[rng.below(n)];
        auto& row = scheme.weights[k];
        row.resize(n);
        for (std::size_t i = 0; i < n; ++i) row[i] = base_weights[i] * scale * counts[i];
    }
    return scheme;
}

double v_rep(double estimate, const std::vector<double>& replicate_estimates,
             const std::vector<double>& factors) {
    if (replicate_estimates.size() != factors.size())
        throw std::invalid_argument("replicate estimates and factors must align");
    double v = 0.0;
    for (std::size_t k = 0; k < factors.size(); ++k) {
        const double d = replicate_estimates[k] - estimate;
        v += factors[k] * d * d;
    }
    return v;
}

std::vector<double> pseudo_observations(const SurveyDataset& data,
                                        const MatchAssignment& assignment,
                                        const std::vector<double>& m, const SmoothedCurve& mu_hat,
                                        const ParameterSpec& spec) {
    const std::size_t n = data.units.size();
    if (m.size() != n || assignment.weighted_multiplicity.size() != n)
        throw std::invalid_argument("pseudo-observation inputs do not align");
    std::vector<double> psi(n);
    for (std::size_t i = 0; i < n; ++i) {
        const Unit& u = data.units[i];
        const double mu = mu_hat(m[i]);
        psi[i] = mu;
        if (u.responded)
            psi[i] += (1.0 + assignment.weighted_multiplicity[i]) * (spec.score(*u.y) - mu);
    }
    return psi;
}

std::vector<double> pseudo_observations_quantile(const SurveyDataset& data,
                                                 const MatchAssignment& assignment,
                                                 const std::vector<double>& m,
                                                 const SmoothedCurve& mu_s, double alpha,
                                                 double xi) {
    const std::size_t n = data.units.size();
    if (m.size() != n || assignment.weighted_multiplicity.size() != n)
        throw std::invalid_argument("pseudo-observation inputs do not align");
    std::vector<double> psi(n);
    for (std::size_t i = 0; i < n; ++i) {
        const Unit& u = data.units[i];
        const double mu = mu_s(m[i]);
        psi[i] = mu;
        if (u.responded) {
            const double score = (*u.y <= xi ? 1.0 : 0.0) - alpha;
            psi[i] += (1.0 + assignment.weighted_multiplicity[i]) * (score - mu);
        }
    }
    return psi;
}

std::vector<double> replicate_weighted_sums(const std::vector<double>& values,
                                            const ReplicationScheme& scheme) {
    std::vector<double> out;
    out.reserve(scheme.replicate_count());
    for (const auto& row : scheme.weights) {
        if (row.size() != values.size())
            throw std::invalid_argument("replicate weights do not align with values");
        double sum = 0.0;
        for (std::size_t i = 0; i < values.size(); ++i) sum += row[i] * values[i];
        out.push_back(sum);
    }
    return out;
}

std::string VarianceReport::csv_header() {
    return "target,method,point,variance,ci_low,ci_high,L,derivative";
}

std::string VarianceReport::csv_row() const {
    char buf[256];
    std::string deriv;
    if (derivative) {
        char dbuf[40];
        std::snprintf(dbuf, sizeof dbuf, "%.17g", *derivative);
        deriv = dbuf;
    }
    std::snprintf(buf, sizeof buf, "%s,%s,%.17g,%.17g,%.17g,%.17g,%zu,%s", target.c_str(),
                  method.c_str(), point, variance, ci_low, ci_high, replicate_count, deriv.c_str());
    return buf;
}

VarianceReport proposed_variance_mean(const SurveyDataset& data, const MatchAssignment& assignment,
                                      const ParameterSpec& spec, const SmoothedCurve& mu_hat,
                                      const std::vector<double>& m,
                                      const ReplicationScheme& scheme, double point_estimate) {
    const auto psi = pseudo_observations(data, assignment, m, mu_hat, spec);
    const auto base = design_weights(data);
    double center = 0.0;
    for (std::size_t i = 0; i < psi.size(); ++i) center += base[i] * psi[i];
    const auto reps = replicate_weighted_sums(psi, scheme);

    VarianceReport report;
    report.target = spec.kind == ParameterSpec::Kind::ProportionBelow ? "proportion" : "mean";
    report.method = "proposed";
    report.point = point_estimate;
    report.variance = v_rep(center, reps, scheme.factors);
    report.replicate_count = scheme.replicate_count();
    std::tie(report.ci_low, report.ci_high) = confidence_interval(point_estimate, report.variance);
    return report;
}

VarianceReport proposed_variance_quantile(const SurveyDataset& data,
                                          const MatchAssignment& assignment, double alpha,
                                          const SmoothedCurve& mu_s, const KernelConfig& config,
                                          const std::vector<double>& m,
                                          const ReplicationScheme& scheme, double xi_hat) {
    const double sdot = s_derivative(data, assignment, config, xi_hat);
    if (!(std::abs(sdot) >= 1e-6))
        throw std::runtime_error("flat estimating function: |S'(xi)| below 1e-6, variance "
                                 "would be unstable");

    const auto psi = pseudo_observations_quantile(data, assignment, m, mu_s, alpha, xi_hat);
    const auto base = design_weights(data);
    double center = 0.0;
    for (std::size_t i = 0; i < psi.size(); ++i) center += base[i] * psi[i];
    const auto reps = replicate_weighted_sums(psi, scheme);

    VarianceReport report;
    report.target = "quantile";
    report.method = "proposed";
    report.point = xi_hat;
    report.variance = v_rep(center, reps, scheme.factors) / (sdot * sdot);
    report.replicate_count = scheme.replicate_count();
    report.derivative = sdot;
    std::tie(report.ci_low, report.ci_high) = confidence_interval(xi_hat, report.variance);
    return report;
}

NaiveReplicates naive_replicates(const SurveyDataset& data, BasisSpec basis,
                                 const std::vector<ParameterSpec>& specs,
                                 const ReplicationScheme& scheme) {
    const std::size_t n = data.units.size();
    const double nan = std::numeric_limits<double>::quiet_NaN();

    NaiveReplicates out;
    out.estimates.assign(specs.size(), std::vector<double>(scheme.replicate_count(), nan));

    std::vector<double> m(n);
    std::vector<double> ystar(n);
    std::vector<std::pair<double, double>> support;

    for (std::size_t k = 0; k < scheme.replicate_count(); ++k) {
        const auto& row = scheme.weights[k];
        if (row.size() != n) throw std::invalid_argument("replicate weights do not align");

        MatchingModel model;
        try {
            model = fit_matching_model(data, basis, row);
        } catch (const std::invalid_argument&) {
            ++out.skipped;
            continue;
        }

        double total = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            m[i] = model.evaluate(data.units[i].x);
            if (row[i] > 0.0) total += row[i];
        }
        std::vector<SortedRespondent> surv;
        for (const auto& e : sorted_respondents(m, data))
            if (row[e.index] > 0.0) surv.push_back(e);
        if (surv.empty()) {
            ++out.skipped;
            continue;
        }

        for (std::size_t i = 0; i < n; ++i) {
            if (!(row[i] > 0.0)) continue;
            const std::size_t src = data.units[i].responded ? i : nearest_respondent(surv, m[i]);
            ystar[i] = *data.units[src].y;
        }

        for (std::size_t s = 0; s < specs.size(); ++s) {
            const ParameterSpec& spec = specs[s];
            if (spec.kind == ParameterSpec::Kind::Quantile) {
                support.clear();
                for (std::size_t i = 0; i < n; ++i)
                    if (row[i] > 0.0) support.emplace_back(ystar[i], row[i]);
                std::sort(support.begin(), support.end());
                const double target = spec.alpha * total;
                const double tol = 1e-12 * total;
                double cum = 0.0;
                double value = support.back().first;
                for (const auto& [y, w] : support) {
                    cum += w;
                    if (cum >= target - tol) {
                        value = y;
                        break;
                    }
                }
                out.estimates[s][k] = value;
            } else {
                double sum = 0.0;
                for (std::size_t i = 0; i < n; ++i)
                    if (row[i] > 0.0) sum += row[i] * spec.score(ystar[i]);
                out.estimates[s][k] = sum;
            }
        }
    }
    return out;
}

std::pair<double, double> confidence_interval(double point, double variance) {
    if (variance < 0.0) throw std::invalid_argument("negative variance");
    const double half = kZ975 * std::sqrt(variance);
    return {point - half, point + half};
}

}  // namespace nni
