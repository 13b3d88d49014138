#include "nni/estimators.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <utility>

namespace nni {

ParameterSpec ParameterSpec::mean() {
    ParameterSpec s;
    s.kind = Kind::MeanOfG;
    s.g = [](double y) { return y; };
    return s;
}

ParameterSpec ParameterSpec::mean_of(std::function<double(double)> fn) {
    ParameterSpec s;
    s.kind = Kind::MeanOfG;
    s.g = std::move(fn);
    return s;
}

ParameterSpec ParameterSpec::proportion_below(double c) {
    ParameterSpec s;
    s.kind = Kind::ProportionBelow;
    s.threshold = c;
    return s;
}

ParameterSpec ParameterSpec::quantile(double a) {
    if (!(a > 0.0 && a < 1.0)) throw std::invalid_argument("quantile level must be in (0,1)");
    ParameterSpec s;
    s.kind = Kind::Quantile;
    s.alpha = a;
    return s;
}

double ParameterSpec::score(double y) const {
    switch (kind) {
        case Kind::MeanOfG:
            return g(y);
        case Kind::ProportionBelow:
            return y < threshold ? 1.0 : 0.0;
        case Kind::Quantile:
            throw std::logic_error("quantile score requires xi; use nni_estimating_function");
    }
    return 0.0;
}

namespace {

void check_alignment(const SurveyDataset& data, const MatchAssignment& assignment) {
    if (assignment.donor_index.size() != data.units.size() ||
        assignment.weighted_multiplicity.size() != data.units.size())
        throw std::invalid_argument("assignment does not match dataset");
    for (std::size_t j = 0; j < data.units.size(); ++j)
        if (!data.units[j].responded && assignment.donor_index[j] < 0)
            throw std::invalid_argument("nonrespondent without donor (unit " +
                                        std::to_string(data.units[j].id) + ")");
}

double respondent_outcome(const SurveyDataset& data, std::size_t i) {
    const Unit& u = data.units[i];
    if (!u.y.has_value())
        throw std::invalid_argument("respondent without outcome (unit " + std::to_string(u.id) +
                                    ")");
    return *u.y;
}

}  // namespace

PointEstimate nni_mean_estimate(const SurveyDataset& data, const MatchAssignment& assignment,
                                const ParameterSpec& spec) {
    if (spec.kind == ParameterSpec::Kind::Quantile)
        throw std::invalid_argument("use nni_quantile_estimate for quantile targets");
    check_alignment(data, assignment);

    const double N = static_cast<double>(data.population_size);
    double imputed_sum = 0.0;
    double donor_sum = 0.0;
    for (std::size_t i = 0; i < data.units.size(); ++i) {
        const Unit& u = data.units[i];
        const double inv_pi = 1.0 / u.inclusion_prob;
        if (u.responded) {
            const double gy = spec.score(respondent_outcome(data, i));
            imputed_sum += inv_pi * gy;
            donor_sum += inv_pi * (1.0 + assignment.weighted_multiplicity[i]) * gy;
        } else {
            const auto d = static_cast<std::size_t>(assignment.donor_index[i]);
            imputed_sum += inv_pi * spec.score(respondent_outcome(data, d));
        }
    }

    PointEstimate out;
    out.value = imputed_sum / N;
    out.donor_form_value = donor_sum / N;
    out.sample_size = data.units.size();
    out.population_size = data.population_size;
    out.respondent_count = data.respondent_count();

    const double scale = std::max({1.0, std::abs(out.value), std::abs(out.donor_form_value)});
    if (std::abs(out.value - out.donor_form_value) > 1e-12 * scale)
        throw std::logic_error("imputed-sum and donor-weight forms disagree");
    return out;
}

double nni_estimating_function(const SurveyDataset& data, const MatchAssignment& assignment,
                               double alpha, double xi) {
    check_alignment(data, assignment);
    double n_hat = 0.0;
    double cdf_sum = 0.0;
    for (std::size_t i = 0; i < data.units.size(); ++i) {
        const Unit& u = data.units[i];
        const double inv_pi = 1.0 / u.inclusion_prob;
        n_hat += inv_pi;
        if (u.responded && respondent_outcome(data, i) <= xi)
            cdf_sum += inv_pi * (1.0 + assignment.weighted_multiplicity[i]);
    }
    return cdf_sum / n_hat - alpha;
}

PointEstimate nni_quantile_estimate(const SurveyDataset& data, const MatchAssignment& assignment,
                                    double alpha) {
    if (!(alpha > 0.0 && alpha < 1.0))
        throw std::invalid_argument("quantile level must be in (0,1)");
    check_alignment(data, assignment);

    double n_hat = 0.0;
    std::vector<std::pair<double, double>> support;  // (y, donor weight)
    for (std::size_t i = 0; i < data.units.size(); ++i) {
        const Unit& u = data.units[i];
        n_hat += 1.0 / u.inclusion_prob;
        if (u.responded)
            support.emplace_back(respondent_outcome(data, i),
                                 (1.0 + assignment.weighted_multiplicity[i]) / u.inclusion_prob);
    }
    if (support.empty()) throw std::invalid_argument("no respondents for quantile estimation");
    double total = 0.0;
    for (const auto& [y, w] : support) total += w;
    if (!(total > 0.0)) throw std::invalid_argument("all donor weights are zero");

    std::sort(support.begin(), support.end());
    const double target = alpha * n_hat;
    const double tol = 1e-9 * n_hat;
    double cum = 0.0;
    double value = support.back().first;
    for (const auto& [y, w] : support) {
        cum += w;
        if (cum >= target - tol) {
            value = y;
            break;
        }
    }

    PointEstimate out;
    out.value = value;
    out.donor_form_value = value;
    out.sample_size = data.units.size();
    out.population_size = data.population_size;
    out.respondent_count = support.size();
    return out;
}

}  // namespace nni
