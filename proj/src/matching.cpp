#include "nni/matching.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace nni {

std::size_t basis_size(BasisSpec basis, std::size_t p) {
    // 1, x_1..x_p [, x_j^2, x_j x_k]
    return basis == BasisSpec::FirstOrder ? 1 + p : 1 + p + p * (p + 1) / 2;
}

std::vector<std::string> basis_term_names(BasisSpec basis, std::size_t p) {
    std::vector<std::string> names;
    names.reserve(basis_size(basis, p));
    names.emplace_back("1");
    for (std::size_t j = 1; j <= p; ++j) names.push_back("x" + std::to_string(j));
    if (basis == BasisSpec::FirstAndSecondOrder) {
        for (std::size_t j = 1; j <= p; ++j)
            for (std::size_t k = j; k <= p; ++k)
                names.push_back("x" + std::to_string(j) + "*x" + std::to_string(k));
    }
    return names;
}

std::vector<double> basis_terms(BasisSpec basis, const std::vector<double>& x) {
    std::vector<double> t;
    t.reserve(basis_size(basis, x.size()));
    t.push_back(1.0);
    t.insert(t.end(), x.begin(), x.end());
    if (basis == BasisSpec::FirstAndSecondOrder) {
        for (std::size_t j = 0; j < x.size(); ++j)
            for (std::size_t k = j; k < x.size(); ++k) t.push_back(x[j] * x[k]);
    }
    return t;
}

double MatchingModel::evaluate(const std::vector<double>& x) const {
    if (x.size() != covariate_dim)
        throw std::invalid_argument("covariate dimension mismatch in matching model");
    const auto t = basis_terms(basis, x);
    double m = 0.0;
    for (std::size_t j = 0; j < t.size(); ++j) m += coefficients[j] * t[j];
    return m;
}

MatchingModel fit_matching_model(const SurveyDataset& data, BasisSpec basis) {
    return fit_matching_model(data, basis, design_weights(data));
}

MatchingModel fit_matching_model(const SurveyDataset& data, BasisSpec basis,
                                 const std::vector<double>& weights) {
    const std::size_t p = data.covariate_dim();
    const std::size_t q = basis_size(basis, p);
    if (weights.size() != data.units.size())
        throw std::invalid_argument("fit weights do not align with dataset");

    std::vector<std::size_t> resp;
    for (std::size_t i = 0; i < data.units.size(); ++i)
        if (data.units[i].responded && weights[i] > 0.0) resp.push_back(i);
    if (resp.empty()) throw std::invalid_argument("cannot fit matching model: no respondents");
    if (resp.size() < q)
        throw std::invalid_argument("fewer respondents (" + std::to_string(resp.size()) +
                                    ") than basis terms (" + std::to_string(q) + ")");

    Eigen::MatrixXd X(resp.size(), q);
    Eigen::VectorXd z(resp.size());
    for (std::size_t r = 0; r < resp.size(); ++r) {
        const Unit& u = data.units[resp[r]];
        if (!u.y.has_value())
            throw std::invalid_argument("respondent without outcome (unit " + std::to_string(u.id) +
                                        ")");
        const double sw = std::sqrt(weights[resp[r]]);
        const auto t = basis_terms(basis, u.x);
        for (std::size_t j = 0; j < q; ++j) X(r, j) = sw * t[j];
        z(r) = sw * *u.y;
    }

    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(X);
    qr.setThreshold(1e-10);
    if (static_cast<std::size_t>(qr.rank()) < q) {
        const auto names = basis_term_names(basis, p);
        const auto perm = qr.colsPermutation().indices();
        std::string cols;
        for (Eigen::Index j = qr.rank(); j < static_cast<Eigen::Index>(q); ++j) {
            if (!cols.empty()) cols += ", ";
            cols += names[static_cast<std::size_t>(perm(j))];
        }
        throw std::invalid_argument("rank-deficient matching design; collinear columns: " + cols);
    }

    MatchingModel model;
    model.basis = basis;
    model.covariate_dim = p;
    const Eigen::VectorXd beta = qr.solve(z);
    model.coefficients.assign(beta.data(), beta.data() + q);
    return model;
}

std::vector<double> matching_values(const MatchingModel& model, const SurveyDataset& data) {
    std::vector<double> m;
    m.reserve(data.units.size());
    for (const auto& u : data.units) m.push_back(model.evaluate(u.x));
    return m;
}

std::vector<SortedRespondent> sorted_respondents(const std::vector<double>& m,
                                                 const SurveyDataset& data) {
    const std::size_t n = data.units.size();
    if (m.size() != n) throw std::invalid_argument("matching values do not align with dataset");
    std::vector<SortedRespondent> resp;
    resp.reserve(n);
    for (std::size_t i = 0; i < n; ++i)
        if (data.units[i].responded)
            resp.push_back({m[i], data.units[i].id, static_cast<std::uint32_t>(i)});
    std::sort(resp.begin(), resp.end(), [](const SortedRespondent& a, const SortedRespondent& b) {
        return a.m != b.m ? a.m < b.m : a.id < b.id;
    });
    return resp;
}

std::uint32_t nearest_respondent(const std::vector<SortedRespondent>& resp, double q) {
    if (resp.empty())
        throw std::invalid_argument("nearest-neighbor match requires at least one respondent");
    // First entry of the run sharing a given m value carries the smallest id.
    auto run_start = [&](std::size_t pos) {
        const double v = resp[pos].m;
        auto it = std::lower_bound(resp.begin(), resp.begin() + pos + 1, v,
                                   [](const SortedRespondent& e, double x) { return e.m < x; });
        return static_cast<std::size_t>(it - resp.begin());
    };

    auto it = std::lower_bound(resp.begin(), resp.end(), q,
                               [](const SortedRespondent& e, double v) { return e.m < v; });
    const std::size_t hi = static_cast<std::size_t>(it - resp.begin());
    double d_left = std::numeric_limits<double>::infinity();
    double d_right = std::numeric_limits<double>::infinity();
    if (hi > 0) d_left = q - resp[hi - 1].m;
    if (hi < resp.size()) d_right = resp[hi].m - q;

    std::size_t donor;
    if (d_left < d_right) {
        donor = run_start(hi - 1);
    } else if (d_right < d_left) {
        donor = hi;  // already the first of its run (everything before is < q)
    } else {
        const std::size_t l = run_start(hi - 1);
        donor = resp[l].id < resp[hi].id ? l : hi;
    }
    return resp[donor].index;
}

MatchAssignment nearest_neighbor_match(const std::vector<double>& m, const SurveyDataset& data) {
    const std::size_t n = data.units.size();
    const auto resp = sorted_respondents(m, data);
    if (resp.empty())
        throw std::invalid_argument("nearest-neighbor match requires at least one respondent");

    MatchAssignment out;
    out.donor_index.assign(n, -1);
    out.multiplicity.assign(n, 0);
    for (std::size_t j = 0; j < n; ++j) {
        if (data.units[j].responded) continue;
        const std::uint32_t donor = nearest_respondent(resp, m[j]);
        out.donor_index[j] = static_cast<int>(donor);
        ++out.multiplicity[donor];
    }
    out.weighted_multiplicity = weighted_multiplicity(out, data);
    return out;
}

std::vector<double> weighted_multiplicity(const MatchAssignment& assignment,
                                          const SurveyDataset& data) {
    const std::size_t n = data.units.size();
    if (assignment.donor_index.size() != n)
        throw std::invalid_argument("assignment does not align with dataset");
    std::vector<double> k(n, 0.0);
    for (std::size_t j = 0; j < n; ++j) {
        const int d = assignment.donor_index[j];
        if (d < 0) continue;
        k[d] += data.units[d].inclusion_prob / data.units[j].inclusion_prob;
    }
    return k;
}

double scalar_match_discrepancy(const std::vector<double>& m, const MatchAssignment& assignment,
                                const SurveyDataset& data) {
    double sum = 0.0;
    std::size_t count = 0;
    for (std::size_t j = 0; j < data.units.size(); ++j) {
        const int d = assignment.donor_index[j];
        if (d < 0) continue;
        sum += std::abs(m[static_cast<std::size_t>(d)] - m[j]);
        ++count;
    }
    return count == 0 ? 0.0 : sum / static_cast<double>(count);
}

MultivariateDiscrepancy mahalanobis_match_discrepancy(const SurveyDataset& data) {
    const std::size_t n = data.units.size();
    const std::size_t p = data.covariate_dim();
    MultivariateDiscrepancy out;

    Eigen::MatrixXd X(n, p);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < p; ++j) X(i, j) = data.units[i].x[j];
    const Eigen::RowVectorXd mean = X.colwise().mean();
    const Eigen::MatrixXd centered = X.rowwise() - mean;
    Eigen::MatrixXd cov = centered.transpose() * centered / static_cast<double>(n > 1 ? n - 1 : 1);

    Eigen::MatrixXd metric;
    Eigen::FullPivLU<Eigen::MatrixXd> lu(cov);
    if (lu.isInvertible()) {
        metric = lu.inverse();
    } else {
        metric = Eigen::MatrixXd::Identity(p, p);
        out.euclidean_fallback = true;
    }

    std::vector<std::size_t> resp;
    for (std::size_t i = 0; i < n; ++i)
        if (data.units[i].responded) resp.push_back(i);
    if (resp.empty()) throw std::invalid_argument("no respondents for multivariate matching");

    double sum = 0.0;
    std::size_t count = 0;
    Eigen::VectorXd diff(p);
    for (std::size_t j = 0; j < n; ++j) {
        if (data.units[j].responded) continue;
        double best = std::numeric_limits<double>::infinity();
        std::int64_t best_id = 0;
        for (std::size_t i : resp) {
            diff = (X.row(i) - X.row(j)).transpose();
            const double d2 = diff.dot(metric * diff);
            if (d2 < best || (d2 == best && data.units[i].id < best_id)) {
                best = d2;
                best_id = data.units[i].id;
            }
        }
        sum += std::sqrt(best);
        ++count;
    }
    out.mean_distance = count == 0 ? 0.0 : sum / static_cast<double>(count);
    return out;
}

}  // namespace nni
