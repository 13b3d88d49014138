#include <doctest.h>

#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include <nni/matching.hpp>
#include <nni/random.hpp>
#include <nni/survey.hpp>

using namespace nni;

namespace {

// Dataset with explicit matching values carried as the (single) covariate,
// so m can be forwarded directly without a fitted model.
SurveyDataset from_m(const std::vector<double>& m, const std::vector<bool>& responded,
                     const std::vector<double>& y, double pi = 1.0) {
    SurveyDataset d;
    d.population_size = static_cast<std::int64_t>(m.size());
    for (std::size_t i = 0; i < m.size(); ++i) {
        Unit u;
        u.id = static_cast<std::int64_t>(i + 1);
        u.x = {m[i]};
        u.responded = responded[i];
        if (responded[i]) u.y = y[i];
        u.inclusion_prob = pi;
        d.units.push_back(u);
    }
    return d;
}

SurveyDataset random_instance(Rng& rng, std::size_t n) {
    SurveyDataset d;
    d.population_size = static_cast<std::int64_t>(4 * n);
    for (std::size_t i = 0; i < n; ++i) {
        Unit u;
        u.id = static_cast<std::int64_t>(i + 1);
        u.x = {rng.uniform()};
        u.responded = rng.bernoulli(0.7);
        if (u.responded) u.y = rng.normal();
        u.inclusion_prob = 0.05 + 0.9 * rng.uniform();
        d.units.push_back(u);
    }
    if (d.respondent_count() == 0) {
        d.units[0].responded = true;
        d.units[0].y = 0.0;
    }
    return d;
}

std::vector<double> raw_m(const SurveyDataset& d) {
    std::vector<double> m;
    for (const auto& u : d.units) m.push_back(u.x[0]);
    return m;
}

}  // namespace

TEST_CASE("basis sizes and names") {
    CHECK(basis_size(BasisSpec::FirstOrder, 3) == 4);
    CHECK(basis_size(BasisSpec::FirstAndSecondOrder, 3) == 10);  // 1 + 3 + 3 squares + 3 cross
    const auto names = basis_term_names(BasisSpec::FirstAndSecondOrder, 2);
    CHECK(names.size() == 6);
    CHECK(names[0] == "1");
}

TEST_CASE("fit recovers an exactly linear response") {
    SurveyDataset d;
    d.population_size = 30;
    for (int i = 0; i < 12; ++i) {
        const double x = 0.1 * i;
        d.units.push_back({i + 1, {x}, 2.0 * x + 1.0, true, 0.4});
    }
    const auto model = fit_matching_model(d, BasisSpec::FirstOrder);
    REQUIRE(model.coefficients.size() == 2);
    CHECK(model.coefficients[0] == doctest::Approx(1.0).epsilon(1e-10));
    CHECK(model.coefficients[1] == doctest::Approx(2.0).epsilon(1e-10));
    CHECK(model.evaluate({3.0}) == doctest::Approx(7.0).epsilon(1e-10));
}

TEST_CASE("fit recovers a pure square with the second-order basis") {
    SurveyDataset d;
    d.population_size = 40;
    Rng rng(11);
    for (int i = 0; i < 25; ++i) {
        const double x = rng.uniform(-1, 1);
        d.units.push_back({i + 1, {x}, x * x, true, 0.5});
    }
    const auto model = fit_matching_model(d, BasisSpec::FirstAndSecondOrder);
    REQUIRE(model.coefficients.size() == 3);  // 1, x, x^2
    CHECK(std::fabs(model.coefficients[0]) < 1e-10);
    CHECK(std::fabs(model.coefficients[1]) < 1e-10);
    CHECK(model.coefficients[2] == doctest::Approx(1.0).epsilon(1e-10));
}

TEST_CASE("rank deficiency reports the collinear column") {
    SurveyDataset d;
    d.population_size = 20;
    Rng rng(13);
    for (int i = 0; i < 10; ++i) {
        const double x = rng.uniform();
        d.units.push_back({i + 1, {x, 2.0 * x}, x, true, 0.5});  // x2 = 2 x1
    }
    try {
        fit_matching_model(d, BasisSpec::FirstOrder);
        FAIL("expected rank-deficiency error");
    } catch (const std::invalid_argument& e) {
        CHECK(std::string(e.what()).find("collinear") != std::string::npos);
    }
}

TEST_CASE("fit requires enough respondents") {
    SurveyDataset d;
    d.population_size = 10;
    d.units.push_back({1, {0.5}, std::nullopt, false, 0.5});
    CHECK_THROWS(fit_matching_model(d, BasisSpec::FirstOrder));
}

TEST_CASE("nearest neighbor hand example") {
    // respondents m = (0, 1, 3) with ids 1..3; recipients 0.4, 2.1, 2.9
    auto d = from_m({0.0, 1.0, 3.0, 0.4, 2.1, 2.9}, {true, true, true, false, false, false},
                    {10, 20, 30, 0, 0, 0});
    const auto a = nearest_neighbor_match(raw_m(d), d);
    CHECK(a.donor_index[3] == 0);
    CHECK(a.donor_index[4] == 2);
    CHECK(a.donor_index[5] == 2);
    CHECK(a.multiplicity[0] == 1);
    CHECK(a.multiplicity[1] == 0);
    CHECK(a.multiplicity[2] == 2);
    // equal pi: weighted multiplicity equals the raw count
    CHECK(a.weighted_multiplicity[0] == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(a.weighted_multiplicity[2] == doctest::Approx(2.0).epsilon(1e-15));
}

TEST_CASE("single respondent serves every recipient") {
    auto d = from_m({0.5, 0.1, 0.9, 0.4}, {true, false, false, false}, {3, 0, 0, 0});
    const auto a = nearest_neighbor_match(raw_m(d), d);
    CHECK(a.multiplicity[0] == 3);
    for (std::size_t j = 1; j < 4; ++j) CHECK(a.donor_index[j] == 0);
}

TEST_CASE("distance tie goes to the smaller unit id") {
    auto d = from_m({0.0, 2.0, 1.0}, {true, true, false}, {5, 9, 0});
    const auto a = nearest_neighbor_match(raw_m(d), d);
    CHECK(a.donor_index[2] == 0);
}

TEST_CASE("weighted multiplicity direct formula") {
    // donor pi = 0.2, single recipient pi = 0.1 -> k = 0.2/0.1 = 2
    SurveyDataset d;
    d.population_size = 10;
    d.units.push_back({1, {0.0}, 4.0, true, 0.2});
    d.units.push_back({2, {0.1}, std::nullopt, false, 0.1});
    const auto a = nearest_neighbor_match(raw_m(d), d);
    CHECK(a.weighted_multiplicity[0] == doctest::Approx(2.0).epsilon(1e-14));
    const auto k = weighted_multiplicity(a, d);
    CHECK(k[0] == doctest::Approx(2.0).epsilon(1e-14));
}

TEST_CASE("multiplicity conservation and appendix bounds on random instances") {
    Rng rng(2024);
    for (int t = 0; t < 200; ++t) {
        auto d = random_instance(rng, 40);
        const auto m = raw_m(d);
        const auto a = nearest_neighbor_match(m, d);
        int nonresp = 0, ktilde_sum = 0;
        for (std::size_t i = 0; i < d.size(); ++i) {
            if (!d.units[i].responded) ++nonresp;
            ktilde_sum += a.multiplicity[i];
        }
        CHECK(ktilde_sum == nonresp);
        // (A3): omega_min k~ <= k <= omega_max k~ with the pi-ratio extremes
        double lo = 1e300, hi = 0.0;
        for (const auto& u : d.units) {
            lo = std::min(lo, u.inclusion_prob);
            hi = std::max(hi, u.inclusion_prob);
        }
        for (std::size_t i = 0; i < d.size(); ++i) {
            if (!d.units[i].responded) continue;
            const double pi_i = d.units[i].inclusion_prob;
            const double wmin = pi_i / hi, wmax = pi_i / lo;
            CHECK(a.weighted_multiplicity[i] >= wmin * a.multiplicity[i] - 1e-12);
            CHECK(a.weighted_multiplicity[i] <= wmax * a.multiplicity[i] + 1e-12);
        }
    }
}

TEST_CASE("donor optimality by exhaustive scan") {
    Rng rng(501);
    for (int t = 0; t < 30; ++t) {
        auto d = random_instance(rng, 60);
        const auto m = raw_m(d);
        const auto a = nearest_neighbor_match(m, d);
        for (std::size_t j = 0; j < d.size(); ++j) {
            if (d.units[j].responded) continue;
            const auto dj = static_cast<std::size_t>(a.donor_index[j]);
            const double best = std::fabs(m[dj] - m[j]);
            for (std::size_t i = 0; i < d.size(); ++i)
                if (d.units[i].responded) CHECK(std::fabs(m[i] - m[j]) >= best - 1e-15);
        }
    }
}

TEST_CASE("matching is deterministic") {
    Rng rng(77);
    auto d = random_instance(rng, 50);
    const auto m = raw_m(d);
    const auto a = nearest_neighbor_match(m, d);
    const auto b = nearest_neighbor_match(m, d);
    CHECK(a.donor_index == b.donor_index);
    CHECK(a.multiplicity == b.multiplicity);
    CHECK(a.weighted_multiplicity == b.weighted_multiplicity);
}

TEST_CASE("scalar discrepancy shrinks roughly like 1/n") {
    Rng rng(31);
    auto gap_at = [&](std::size_t n) {
        double total = 0.0;
        const int reps = 20;
        for (int r = 0; r < reps; ++r) {
            auto d = random_instance(rng, n);
            const auto m = raw_m(d);
            const auto a = nearest_neighbor_match(m, d);
            total += scalar_match_discrepancy(m, a, d);
        }
        return total / reps;
    };
    const double g200 = gap_at(200), g800 = gap_at(800), g3200 = gap_at(3200);
    CHECK(g800 < g200);
    CHECK(g3200 < g800);
    const double slope = std::log(g3200 / g200) / std::log(3200.0 / 200.0);
    CHECK(slope < -0.8);
}

TEST_CASE("four-dimensional mahalanobis matching decays much slower") {
    Rng rng(32);
    auto gap_at = [&](std::size_t n) {
        double total = 0.0;
        const int reps = 10;
        for (int r = 0; r < reps; ++r) {
            SurveyDataset d;
            d.population_size = static_cast<std::int64_t>(4 * n);
            for (std::size_t i = 0; i < n; ++i) {
                Unit u;
                u.id = static_cast<std::int64_t>(i + 1);
                u.x = {rng.uniform(), rng.uniform(), rng.normal(), rng.normal()};
                u.responded = rng.bernoulli(0.75);
                if (u.responded) u.y = rng.normal();
                u.inclusion_prob = 0.5;
                d.units.push_back(u);
            }
            if (d.respondent_count() == 0) continue;
            total += mahalanobis_match_discrepancy(d).mean_distance;
        }
        return total / reps;
    };
    const double g200 = gap_at(200), g3200 = gap_at(3200);
    const double slope = std::log(g3200 / g200) / std::log(3200.0 / 200.0);
    CHECK(slope > -0.45);
    CHECK(slope < 0.0);
}

TEST_CASE("mahalanobis falls back to euclidean on a singular covariance") {
    SurveyDataset d;
    d.population_size = 20;
    for (int i = 0; i < 8; ++i) {
        const double x = 0.25 * i;
        Unit u;
        u.id = i + 1;
        u.x = {x, 2.0 * x};  // perfectly collinear covariates
        u.responded = i % 2 == 0;
        if (u.responded) u.y = x;
        u.inclusion_prob = 0.5;
        d.units.push_back(u);
    }
    const auto r = mahalanobis_match_discrepancy(d);
    CHECK(r.euclidean_fallback);
    CHECK(r.mean_distance > 0.0);
}

TEST_CASE("weighted refit drops zero-weight respondents") {
    SurveyDataset d;
    d.population_size = 30;
    for (int i = 0; i < 10; ++i) {
        const double x = 0.2 * i;
        d.units.push_back({i + 1, {x}, 3.0 * x - 1.0, true, 0.4});
    }
    d.units[4].y = 500.0;  // gross outlier
    std::vector<double> w(10, 1.0);
    w[4] = 0.0;
    const auto model = fit_matching_model(d, BasisSpec::FirstOrder, w);
    CHECK(model.coefficients[0] == doctest::Approx(-1.0).epsilon(1e-9));
    CHECK(model.coefficients[1] == doctest::Approx(3.0).epsilon(1e-9));
}
