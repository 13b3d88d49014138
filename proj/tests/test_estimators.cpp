#include <doctest.h>

#include <cmath>
#include <limits>
#include <vector>

#include <nni/estimators.hpp>
#include <nni/matching.hpp>
#include <nni/random.hpp>
#include <nni/survey.hpp>

using namespace nni;

namespace {

// The worked 5-unit instance: N = n = 5, pi = 1, respondents {1,2,5}
// with y = (1,2,5) and m = (0,1,3); nonrespondents {3,4} at m = (0.4,2.1).
SurveyDataset worked_instance() {
    SurveyDataset d;
    d.population_size = 5;
    d.units.push_back({1, {0.0}, 1.0, true, 1.0});
    d.units.push_back({2, {1.0}, 2.0, true, 1.0});
    d.units.push_back({3, {0.4}, std::nullopt, false, 1.0});
    d.units.push_back({4, {2.1}, std::nullopt, false, 1.0});
    d.units.push_back({5, {3.0}, 5.0, true, 1.0});
    return d;
}

std::vector<double> raw_m(const SurveyDataset& d) {
    std::vector<double> m;
    for (const auto& u : d.units) m.push_back(u.x[0]);
    return m;
}

SurveyDataset random_instance(Rng& rng, std::size_t n) {
    SurveyDataset d;
    d.population_size = static_cast<std::int64_t>(3 * n);
    for (std::size_t i = 0; i < n; ++i) {
        Unit u;
        u.id = static_cast<std::int64_t>(i + 1);
        u.x = {rng.normal()};
        u.responded = rng.bernoulli(0.65);
        if (u.responded) u.y = rng.normal() * 2.0 + 0.5;
        u.inclusion_prob = 0.05 + 0.9 * rng.uniform();
        d.units.push_back(u);
    }
    if (d.respondent_count() == 0) {
        d.units[0].responded = true;
        d.units[0].y = 0.0;
    }
    return d;
}

}  // namespace

TEST_CASE("worked instance: both mean forms give 2.8") {
    auto d = worked_instance();
    const auto a = nearest_neighbor_match(raw_m(d), d);
    const auto est = nni_mean_estimate(d, a, ParameterSpec::mean());
    CHECK(est.value == doctest::Approx(2.8).epsilon(1e-14));
    CHECK(est.donor_form_value == doctest::Approx(2.8).epsilon(1e-14));
    CHECK(est.respondent_count == 3);
    CHECK(est.sample_size == 5);
}

TEST_CASE("worked instance: estimating function at xi = 2 is 0.1") {
    auto d = worked_instance();
    const auto a = nearest_neighbor_match(raw_m(d), d);
    // F(2) = (2 + 1 + 0)/5 = 0.6, minus alpha = 0.5
    CHECK(nni_estimating_function(d, a, 0.5, 2.0) == doctest::Approx(0.1).epsilon(1e-13));
}

TEST_CASE("estimating function saturates at the extremes") {
    auto d = worked_instance();
    const auto a = nearest_neighbor_match(raw_m(d), d);
    CHECK(nni_estimating_function(d, a, 0.3, std::numeric_limits<double>::infinity()) ==
          doctest::Approx(0.7).epsilon(1e-14));
    CHECK(nni_estimating_function(d, a, 0.3, -100.0) == doctest::Approx(-0.3).epsilon(1e-14));
}

TEST_CASE("worked instance: median is 2") {
    auto d = worked_instance();
    const auto a = nearest_neighbor_match(raw_m(d), d);
    CHECK(nni_quantile_estimate(d, a, 0.5).value == 2.0);
}

TEST_CASE("textbook step-cdf inverse on fully observed data") {
    SurveyDataset d;
    d.population_size = 5;
    for (int i = 0; i < 5; ++i) d.units.push_back({i + 1, {0.0}, double(i + 1), true, 1.0});
    const auto a = nearest_neighbor_match(raw_m(d), d);
    CHECK(nni_quantile_estimate(d, a, 0.5).value == 3.0);
    CHECK(nni_quantile_estimate(d, a, 0.2).value == 1.0);
    CHECK(nni_quantile_estimate(d, a, 1.0 - 1e-9).value == 5.0);
}

TEST_CASE("no missing data reduces to horvitz-thompson") {
    Rng rng(8);
    for (int t = 0; t < 20; ++t) {
        SurveyDataset d;
        d.population_size = 40;
        for (int i = 0; i < 15; ++i)
            d.units.push_back({i + 1, {rng.uniform()}, rng.normal(), true,
                               0.1 + 0.8 * rng.uniform()});
        const auto a = nearest_neighbor_match(raw_m(d), d);
        const auto est = nni_mean_estimate(d, a, ParameterSpec::mean());
        const double ht = ht_estimate(d, [](double y) { return y; });
        CHECK(est.value == doctest::Approx(ht).epsilon(1e-14));
    }
}

TEST_CASE("dual-form identity over 1000 random instances") {
    Rng rng(90210);
    for (int t = 0; t < 1000; ++t) {
        auto d = random_instance(rng, 30);
        const auto a = nearest_neighbor_match(raw_m(d), d);
        for (const auto& spec :
             {ParameterSpec::mean(), ParameterSpec::proportion_below(0.4),
              ParameterSpec::mean_of([](double y) { return y * y; })}) {
            const auto est = nni_mean_estimate(d, a, spec);
            const double scale = std::max(1.0, std::fabs(est.value));
            CHECK(std::fabs(est.value - est.donor_form_value) <= 1e-12 * scale);
        }
    }
}

TEST_CASE("estimating function is nondecreasing and quantile monotone in alpha") {
    Rng rng(404);
    auto d = random_instance(rng, 60);
    const auto a = nearest_neighbor_match(raw_m(d), d);
    double prev = -1.0;
    for (double xi = -4.0; xi <= 4.0; xi += 0.25) {
        const double s = nni_estimating_function(d, a, 0.5, xi);
        CHECK(s >= prev - 1e-14);
        prev = s;
    }
    double prev_q = -std::numeric_limits<double>::infinity();
    for (double alpha : {0.1, 0.25, 0.5, 0.75, 0.9}) {
        const double q = nni_quantile_estimate(d, a, alpha).value;
        CHECK(q >= prev_q);
        prev_q = q;
    }
}

TEST_CASE("proportion-quantile duality on distinct fully observed data") {
    SurveyDataset d;
    d.population_size = 7;
    const std::vector<double> ys = {-2.0, -0.5, 0.25, 1.0, 2.5, 3.75, 9.0};
    for (int i = 0; i < 7; ++i) d.units.push_back({i + 1, {0.0}, ys[i], true, 1.0});
    const auto a = nearest_neighbor_match(raw_m(d), d);
    for (double alpha : {0.15, 0.45, 0.72, 0.99}) {
        const double q = nni_quantile_estimate(d, a, alpha).value;
        double expected = ys.back();
        for (double y : ys) {
            double share = 0.0;
            for (double v : ys) share += (v <= y) ? 1.0 / 7.0 : 0.0;
            if (share >= alpha - 1e-12) {
                expected = y;
                break;
            }
        }
        CHECK(q == expected);
    }
}

TEST_CASE("translation equivariance of the quantile") {
    Rng rng(55);
    auto d = random_instance(rng, 50);
    const auto a = nearest_neighbor_match(raw_m(d), d);
    const double q = nni_quantile_estimate(d, a, 0.5).value;
    const double eta = nni_mean_estimate(d, a, ParameterSpec::proportion_below(0.3)).value;
    const double t = 1.75;
    auto shifted = d;
    for (auto& u : shifted.units)
        if (u.y) u.y = *u.y + t;
    const auto a2 = nearest_neighbor_match(raw_m(shifted), shifted);
    CHECK(nni_quantile_estimate(shifted, a2, 0.5).value == doctest::Approx(q + t).epsilon(1e-13));
    CHECK(nni_mean_estimate(shifted, a2, ParameterSpec::proportion_below(0.3 + t)).value ==
          doctest::Approx(eta).epsilon(1e-13));
}

TEST_CASE("proportion uses the strict indicator, quantile score the weak one") {
    const auto prop = ParameterSpec::proportion_below(2.0);
    CHECK(prop.score(2.0) == 0.0);  // I(y < c) at y = c
    CHECK(prop.score(1.999999) == 1.0);
    auto d = worked_instance();
    const auto a = nearest_neighbor_match(raw_m(d), d);
    // F uses I(y <= xi): mass at exactly y = 2 counts
    CHECK(nni_estimating_function(d, a, 0.0, 2.0) == doctest::Approx(0.6).epsilon(1e-13));
    CHECK(nni_mean_estimate(d, a, prop).value == doctest::Approx(0.4).epsilon(1e-13));
}

TEST_CASE("assignment mismatch is a hard error") {
    auto d = worked_instance();
    const auto a = nearest_neighbor_match(raw_m(d), d);
    auto truncated = d;
    truncated.units.pop_back();
    CHECK_THROWS(nni_mean_estimate(truncated, a, ParameterSpec::mean()));
}
