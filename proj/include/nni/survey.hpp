#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <variant>
#include <vector>

namespace nni {

// One sampled (or population) unit. Covariates are always observed; the
// outcome is present only for respondents in estimation inputs.
struct Unit {
    std::int64_t id = 0;
    std::vector<double> x;
    std::optional<double> y;
    bool responded = false;       // response indicator
    double inclusion_prob = 1.0;  // first-order inclusion probability
};

// A finite population or a drawn sample, together with the known
// population size N. Single source of truth for all estimation.
struct SurveyDataset {
    std::vector<Unit> units;
    std::int64_t population_size = 0;

    std::size_t size() const { return units.size(); }
    std::size_t covariate_dim() const { return units.empty() ? 0 : units.front().x.size(); }
    std::size_t respondent_count() const;

    // Throws std::invalid_argument on any broken invariant: non-positive or
    // >1 inclusion probability, duplicate ids, ragged covariate dimensions.
    void validate() const;
};

// Design weights 1/(N * pi_i), one per unit.
std::vector<double> design_weights(const SurveyDataset& data);

struct SrsDesign {
    std::size_t sample_size = 0;
};

// Poisson sampling: unit i enters independently with probability
// expected_size * s_i / sum(s). Realized sample size is random.
struct PoissonPpsDesign {
    double expected_size = 0.0;
    std::vector<double> size_values;  // aligned with the population units
};

using SamplingDesign = std::variant<SrsDesign, PoissonPpsDesign>;

struct DrawResult {
    SurveyDataset sample;
    int clipped_probabilities = 0;  // count of pi_i >= 1 clipped to 1 - 1e-12
};

// Draws a sample from a fully enumerated population, attaching pi_i.
// Unit ordering is preserved from the population.
DrawResult draw_sample(const SurveyDataset& population, const SamplingDesign& design,
                       std::uint64_t seed);

// Horvitz-Thompson mean: N^{-1} sum g(y_i)/pi_i over all units.
// Every unit must carry an outcome; restrict to respondents first if needed.
double ht_estimate(const SurveyDataset& data, const std::function<double(double)>& g);

// Hajek mean: sum(g(y_i)/pi_i) / sum(1/pi_i).
double hajek_estimate(const SurveyDataset& data, const std::function<double(double)>& g);

// max_i(pi_i N/n) / min_i(pi_i N/n); reported as a design-balance diagnostic.
double design_balance_ratio(const SurveyDataset& data);

// CSV schema: header `unit_id,x1..xp,y,delta,pi`; y empty when delta=0.
// Errors carry the offending line number.
SurveyDataset read_survey_csv(const std::string& path, std::int64_t population_size);
void write_survey_csv(const SurveyDataset& data, const std::string& path);

}  // namespace nni
