#pragma once

#include <optional>
#include <string>
#include <vector>

#include "nni/estimators.hpp"
#include "nni/variance.hpp"

namespace nni {

// End-user estimation pipeline on a CSV dataset, driven by a flat
// key = value configuration file.
struct EstimateSettings {
    std::int64_t population_size = 0;  // required
    struct Target {
        std::string name;
        ParameterSpec spec;
    };
    std::vector<Target> targets;
    BasisSpec basis = BasisSpec::FirstOrder;
    bool naive_variance = false;  // proposed is the default
    bool bootstrap = false;       // jackknife is the default
    std::size_t bootstrap_reps = 200;
    std::optional<double> bandwidth;  // default: 1.5 n^{-1/5}
    std::uint64_t seed = 20260826;
};

EstimateSettings estimate_settings_from_config(const std::string& path);
std::string default_estimate_config_text();

// Full pipeline: read CSV, fit matching model, match, point estimate and
// replication variance per target. Deterministic for a fixed seed.
std::vector<VarianceReport> estimate_from_csv(const std::string& data_path,
                                              const std::string& config_path);

// Human-readable companion to the report CSV.
std::string summarize_reports(const std::vector<VarianceReport>& reports);

}  // namespace nni
