#include "nni/estimate.hpp"

#include <cmath>
#include <cstdio>
#include <sstream>
#include <stdexcept>
#include <tuple>

#include "nni/config.hpp"
#include "nni/matching.hpp"
#include "nni/smoothers.hpp"
#include "nni/survey.hpp"

namespace nni {

namespace {

EstimateSettings::Target parse_target(const std::string& token) {
    EstimateSettings::Target t;
    const auto colon = token.find(':');
    const std::string kind = token.substr(0, colon);
    if (kind == "mean") {
        t.name = "mean";
        t.spec = ParameterSpec::mean();
        return t;
    }
    if (colon == std::string::npos)
        throw std::runtime_error("target '" + token + "' needs a parameter, e.g. quantile:0.5");
    const double value = std::stod(token.substr(colon + 1));
    if (kind == "proportion") {
        t.name = "proportion_below_" + token.substr(colon + 1);
        t.spec = ParameterSpec::proportion_below(value);
        return t;
    }
    if (kind == "quantile") {
        t.name = "quantile_" + token.substr(colon + 1);
        t.spec = ParameterSpec::quantile(value);
        return t;
    }
    throw std::runtime_error("unknown target kind '" + kind + "'");
}

VarianceReport naive_report(const SurveyDataset& data, BasisSpec basis, const ParameterSpec& spec,
                            const ReplicationScheme& scheme, double point) {
    const auto reps = naive_replicates(data, basis, {spec}, scheme);
    double v = 0.0;
    for (std::size_t k = 0; k < reps.estimates[0].size(); ++k)
        if (!std::isnan(reps.estimates[0][k])) {
            const double d = reps.estimates[0][k] - point;
            v += scheme.factors[k] * d * d;
        }
    VarianceReport report;
    report.method = "naive";
    report.point = point;
    report.variance = v;
    report.replicate_count = scheme.replicate_count();
    std::tie(report.ci_low, report.ci_high) = confidence_interval(point, v);
    return report;
}

}  // namespace

EstimateSettings estimate_settings_from_config(const std::string& path) {
    const Config cfg = Config::from_file(path);
    EstimateSettings s;
    s.population_size = cfg.get_int("N", 0);
    if (s.population_size <= 0)
        throw std::runtime_error(path + ": config must set a positive population size N");

    std::stringstream targets(cfg.get("targets", "mean"));
    std::string token;
    while (std::getline(targets, token, ',')) {
        const auto a = token.find_first_not_of(" \t");
        if (a == std::string::npos) continue;
        const auto b = token.find_last_not_of(" \t");
        s.targets.push_back(parse_target(token.substr(a, b - a + 1)));
    }
    if (s.targets.empty()) throw std::runtime_error(path + ": no targets configured");

    const std::string basis = cfg.get("basis", "first_order");
    if (basis == "first_order")
        s.basis = BasisSpec::FirstOrder;
    else if (basis == "second_order")
        s.basis = BasisSpec::FirstAndSecondOrder;
    else
        throw std::runtime_error(path + ": basis must be first_order or second_order");

    const std::string variance = cfg.get("variance", "proposed");
    if (variance == "naive")
        s.naive_variance = true;
    else if (variance != "proposed")
        throw std::runtime_error(path + ": variance must be proposed or naive");

    const std::string replication = cfg.get("replication", "jackknife");
    if (replication == "bootstrap")
        s.bootstrap = true;
    else if (replication != "jackknife")
        throw std::runtime_error(path + ": replication must be jackknife or bootstrap");
    s.bootstrap_reps = static_cast<std::size_t>(cfg.get_int("bootstrap_reps", 200));

    const std::string bw = cfg.get("bandwidth", "auto");
    if (bw != "auto") s.bandwidth = cfg.get_double("bandwidth", 0.0);
    s.seed = static_cast<std::uint64_t>(cfg.get_int("seed", 20260826));
    return s;
}

std::string default_estimate_config_text() {
    return "# Estimation configuration (key = value)\n"
           "N = 0                       # population size (required)\n"
           "targets = mean              # comma list: mean, proportion:c, quantile:a\n"
           "basis = first_order         # first_order | second_order\n"
           "variance = proposed         # proposed | naive\n"
           "replication = jackknife     # jackknife | bootstrap\n"
           "bootstrap_reps = 200\n"
           "bandwidth = auto            # auto: 1.5 n^(-1/5)\n"
           "seed = 20260826\n";
}

std::vector<VarianceReport> estimate_from_csv(const std::string& data_path,
                                              const std::string& config_path) {
    const EstimateSettings settings = estimate_settings_from_config(config_path);
    const SurveyDataset data = read_survey_csv(data_path, settings.population_size);
    if (data.units.empty()) throw std::runtime_error(data_path + ": no data rows");

    const auto model = fit_matching_model(data, settings.basis);
    const auto m = matching_values(model, data);
    const auto assignment = nearest_neighbor_match(m, data);
    const auto base = design_weights(data);
    const auto scheme = settings.bootstrap
                            ? build_bootstrap(base, settings.bootstrap_reps, settings.seed)
                            : build_jackknife(base);
    const auto kc = settings.bandwidth ? KernelConfig::with_bandwidth(*settings.bandwidth)
                                       : KernelConfig::for_sample_size(data.size());

    std::vector<double> m_r, w_r;
    std::vector<std::size_t> resp;
    for (std::size_t i = 0; i < data.units.size(); ++i) {
        if (!data.units[i].responded) continue;
        resp.push_back(i);
        m_r.push_back(m[i]);
        w_r.push_back(base[i]);
    }

    std::vector<VarianceReport> reports;
    for (const auto& target : settings.targets) {
        VarianceReport report;
        if (target.spec.kind == ParameterSpec::Kind::Quantile) {
            const double xi = nni_quantile_estimate(data, assignment, target.spec.alpha).value;
            if (settings.naive_variance) {
                report = naive_report(data, settings.basis, target.spec, scheme, xi);
                report.target = target.name;
            } else {
                std::vector<double> s_z;
                for (std::size_t i : resp)
                    s_z.push_back((*data.units[i].y <= xi ? 1.0 : 0.0) - target.spec.alpha);
                const auto curve = kernel_regression(m_r, s_z, w_r, kc);
                report = proposed_variance_quantile(data, assignment, target.spec.alpha, curve,
                                                    kc, m, scheme, xi);
                report.target = target.name;
            }
        } else {
            const double point = nni_mean_estimate(data, assignment, target.spec).value;
            if (settings.naive_variance) {
                report = naive_report(data, settings.basis, target.spec, scheme, point);
                report.target = target.name;
            } else {
                std::vector<double> z;
                for (std::size_t i : resp) z.push_back(target.spec.score(*data.units[i].y));
                const auto curve = kernel_regression(m_r, z, w_r, kc);
                report = proposed_variance_mean(data, assignment, target.spec, curve, m, scheme,
                                                point);
                report.target = target.name;
            }
        }
        reports.push_back(std::move(report));
    }
    return reports;
}

std::string summarize_reports(const std::vector<VarianceReport>& reports) {
    std::string out;
    char line[256];
    for (const auto& r : reports) {
        std::snprintf(line, sizeof line,
                      "%-24s %-9s point=%.6f  se=%.6f  95%% CI [%.6f, %.6f]  L=%zu\n",
                      r.target.c_str(), r.method.c_str(), r.point, std::sqrt(r.variance),
                      r.ci_low, r.ci_high, r.replicate_count);
        out += line;
    }
    return out;
}

}  // namespace nni
