#include "nni/simulation.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <mutex>
#include <stdexcept>
#include <thread>

#include "nni/config.hpp"
#include "nni/estimators.hpp"
#include "nni/random.hpp"
#include "nni/smoothers.hpp"
#include "nni/variance.hpp"

namespace nni {

namespace {
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
}

PopulationId population_from_string(const std::string& s) {
    if (s == "P1") return PopulationId::P1;
    if (s == "P2") return PopulationId::P2;
    if (s == "P3") return PopulationId::P3;
    if (s == "P4") return PopulationId::P4;
    if (s == "P5") return PopulationId::P5;
    if (s == "P6") return PopulationId::P6;
    throw std::invalid_argument("unknown population '" + s + "' (expected P1..P6)");
}

std::string to_string(PopulationId id) {
    switch (id) {
        case PopulationId::P1: return "P1";
        case PopulationId::P2: return "P2";
        case PopulationId::P3: return "P3";
        case PopulationId::P4: return "P4";
        case PopulationId::P5: return "P5";
        case PopulationId::P6: return "P6";
    }
    return "?";
}

std::size_t active_covariate_count(PopulationId id) {
    switch (id) {
        case PopulationId::P1:
        case PopulationId::P4: return 2;
        case PopulationId::P2:
        case PopulationId::P5: return 4;
        case PopulationId::P3:
        case PopulationId::P6: return 6;
    }
    return 0;
}

bool has_quadratic_terms(PopulationId id) {
    return id == PopulationId::P4 || id == PopulationId::P5 || id == PopulationId::P6;
}

double conditional_mean(PopulationId id, const std::vector<double>& x) {
    if (x.size() != active_covariate_count(id))
        throw std::invalid_argument("covariate dimension does not match population");
    double linear = 0.0;
    for (double v : x) linear += v;
    const double intercept = x.size() == 2 ? -1.0 : -1.5;
    double m = intercept + linear;
    if (has_quadratic_terms(id)) m += x[0] * x[0] + x[1] * x[1] - 2.0 / 3.0;
    return m;
}

double response_probability(const std::vector<double>& x) {
    double s = 0.0;
    for (double v : x) s += v;
    return 1.0 / (1.0 + std::exp(-s));
}

SurveyDataset generate_population(const PopulationSpec& spec, std::uint64_t seed) {
    SurveyDataset pop;
    pop.population_size = spec.size;
    pop.units.reserve(static_cast<std::size_t>(spec.size));
    Rng rng(seed);
    const std::size_t p = active_covariate_count(spec.id);
    std::size_t respondents = 0;
    for (std::int64_t i = 0; i < spec.size; ++i) {
        // Fixed draw order regardless of population id keeps streams stable.
        double draws[7];
        for (int j = 0; j < 3; ++j) draws[j] = rng.uniform();
        for (int j = 3; j < 6; ++j) draws[j] = rng.normal();
        const double e = rng.normal();

        Unit u;
        u.id = i + 1;
        u.x.assign(draws, draws + p);
        u.y = conditional_mean(spec.id, u.x) + e;
        u.responded = rng.bernoulli(response_probability(u.x));
        respondents += u.responded ? 1 : 0;
        pop.units.push_back(std::move(u));
    }
    const double rate = static_cast<double>(respondents) / static_cast<double>(spec.size);
    if (rate < 0.70 || rate > 0.80)
        throw std::runtime_error("realized response rate " + std::to_string(rate) +
                                 " outside [0.70, 0.80]");
    return pop;
}

std::vector<double> pps_size_values(const SurveyDataset& population, std::uint64_t seed) {
    Rng rng(seed);
    std::vector<double> s;
    s.reserve(population.units.size());
    for (const auto& u : population.units) {
        if (!u.y.has_value()) throw std::invalid_argument("size variable requires outcomes");
        s.push_back(std::log(std::abs(*u.y + rng.normal()) + 4.0));
    }
    return s;
}

double population_mean(const SurveyDataset& population) {
    double sum = 0.0;
    for (const auto& u : population.units) sum += *u.y;
    return sum / static_cast<double>(population.units.size());
}

double population_proportion_below(const SurveyDataset& population, double c) {
    double count = 0.0;
    for (const auto& u : population.units) count += *u.y < c ? 1.0 : 0.0;
    return count / static_cast<double>(population.units.size());
}

double population_quantile(const SurveyDataset& population, double alpha) {
    if (!(alpha > 0.0 && alpha < 1.0)) throw std::invalid_argument("alpha must be in (0,1)");
    std::vector<double> ys;
    ys.reserve(population.units.size());
    for (const auto& u : population.units) ys.push_back(*u.y);
    const auto k = static_cast<std::size_t>(
        std::ceil(alpha * static_cast<double>(ys.size()) - 1e-9));
    std::nth_element(ys.begin(), ys.begin() + (k - 1), ys.end());
    return ys[k - 1];
}

BasisSpec ScenarioConfig::effective_basis() const {
    if (matching_basis) return *matching_basis;
    return has_quadratic_terms(population.id) ? BasisSpec::FirstOrder
                                              : BasisSpec::FirstAndSecondOrder;
}

ScenarioConfig scenario_from_config_file(const std::string& path) {
    const Config cfg = Config::from_file(path);
    ScenarioConfig sc;
    sc.population.id = population_from_string(cfg.get("population", "P1"));
    sc.population.size = cfg.get_int("population_size", 50000);
    const std::string design = cfg.get("design", "S1");
    if (design == "S1")
        sc.design = DesignKind::Srs;
    else if (design == "S2")
        sc.design = DesignKind::PoissonPps;
    else
        throw std::runtime_error("design must be S1 or S2, got '" + design + "'");
    sc.srs_sample_size = static_cast<std::size_t>(cfg.get_int("n", 800));
    sc.pps_expected_size = cfg.get_double("expected_size", 400.0);
    const std::string basis = cfg.get("basis", "auto");
    if (basis == "first_order")
        sc.matching_basis = BasisSpec::FirstOrder;
    else if (basis == "second_order")
        sc.matching_basis = BasisSpec::FirstAndSecondOrder;
    else if (basis != "auto")
        throw std::runtime_error("basis must be auto, first_order or second_order");
    sc.mc_reps = static_cast<std::size_t>(cfg.get_int("mc_reps", 2000));
    sc.seed = static_cast<std::uint64_t>(cfg.get_int("seed", 20260826));
    sc.run_proposed = cfg.get_bool("proposed", true);
    sc.run_naive = cfg.get_bool("naive", true);
    sc.force_full_response = cfg.get_bool("full_response", false);
    sc.threads = static_cast<unsigned>(cfg.get_int("threads", 1));
    return sc;
}

std::string default_scenario_config_text() {
    return "# Simulation scenario configuration (key = value)\n"
           "population = P1          # P1..P6\n"
           "population_size = 50000\n"
           "design = S1              # S1: SRS, S2: Poisson PPS\n"
           "n = 800                  # SRS sample size\n"
           "expected_size = 400      # PPS expected sample size\n"
           "basis = auto             # auto | first_order | second_order\n"
           "mc_reps = 2000\n"
           "seed = 20260826\n"
           "proposed = true          # proposed jackknife variance\n"
           "naive = true             # naive jackknife baseline\n"
           "full_response = false    # oracle mode: no missingness\n"
           "threads = 1\n";
}

std::string ReplicateRow::csv_header() {
    return "rep,mu_hat,eta_hat,xi_hat,var_mu_prop,var_eta_prop,var_xi_prop,"
           "var_mu_naive,var_eta_naive,var_xi_naive,s_deriv,xi_prop_failed";
}

namespace {

void append_cell(std::string& out, double v) {
    out.push_back(',');
    if (std::isnan(v)) return;
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    out += buf;
}

}  // namespace

std::string ReplicateRow::csv_row() const {
    std::string out = std::to_string(index);
    append_cell(out, mu_hat);
    append_cell(out, eta_hat);
    append_cell(out, xi_hat);
    append_cell(out, var_mu_prop);
    append_cell(out, var_eta_prop);
    append_cell(out, var_xi_prop);
    append_cell(out, var_mu_naive);
    append_cell(out, var_eta_naive);
    append_cell(out, var_xi_naive);
    append_cell(out, s_deriv);
    out.push_back(',');
    out += xi_prop_failed ? "1" : "0";
    return out;
}

namespace {

struct ReplicateOutcome {
    ReplicateRow row;
    int clipped = 0;
    double balance_ratio = 0.0;
};

double naive_variance(const std::vector<double>& estimates, const ReplicationScheme& scheme,
                      double center) {
    double v = 0.0;
    for (std::size_t k = 0; k < estimates.size(); ++k) {
        if (std::isnan(estimates[k])) continue;
        const double d = estimates[k] - center;
        v += scheme.factors[k] * d * d;
    }
    return v;
}

ReplicateOutcome run_replicate(const ScenarioConfig& cfg, const SurveyDataset& population,
                               const SamplingDesign& design, double c, std::size_t rep) {
    ReplicateOutcome out;
    ReplicateRow& row = out.row;
    row.index = rep;
    row.var_mu_prop = row.var_eta_prop = row.var_xi_prop = kNaN;
    row.var_mu_naive = row.var_eta_naive = row.var_xi_naive = kNaN;
    row.s_deriv = kNaN;

    auto draw = draw_sample(population, design, mix_seed(cfg.seed, 1000 + rep));
    out.clipped = draw.clipped_probabilities;
    const SurveyDataset& sample = draw.sample;
    out.balance_ratio = design_balance_ratio(sample);

    const auto model = fit_matching_model(sample, cfg.effective_basis());
    const auto m = matching_values(model, sample);
    const auto assignment = nearest_neighbor_match(m, sample);

    const auto mean_spec = ParameterSpec::mean();
    const auto prop_spec = ParameterSpec::proportion_below(c);
    const double alpha = 0.5;

    row.mu_hat = nni_mean_estimate(sample, assignment, mean_spec).value;
    row.eta_hat = nni_mean_estimate(sample, assignment, prop_spec).value;
    row.xi_hat = nni_quantile_estimate(sample, assignment, alpha).value;

    if (!cfg.run_proposed && !cfg.run_naive) return out;
    const auto scheme = build_jackknife(design_weights(sample));

    if (cfg.run_proposed) {
        const auto kc = KernelConfig::for_sample_size(sample.size());
        std::vector<double> m_r, w_r, y_r, eta_z, s_z;
        const auto base = design_weights(sample);
        for (std::size_t i = 0; i < sample.units.size(); ++i) {
            const Unit& u = sample.units[i];
            if (!u.responded) continue;
            m_r.push_back(m[i]);
            w_r.push_back(base[i]);
            y_r.push_back(*u.y);
            eta_z.push_back(*u.y < c ? 1.0 : 0.0);
            s_z.push_back((*u.y <= row.xi_hat ? 1.0 : 0.0) - alpha);
        }
        const auto curve_mu = kernel_regression(m_r, y_r, w_r, kc);
        const auto curve_eta = kernel_regression(m_r, eta_z, w_r, kc);
        const auto curve_s = kernel_regression(m_r, s_z, w_r, kc);

        row.var_mu_prop = proposed_variance_mean(sample, assignment, mean_spec, curve_mu, m,
                                                 scheme, row.mu_hat)
                              .variance;
        row.var_eta_prop = proposed_variance_mean(sample, assignment, prop_spec, curve_eta, m,
                                                  scheme, row.eta_hat)
                               .variance;
        try {
            const auto rep_xi = proposed_variance_quantile(sample, assignment, alpha, curve_s, kc,
                                                           m, scheme, row.xi_hat);
            row.var_xi_prop = rep_xi.variance;
            row.s_deriv = rep_xi.derivative.value_or(kNaN);
        } catch (const std::runtime_error&) {
            row.xi_prop_failed = true;
        }
    }

    if (cfg.run_naive) {
        const auto reps =
            naive_replicates(sample, cfg.effective_basis(),
                             {mean_spec, prop_spec, ParameterSpec::quantile(alpha)}, scheme);
        row.var_mu_naive = naive_variance(reps.estimates[0], scheme, row.mu_hat);
        row.var_eta_naive = naive_variance(reps.estimates[1], scheme, row.eta_hat);
        row.var_xi_naive = naive_variance(reps.estimates[2], scheme, row.xi_hat);
    }
    return out;
}

}  // namespace

MonteCarloReport run_scenario(const ScenarioConfig& cfg) {
    const auto t0 = std::chrono::steady_clock::now();
    MonteCarloReport report;

    SurveyDataset population = generate_population(cfg.population, mix_seed(cfg.seed, 0));
    if (cfg.force_full_response)
        for (auto& u : population.units) u.responded = true;

    report.true_mu = population_mean(population);
    report.proportion_threshold = population_quantile(population, 0.8);
    report.true_eta = population_proportion_below(population, report.proportion_threshold);
    report.true_xi = population_quantile(population, 0.5);

    SamplingDesign design = SrsDesign{cfg.srs_sample_size};
    if (cfg.design == DesignKind::PoissonPps)
        design = PoissonPpsDesign{cfg.pps_expected_size,
                                  pps_size_values(population, mix_seed(cfg.seed, 1))};

    std::vector<ReplicateOutcome> outcomes(cfg.mc_reps);
    const unsigned n_threads = std::max(1u, cfg.threads);
    std::exception_ptr error;
    std::mutex error_mutex;
    auto worker = [&](unsigned t) {
        for (std::size_t rep = t; rep < cfg.mc_reps; rep += n_threads) {
            try {
                outcomes[rep] = run_replicate(cfg, population, design,
                                              report.proportion_threshold, rep);
            } catch (...) {
                std::lock_guard<std::mutex> lock(error_mutex);
                if (!error) error = std::current_exception();
                return;
            }
        }
    };
    if (n_threads == 1) {
        worker(0);
    } else {
        std::vector<std::thread> pool;
        for (unsigned t = 0; t < n_threads; ++t) pool.emplace_back(worker, t);
        for (auto& th : pool) th.join();
    }
    if (error) std::rethrow_exception(error);

    report.replicates.reserve(cfg.mc_reps);
    for (auto& o : outcomes) {
        report.replicates.push_back(std::move(o.row));
        report.clipped_probabilities += o.clipped;
        report.max_balance_ratio = std::max(report.max_balance_ratio, o.balance_ratio);
        if (o.row.xi_prop_failed) ++report.failures;
    }
    compute_metrics(report, cfg);
    report.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return report;
}

namespace {

// Plain sequential reductions in replicate order, so an independent
// one-pass recomputation over the replicate log reproduces every metric
// bit for bit.
TargetMetrics reduce_target(const std::vector<ReplicateRow>& rows, double truth,
                            double ReplicateRow::*point, double ReplicateRow::*var_prop,
                            double ReplicateRow::*var_naive, bool want_prop, bool want_naive) {
    TargetMetrics tm;
    tm.truth = truth;
    const auto n = static_cast<double>(rows.size());
    double mean = 0.0;
    for (const auto& r : rows) mean += r.*point;
    mean /= n;
    double ss = 0.0;
    for (const auto& r : rows) {
        const double d = r.*point - mean;
        ss += d * d;
    }
    tm.bias = mean - truth;
    tm.mc_variance = rows.size() > 1 ? ss / (n - 1.0) : 0.0;
    tm.se = std::sqrt(tm.mc_variance);

    auto reduce_method = [&](double ReplicateRow::*var) {
        MethodMetrics mm;
        double sum_v = 0.0, hits = 0.0;
        std::size_t used = 0;
        for (const auto& r : rows) {
            const double v = r.*var;
            if (std::isnan(v)) continue;
            ++used;
            sum_v += v;
            const double half = kZ975 * std::sqrt(v);
            if (r.*point - half <= truth && truth <= r.*point + half) hits += 1.0;
        }
        mm.used_reps = used;
        if (used > 0) {
            mm.mean_variance = sum_v / static_cast<double>(used);
            mm.coverage_pct = 100.0 * hits / static_cast<double>(used);
            if (tm.mc_variance > 0.0)
                mm.relative_bias_pct = 100.0 * (mm.mean_variance - tm.mc_variance) /
                                       tm.mc_variance;
        }
        return mm;
    };
    if (want_prop) tm.proposed = reduce_method(var_prop);
    if (want_naive) tm.naive = reduce_method(var_naive);
    return tm;
}

}  // namespace

void compute_metrics(MonteCarloReport& report, const ScenarioConfig& cfg) {
    const auto& rows = report.replicates;
    if (rows.empty()) return;
    report.mu = reduce_target(rows, report.true_mu, &ReplicateRow::mu_hat,
                              &ReplicateRow::var_mu_prop, &ReplicateRow::var_mu_naive,
                              cfg.run_proposed, cfg.run_naive);
    report.eta = reduce_target(rows, report.true_eta, &ReplicateRow::eta_hat,
                               &ReplicateRow::var_eta_prop, &ReplicateRow::var_eta_naive,
                               cfg.run_proposed, cfg.run_naive);
    report.xi = reduce_target(rows, report.true_xi, &ReplicateRow::xi_hat,
                              &ReplicateRow::var_xi_prop, &ReplicateRow::var_xi_naive,
                              cfg.run_proposed, cfg.run_naive);
}

BiasDecomposition bias_decomposition(PopulationId id, double population_mean_value,
                                     const SurveyDataset& sample,
                                     const MatchAssignment& assignment) {
    const double N = static_cast<double>(sample.population_size);
    const double sqrt_n = std::sqrt(static_cast<double>(sample.units.size()));

    double d_sum = 0.0, b_sum = 0.0, nni_sum = 0.0;
    for (std::size_t i = 0; i < sample.units.size(); ++i) {
        const Unit& u = sample.units[i];
        const double inv_pi = 1.0 / u.inclusion_prob;
        const double mu_i = conditional_mean(id, u.x);
        if (u.responded) {
            const double k_i = assignment.weighted_multiplicity[i];
            d_sum += inv_pi * (mu_i + (1.0 + k_i) * (*u.y - mu_i));
            nni_sum += inv_pi * *u.y;
        } else {
            const auto d = static_cast<std::size_t>(assignment.donor_index[i]);
            const double mu_donor = conditional_mean(id, sample.units[d].x);
            d_sum += inv_pi * mu_i;
            b_sum += inv_pi * (mu_donor - mu_i);
            nni_sum += inv_pi * *sample.units[d].y;
        }
    }

    BiasDecomposition out;
    out.d_term = sqrt_n * (d_sum / N - population_mean_value);
    out.b_term = sqrt_n / N * b_sum;
    out.scaled_error = sqrt_n * (nni_sum / N - population_mean_value);
    return out;
}

std::vector<TableRow> make_table_rows(const ScenarioConfig& cfg, const MonteCarloReport& report) {
    const bool accurate = !has_quadratic_terms(cfg.population.id) ||
                          cfg.effective_basis() == BasisSpec::FirstAndSecondOrder;
    auto row = [&](const char* target, const TargetMetrics& tm) {
        TableRow r;
        r.target = target;
        r.population = to_string(cfg.population.id);
        r.accurate_matching = accurate;
        r.bias = tm.bias;
        r.se = tm.se;
        if (tm.proposed) {
            r.proposed_rb = tm.proposed->relative_bias_pct;
            r.proposed_cr = tm.proposed->coverage_pct;
        }
        if (tm.naive) {
            r.naive_rb = tm.naive->relative_bias_pct;
            r.naive_cr = tm.naive->coverage_pct;
        }
        return r;
    };
    return {row("mu", report.mu), row("eta", report.eta), row("xi", report.xi)};
}

namespace {

std::string format_rb(const std::optional<double>& rb) {
    if (!rb) return "-";
    if (*rb > 1000.0) return ">1000";
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.1f", *rb);
    return buf;
}

std::string format_cr(const std::optional<double>& cr) {
    if (!cr) return "-";
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.1f", *cr);
    return buf;
}

}  // namespace

std::string emit_table_text(const std::vector<TableRow>& rows) {
    std::string out;
    char line[160];
    std::snprintf(line, sizeof line, "%-8s %-4s %-2s %8s %8s %10s %8s %10s %8s\n", "target",
                  "pop", "m", "Bias", "S.E.", "PropJK-RB", "CR", "NaiveJK-RB", "CR");
    out += line;
    out += std::string(73, '-') + "\n";
    for (const auto& r : rows) {
        std::snprintf(line, sizeof line, "%-8s %-4s %-2s %8.2f %8.2f %10s %8s %10s %8s\n",
                      r.target.c_str(), r.population.c_str(), r.accurate_matching ? "a" : "i",
                      100.0 * r.bias, 100.0 * r.se, format_rb(r.proposed_rb).c_str(),
                      format_cr(r.proposed_cr).c_str(), format_rb(r.naive_rb).c_str(),
                      format_cr(r.naive_cr).c_str());
        out += line;
    }
    return out;
}

std::string emit_table_csv(const std::vector<TableRow>& rows) {
    std::string out =
        "target,population,m_accurate,bias_x100,se_x100,prop_rb_pct,prop_cr_pct,"
        "naive_rb_pct,naive_cr_pct\n";
    char buf[64];
    auto cell = [&](const std::optional<double>& v) {
        if (!v) return std::string();
        std::snprintf(buf, sizeof buf, "%.17g", *v);
        return std::string(buf);
    };
    for (const auto& r : rows) {
        std::snprintf(buf, sizeof buf, "%.17g", 100.0 * r.bias);
        out += r.target + "," + r.population + "," + (r.accurate_matching ? "a" : "i") + "," + buf;
        std::snprintf(buf, sizeof buf, "%.17g", 100.0 * r.se);
        out += std::string(",") + buf;
        out += "," + cell(r.proposed_rb) + "," + cell(r.proposed_cr) + "," + cell(r.naive_rb) +
               "," + cell(r.naive_cr) + "\n";
    }
    return out;
}

void write_replicates_csv(const MonteCarloReport& report, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open " + path + " for writing");
    out << ReplicateRow::csv_header() << '\n';
    for (const auto& r : report.replicates) out << r.csv_row() << '\n';
}

void write_report_csv(const ScenarioConfig& cfg, const MonteCarloReport& report,
                      const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open " + path + " for writing");
    char buf[64];
    auto num = [&](double v) {
        std::snprintf(buf, sizeof buf, "%.17g", v);
        return std::string(buf);
    };
    out << "# population=" << to_string(cfg.population.id)
        << " design=" << (cfg.design == DesignKind::Srs ? "S1" : "S2")
        << " mc_reps=" << report.replicates.size() << " seed=" << cfg.seed
        << " basis=" << (cfg.effective_basis() == BasisSpec::FirstOrder ? "first_order"
                                                                        : "second_order")
        << '\n';
    out << "# c=" << num(report.proportion_threshold)
        << " failures=" << report.failures
        << " max_balance_ratio=" << num(report.max_balance_ratio)
        << " clipped=" << report.clipped_probabilities
        << " wall_seconds=" << num(report.wall_seconds) << '\n';
    out << "target,truth,bias,se,mc_variance,method,mean_variance,relative_bias_pct,"
           "coverage_pct,used_reps\n";
    auto rowline = [&](const char* target, const TargetMetrics& tm, const char* method,
                       const std::optional<MethodMetrics>& mm) {
        if (!mm) return;
        out << target << ',' << num(tm.truth) << ',' << num(tm.bias) << ',' << num(tm.se) << ','
            << num(tm.mc_variance) << ',' << method << ',' << num(mm->mean_variance) << ','
            << num(mm->relative_bias_pct) << ',' << num(mm->coverage_pct) << ',' << mm->used_reps
            << '\n';
    };
    auto target_rows = [&](const char* name, const TargetMetrics& tm) {
        out << name << ',' << num(tm.truth) << ',' << num(tm.bias) << ',' << num(tm.se) << ','
            << num(tm.mc_variance) << ",point,,,," << report.replicates.size() << '\n';
        rowline(name, tm, "proposed", tm.proposed);
        rowline(name, tm, "naive", tm.naive);
    };
    target_rows("mu", report.mu);
    target_rows("eta", report.eta);
    target_rows("xi", report.xi);
}

}  // namespace nni
