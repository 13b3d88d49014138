#include <CLI11.hpp>
#include <filesystem>
#include <fstream>
#include <iostream>

#include "nni/estimate.hpp"
#include "nni/estimators.hpp"
#include "nni/matching.hpp"
#include "nni/random.hpp"
#include "nni/simulation.hpp"
#include "nni/smoothers.hpp"
#include "nni/variance.hpp"

namespace fs = std::filesystem;

namespace {

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
    out << text;
}

int run_simulate(const std::string& scenario_path, const std::string& out_dir, bool fast,
                 std::optional<std::uint64_t> seed_override) {
    nni::ScenarioConfig cfg = nni::scenario_from_config_file(scenario_path);
    if (fast) cfg.mc_reps = 500;
    if (seed_override) cfg.seed = *seed_override;

    const auto report = nni::run_scenario(cfg);
    fs::create_directories(out_dir);
    nni::write_report_csv(cfg, report, (fs::path(out_dir) / "report.csv").string());
    nni::write_replicates_csv(report, (fs::path(out_dir) / "replicates.csv").string());
    const auto rows = nni::make_table_rows(cfg, report);
    write_text(fs::path(out_dir) / "table.txt", nni::emit_table_text(rows));

    std::cout << nni::emit_table_text(rows);
    std::cout << "reps=" << report.replicates.size() << " failures=" << report.failures
              << " max_balance_ratio=" << report.max_balance_ratio
              << " wall=" << report.wall_seconds << "s\n";
    return 0;
}

int run_estimate(const std::string& data_path, const std::string& config_path,
                 const std::string& out_dir) {
    const auto reports = nni::estimate_from_csv(data_path, config_path);
    fs::create_directories(out_dir);
    std::string csv = nni::VarianceReport::csv_header() + "\n";
    for (const auto& r : reports) csv += r.csv_row() + "\n";
    write_text(fs::path(out_dir) / "report.csv", csv);
    write_text(fs::path(out_dir) / "summary.txt", nni::summarize_reports(reports));
    std::cout << nni::summarize_reports(reports);
    return 0;
}

int run_diagnose(const std::string& scenario_path) {
    const nni::ScenarioConfig cfg = nni::scenario_from_config_file(scenario_path);
    const auto population =
        nni::generate_population(cfg.population, nni::mix_seed(cfg.seed, 0));
    const double mu = nni::population_mean(population);

    nni::SamplingDesign design = nni::SrsDesign{cfg.srs_sample_size};
    if (cfg.design == nni::DesignKind::PoissonPps)
        design = nni::PoissonPpsDesign{cfg.pps_expected_size,
                                       nni::pps_size_values(population, nni::mix_seed(cfg.seed, 1))};
    const auto sample = nni::draw_sample(population, design, nni::mix_seed(cfg.seed, 1000)).sample;

    const auto model = nni::fit_matching_model(sample, cfg.effective_basis());
    const auto m = nni::matching_values(model, sample);
    const auto assignment = nni::nearest_neighbor_match(m, sample);
    const auto decomp = nni::bias_decomposition(cfg.population.id, mu, sample, assignment);
    const double discrepancy = nni::scalar_match_discrepancy(m, assignment, sample);

    std::cout << "population " << nni::to_string(cfg.population.id) << ", n=" << sample.size()
              << ", respondents=" << sample.respondent_count() << "\n"
              << "D_N            = " << decomp.d_term << "\n"
              << "B_N            = " << decomp.b_term << "\n"
              << "sqrt(n)*error  = " << decomp.scaled_error << "\n"
              << "identity resid = " << decomp.d_term + decomp.b_term - decomp.scaled_error << "\n"
              << "mean |m gap|   = " << discrepancy << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Design-weighted nearest-neighbor imputation: estimation, replication "
                 "variance, and the simulation lab"};
    app.require_subcommand(0, 1);

    bool print_config = false;
    app.add_flag("--print-config", print_config, "print default config files and exit");

    auto* simulate = app.add_subcommand("simulate", "run a Monte Carlo scenario");
    std::string scenario_path, out_dir = "out";
    bool fast = false;
    std::optional<std::uint64_t> seed_override;
    simulate->add_option("--scenario", scenario_path, "scenario config file")->required();
    simulate->add_option("--out", out_dir, "output directory");
    simulate->add_flag("--fast", fast, "500 Monte Carlo replicates instead of the configured count");
    simulate->add_option("--seed", seed_override, "override the scenario seed");

    auto* estimate = app.add_subcommand("estimate", "estimate from a CSV dataset");
    std::string data_path, config_path, est_out = "out";
    estimate->add_option("--data", data_path, "input CSV (unit_id,x1..xp,y,delta,pi)")->required();
    estimate->add_option("--config", config_path, "estimation config file")->required();
    estimate->add_option("--out", est_out, "output directory");

    auto* diagnose = app.add_subcommand("diagnose-bias", "matching-bias decomposition on one sample");
    std::string diag_scenario;
    diagnose->add_option("--scenario", diag_scenario, "scenario config file")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (print_config) {
            std::cout << "# --- simulate scenario config ---\n"
                      << nni::default_scenario_config_text()
                      << "\n# --- estimate config ---\n"
                      << nni::default_estimate_config_text();
            return 0;
        }
        if (simulate->parsed()) return run_simulate(scenario_path, out_dir, fast, seed_override);
        if (estimate->parsed()) return run_estimate(data_path, config_path, est_out);
        if (diagnose->parsed()) return run_diagnose(diag_scenario);
        std::cout << app.help();
        return 0;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
