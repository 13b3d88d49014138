#include "nni/survey.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <sstream>
#include <stdexcept>
#include <unordered_set>

#include "nni/random.hpp"

namespace nni {

std::size_t SurveyDataset::respondent_count() const {
    std::size_t r = 0;
    for (const auto& u : units) r += u.responded ? 1 : 0;
    return r;
}

void SurveyDataset::validate() const {
    if (population_size <= 0) throw std::invalid_argument("population size must be positive");
    const std::size_t p = covariate_dim();
    std::unordered_set<std::int64_t> seen;
    seen.reserve(units.size());
    for (const auto& u : units) {
        if (!(u.inclusion_prob > 0.0) || u.inclusion_prob > 1.0)
            throw std::invalid_argument("inclusion probability out of (0,1] for unit " +
                                        std::to_string(u.id));
        if (u.x.size() != p)
            throw std::invalid_argument("ragged covariate dimension at unit " + std::to_string(u.id));
        if (!seen.insert(u.id).second)
            throw std::invalid_argument("duplicate unit id " + std::to_string(u.id));
    }
}

std::vector<double> design_weights(const SurveyDataset& data) {
    std::vector<double> w;
    w.reserve(data.units.size());
    const double n = static_cast<double>(data.population_size);
    for (const auto& u : data.units) {
        if (!(u.inclusion_prob > 0.0))
            throw std::invalid_argument("non-positive inclusion probability");
        w.push_back(1.0 / (n * u.inclusion_prob));
    }
    return w;
}

DrawResult draw_sample(const SurveyDataset& population, const SamplingDesign& design,
                       std::uint64_t seed) {
    DrawResult out;
    out.sample.population_size = population.population_size;
    Rng rng(seed);
    const std::size_t N = population.units.size();

    if (const auto* srs = std::get_if<SrsDesign>(&design)) {
        const std::size_t n = srs->sample_size;
        if (n > N) throw std::invalid_argument("SRS sample size exceeds population size");
        // Partial Fisher-Yates, then restore population order.
        std::vector<std::uint32_t> idx(N);
        std::iota(idx.begin(), idx.end(), 0u);
        for (std::size_t i = 0; i < n; ++i) {
            const std::size_t j = i + rng.below(N - i);
            std::swap(idx[i], idx[j]);
        }
        idx.resize(n);
        std::sort(idx.begin(), idx.end());
        const double pi = static_cast<double>(n) / static_cast<double>(N);
        out.sample.units.reserve(n);
        for (auto i : idx) {
            Unit u = population.units[i];
            u.inclusion_prob = pi;
            out.sample.units.push_back(std::move(u));
        }
        return out;
    }

    const auto& pps = std::get<PoissonPpsDesign>(design);
    if (pps.size_values.size() != N)
        throw std::invalid_argument("size variable count does not match population");
    double total = 0.0;
    for (double s : pps.size_values) {
        if (!(s > 0.0)) throw std::invalid_argument("size values must be positive");
        total += s;
    }
    for (std::size_t i = 0; i < N; ++i) {
        double pi = pps.expected_size * pps.size_values[i] / total;
        if (pi >= 1.0) {
            pi = 1.0 - 1e-12;
            ++out.clipped_probabilities;
        }
        if (rng.bernoulli(pi)) {
            Unit u = population.units[i];
            u.inclusion_prob = pi;
            out.sample.units.push_back(std::move(u));
        }
    }
    return out;
}

double ht_estimate(const SurveyDataset& data, const std::function<double(double)>& g) {
    double sum = 0.0;
    for (const auto& u : data.units) {
        if (!u.y.has_value())
            throw std::invalid_argument("missing outcome in Horvitz-Thompson sum (unit " +
                                        std::to_string(u.id) + ")");
        if (!(u.inclusion_prob > 0.0))
            throw std::invalid_argument("non-positive inclusion probability");
        sum += g(*u.y) / u.inclusion_prob;
    }
    return sum / static_cast<double>(data.population_size);
}

double hajek_estimate(const SurveyDataset& data, const std::function<double(double)>& g) {
    if (data.units.empty()) throw std::invalid_argument("Hajek estimate of an empty sample");
    double num = 0.0, den = 0.0;
    for (const auto& u : data.units) {
        if (!u.y.has_value())
            throw std::invalid_argument("missing outcome in Hajek sum (unit " +
                                        std::to_string(u.id) + ")");
        num += g(*u.y) / u.inclusion_prob;
        den += 1.0 / u.inclusion_prob;
    }
    return num / den;
}

double design_balance_ratio(const SurveyDataset& data) {
    if (data.units.empty()) throw std::invalid_argument("empty sample");
    const double scale = static_cast<double>(data.population_size) /
                         static_cast<double>(data.units.size());
    double lo = data.units.front().inclusion_prob * scale;
    double hi = lo;
    for (const auto& u : data.units) {
        const double v = u.inclusion_prob * scale;
        lo = std::min(lo, v);
        hi = std::max(hi, v);
    }
    return hi / lo;
}

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : line) {
        if (c == ',') {
            out.push_back(cur);
            cur.clear();
        } else if (c != '\r') {
            cur.push_back(c);
        }
    }
    out.push_back(cur);
    return out;
}

[[noreturn]] void csv_fail(const std::string& path, std::size_t line, const std::string& msg) {
    throw std::runtime_error(path + ":" + std::to_string(line) + ": " + msg);
}

double parse_double(const std::string& path, std::size_t line, const std::string& s,
                    const char* what) {
    try {
        std::size_t pos = 0;
        const double v = std::stod(s, &pos);
        if (pos != s.size()) csv_fail(path, line, std::string("trailing characters in ") + what);
        return v;
    } catch (const std::invalid_argument&) {
        csv_fail(path, line, std::string("cannot parse ") + what + " '" + s + "'");
    } catch (const std::out_of_range&) {
        csv_fail(path, line, std::string("out-of-range ") + what + " '" + s + "'");
    }
}

}  // namespace

SurveyDataset read_survey_csv(const std::string& path, std::int64_t population_size) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path);
    SurveyDataset data;
    data.population_size = population_size;

    std::string line;
    std::size_t lineno = 0;
    if (!std::getline(in, line)) throw std::runtime_error(path + ": empty file");
    ++lineno;
    const auto header = split_csv_line(line);
    if (header.size() < 4 || header.front() != "unit_id")
        csv_fail(path, lineno, "expected header unit_id,x1..xp,y,delta,pi");
    const std::size_t p = header.size() - 4;
    if (p < 1) csv_fail(path, lineno, "at least one covariate column required");
    if (header[header.size() - 3] != "y" || header[header.size() - 2] != "delta" ||
        header[header.size() - 1] != "pi")
        csv_fail(path, lineno, "trailing columns must be y,delta,pi");

    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        const auto cells = split_csv_line(line);
        if (cells.size() != header.size())
            csv_fail(path, lineno, "expected " + std::to_string(header.size()) + " columns, got " +
                                       std::to_string(cells.size()));
        Unit u;
        u.id = static_cast<std::int64_t>(parse_double(path, lineno, cells[0], "unit_id"));
        u.x.reserve(p);
        for (std::size_t j = 0; j < p; ++j)
            u.x.push_back(parse_double(path, lineno, cells[1 + j], "covariate"));
        const std::string& ycell = cells[1 + p];
        const double delta = parse_double(path, lineno, cells[2 + p], "delta");
        if (delta != 0.0 && delta != 1.0) csv_fail(path, lineno, "delta must be 0 or 1");
        u.responded = delta == 1.0;
        if (u.responded) {
            if (ycell.empty()) csv_fail(path, lineno, "respondent without outcome");
            u.y = parse_double(path, lineno, ycell, "y");
        } else if (!ycell.empty()) {
            csv_fail(path, lineno, "outcome given for nonrespondent");
        }
        u.inclusion_prob = parse_double(path, lineno, cells[3 + p], "pi");
        data.units.push_back(std::move(u));
    }
    data.validate();
    return data;
}

void write_survey_csv(const SurveyDataset& data, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open " + path + " for writing");
    const std::size_t p = data.covariate_dim();
    out << "unit_id";
    for (std::size_t j = 1; j <= p; ++j) out << ",x" << j;
    out << ",y,delta,pi\n";
    char buf[64];
    for (const auto& u : data.units) {
        out << u.id;
        for (double v : u.x) {
            std::snprintf(buf, sizeof buf, "%.17g", v);
            out << ',' << buf;
        }
        out << ',';
        if (u.responded && u.y.has_value()) {
            std::snprintf(buf, sizeof buf, "%.17g", *u.y);
            out << buf;
        }
        out << ',' << (u.responded ? 1 : 0);
        std::snprintf(buf, sizeof buf, "%.17g", u.inclusion_prob);
        out << ',' << buf << '\n';
    }
}

}  // namespace nni
