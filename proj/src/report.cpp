#include "fundalpha/report.hpp"

#include "fundalpha/csv.hpp"
#include "fundalpha/error.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <numeric>
#include <ostream>
#include <stdexcept>

namespace fundalpha {

double percentile(std::span<const double> sorted, double p) {
    if (sorted.empty()) throw std::invalid_argument("percentile of an empty vector");
    if (!(p >= 0.0 && p <= 100.0)) throw std::invalid_argument("percentile outside [0, 100]");
    const double h = static_cast<double>(sorted.size() - 1) * p / 100.0;
    const auto lo = static_cast<std::size_t>(std::floor(h));
    if (lo + 1 >= sorted.size()) return sorted[sorted.size() - 1];
    const double frac = h - static_cast<double>(lo);
    return sorted[lo] + frac * (sorted[lo + 1] - sorted[lo]);
}

std::string_view pct_below_mode_name(PctBelowMode m) noexcept {
    return m == PctBelowMode::Pooled ? "pooled" : "per-run";
}

PctBelowMode parse_pct_below_mode(std::string_view text) {
    const std::string s = csv::lower(text);
    if (s == "pooled") return PctBelowMode::Pooled;
    if (s == "per-run" || s == "per_run" || s == "perrun") return PctBelowMode::PerRun;
    throw ConfigError("unknown %<Act mode '" + std::string(text) + "' (expected pooled or per-run)");
}

PercentileReport build_percentile_report(const SimulationOutput& output, PctBelowMode mode,
                                         const ReportLabels& labels) {
    if (output.actual.values.empty()) throw DataError("no actual t(α) values to report");
    std::vector<std::size_t> ok_runs;
    for (std::size_t r = 0; r < output.n_sims(); ++r) {
        if (output.run_ok(r)) ok_runs.push_back(r);
    }
    if (ok_runs.empty()) throw DataError("no successful simulation runs");

    PercentileReport rep;
    rep.group_label = labels.group;
    rep.model_label = labels.model;
    rep.period_label = labels.period;
    rep.fund_count = output.actual.fund_count();
    rep.successful_runs = ok_runs.size();
    rep.mode = mode;

    const auto& pooled = output.pooled_sim;
    for (std::size_t j = 0; j < output.pct_grid.size(); ++j) {
        PercentileRow row;
        row.pct = output.pct_grid[j];
        row.act = percentile(output.actual.values, row.pct);
        double sum = 0.0;
        std::size_t below_runs = 0;
        for (std::size_t r : ok_runs) {
            const double v = output.per_run_percentiles[r][j];
            sum += v;
            if (v < row.act) ++below_runs;
        }
        row.sim = sum / static_cast<double>(ok_runs.size());
        row.below_per_run = 100.0 * static_cast<double>(below_runs) / static_cast<double>(ok_runs.size());
        if (!pooled.empty()) {
            const auto below = std::lower_bound(pooled.begin(), pooled.end(), row.act) - pooled.begin();
            row.below_pooled = 100.0 * static_cast<double>(below) / static_cast<double>(pooled.size());
        }
        rep.rows.push_back(row);
    }
    return rep;
}

void write_report_csv(std::ostream& out, const PercentileReport& report) {
    out << "pct,sim,act,pct_below_act_pooled,pct_below_act_per_run\n";
    for (const auto& r : report.rows) {
        out << csv::format_decimal(r.pct) << ',' << csv::format_fixed(r.sim, 2) << ','
            << csv::format_fixed(r.act, 2) << ',' << csv::format_fixed(r.below_pooled, 2) << ','
            << csv::format_fixed(r.below_per_run, 2) << '\n';
    }
}

void write_report_sidecar(std::ostream& out, const PercentileReport& report,
                          const ReportProvenance& provenance) {
    nlohmann::ordered_json j;
    j["group"] = report.group_label;
    j["model"] = report.model_label;
    j["period"] = report.period_label;
    j["fund_count"] = report.fund_count;
    j["seed"] = provenance.seed;
    j["n_sims"] = provenance.n_sims;
    j["successful_runs"] = report.successful_runs;
    j["empty_runs"] = provenance.empty_runs;
    j["pct_below_act_mode"] = std::string(pct_below_mode_name(report.mode));
    j["pooled_exact"] = provenance.pooled_exact;
    j["pct_grid"] = nlohmann::json::array();
    for (const auto& r : report.rows) j["pct_grid"].push_back(r.pct);
    out << j.dump(2) << '\n';
}

void write_report_table(std::ostream& out, const PercentileReport& report) {
    out << report.model_label << " net returns, group " << report.group_label << ", period "
        << report.period_label << " (" << report.fund_count << " funds, %<Act "
        << pct_below_mode_name(report.mode) << ")\n";
    out << std::setw(5) << "Pct" << std::setw(9) << "Sim" << std::setw(9) << "Act" << std::setw(9)
        << "%<Act" << '\n';
    for (const auto& r : report.rows) {
        out << std::setw(5) << csv::format_decimal(r.pct) << std::setw(9) << csv::format_fixed(r.sim, 2)
            << std::setw(9) << csv::format_fixed(r.act, 2) << std::setw(9)
            << csv::format_fixed(r.below(report.mode), 2) << '\n';
    }
}

// ---------------------------------------------------------------------------

namespace {

CoefficientRow summarize(std::string name, std::vector<double> values) {
    CoefficientRow row;
    row.name = std::move(name);
    values.erase(std::remove_if(values.begin(), values.end(), [](double v) { return std::isnan(v); }),
                 values.end());
    row.count = values.size();
    if (values.empty()) {
        row.percentiles.assign(CoefficientSummary::kPercentiles.size(),
                               std::numeric_limits<double>::quiet_NaN());
        row.mean = std::numeric_limits<double>::quiet_NaN();
        return row;
    }
    std::sort(values.begin(), values.end());
    for (double p : CoefficientSummary::kPercentiles) row.percentiles.push_back(percentile(values, p));
    row.mean = std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(values.size());
    return row;
}

} // namespace

CoefficientSummary build_coefficient_summary(std::span<const RegressionResult> fits, Model model,
                                             const std::string& group_label) {
    if (fits.empty()) throw DataError("coefficient summary of an empty group");
    const auto factors = model_factors(model);
    const std::size_t p = factors.size() + 1;
    std::vector<std::string> names{"alpha"};
    for (Factor f : factors) names.emplace_back(factor_name(f));

    std::vector<std::vector<double>> coef(p), tstat(p);
    for (const auto& fit : fits) {
        if (fit.n_coef() != p) throw DataError("fit does not match model " + std::string(model_name(model)));
        for (std::size_t j = 0; j < p; ++j) {
            coef[j].push_back(fit.coefficient(j));
            tstat[j].push_back(fit.tstats[j]);
        }
    }
    CoefficientSummary s;
    s.group_label = group_label;
    for (std::size_t j = 0; j < p; ++j) s.rows.push_back(summarize(names[j], std::move(coef[j])));
    for (std::size_t j = 0; j < p; ++j) s.rows.push_back(summarize("t_" + names[j], std::move(tstat[j])));
    return s;
}

void write_coefficient_summary_csv(std::ostream& out, const CoefficientSummary& summary) {
    out << "coefficient";
    for (double p : CoefficientSummary::kPercentiles) out << ",p" << csv::format_decimal(p);
    out << ",mean,count\n";
    for (const auto& row : summary.rows) {
        const bool in_pct = row.name == "alpha";
        const double scale = in_pct ? 100.0 : 1.0;
        out << (in_pct ? "alpha_pct" : row.name);
        for (double v : row.percentiles) out << ',' << csv::format_decimal(v * scale);
        out << ',' << csv::format_decimal(row.mean * scale) << ',' << row.count << '\n';
    }
}

// ---------------------------------------------------------------------------

void emit_cdf(const TStatCrossSection& actual, std::span<const double> pooled_sim, std::ostream& out) {
    const auto& a = actual.values;
    const auto& s = pooled_sim;
    out << "t_value,cdf_actual,cdf_simulated\n";
    if (a.empty() || s.empty()) return;
    std::size_t ia = 0, is = 0;
    const double na = static_cast<double>(a.size());
    const double ns = static_cast<double>(s.size());
    while (ia < a.size() || is < s.size()) {
        double t = std::numeric_limits<double>::infinity();
        if (ia < a.size()) t = a[ia];
        if (is < s.size()) t = std::min(t, s[is]);
        while (ia < a.size() && a[ia] <= t) ++ia;
        while (is < s.size() && s[is] <= t) ++is;
        out << csv::format_decimal(t) << ',' << csv::format_decimal(static_cast<double>(ia) / na) << ','
            << csv::format_decimal(static_cast<double>(is) / ns) << '\n';
    }
}

void emit_cdf(const TStatCrossSection& actual, std::span<const double> pooled_sim,
              const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    emit_cdf(actual, pooled_sim, out);
}

// ---------------------------------------------------------------------------

namespace {

std::filesystem::path with_suffix(const std::filesystem::path& prefix, const char* suffix) {
    return prefix.string() + suffix;
}

std::ofstream open_out(const std::filesystem::path& p) {
    std::ofstream out(p, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + p.string());
    return out;
}

std::ifstream open_in(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    if (!in) throw std::runtime_error("cannot read " + p.string());
    return in;
}

void write_column(const std::filesystem::path& p, std::span<const double> values) {
    auto out = open_out(p);
    out << "t_alpha\n";
    for (double v : values) out << csv::format_decimal(v) << '\n';
}

std::vector<double> read_column(const std::filesystem::path& p) {
    auto in = open_in(p);
    std::string line;
    std::vector<double> v;
    if (!csv::next_line(in, line)) return v;
    while (csv::next_line(in, line)) v.push_back(csv::parse_decimal(line, p.string()));
    return v;
}

} // namespace

void write_simulation(const std::filesystem::path& prefix, const SimulationOutput& output) {
    {
        auto out = open_out(with_suffix(prefix, "_runs.csv"));
        out << "run,fund_count";
        for (double p : output.pct_grid) out << ",p" << csv::format_decimal(p);
        out << '\n';
        for (std::size_t r = 0; r < output.n_sims(); ++r) {
            out << r << ',' << output.run_fund_counts[r];
            for (double v : output.per_run_percentiles[r]) {
                out << ',';
                if (!std::isnan(v)) out << csv::format_decimal(v);
            }
            out << '\n';
        }
    }
    write_column(with_suffix(prefix, "_actual.csv"), output.actual.values);
    write_column(with_suffix(prefix, "_pooled.csv"), output.pooled_sim);
}

SimulationOutput read_simulation(const std::filesystem::path& prefix) {
    SimulationOutput out;
    const auto runs_path = with_suffix(prefix, "_runs.csv");
    auto in = open_in(runs_path);
    std::string line;
    if (!csv::next_line(in, line)) throw ParseError(runs_path.string() + " is empty");
    const auto header = csv::split(line);
    if (header.size() < 3 || header[0] != "run" || header[1] != "fund_count") {
        throw ParseError(runs_path.string() + ": unexpected header");
    }
    for (std::size_t j = 2; j < header.size(); ++j) {
        if (header[j].empty() || header[j][0] != 'p') {
            throw ParseError(runs_path.string() + ": bad percentile column " + header[j]);
        }
        out.pct_grid.push_back(csv::parse_decimal(std::string_view(header[j]).substr(1), runs_path.string()));
    }
    while (csv::next_line(in, line)) {
        const auto cells = csv::split(line);
        if (cells.size() != header.size()) throw ParseError(runs_path.string() + ": ragged row");
        const auto count = static_cast<std::size_t>(csv::parse_decimal(cells[1], runs_path.string()));
        std::vector<double> row;
        for (std::size_t j = 2; j < cells.size(); ++j) {
            row.push_back(cells[j].empty() ? std::numeric_limits<double>::quiet_NaN()
                                           : csv::parse_decimal(cells[j], runs_path.string()));
        }
        out.run_fund_counts.push_back(count);
        if (count == 0) ++out.empty_runs;
        out.per_run_percentiles.push_back(std::move(row));
    }
    out.actual = TStatCrossSection::from_unsorted(read_column(with_suffix(prefix, "_actual.csv")));
    out.pooled_sim = read_column(with_suffix(prefix, "_pooled.csv"));
    std::sort(out.pooled_sim.begin(), out.pooled_sim.end());
    out.pooled_total = std::accumulate(out.run_fund_counts.begin(), out.run_fund_counts.end(), std::size_t{0});
    out.pooled_exact = out.pooled_total == out.pooled_sim.size();
    return out;
}

} // namespace fundalpha
