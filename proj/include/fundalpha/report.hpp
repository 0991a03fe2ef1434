#pragma once

#include "fundalpha/boot.hpp"
#include "fundalpha/percentile.hpp"
#include "fundalpha/regress.hpp"

#include <array>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

namespace fundalpha {

/// Which %<Act definition a printed table shows.
///  Pooled: share of all simulated t(α) strictly below the actual percentile.
///  PerRun: share of runs whose same-percentile value is strictly below it.
enum class PctBelowMode { Pooled, PerRun };

std::string_view pct_below_mode_name(PctBelowMode m) noexcept;
PctBelowMode parse_pct_below_mode(std::string_view text);

struct PercentileRow {
    double pct = 0.0;
    double sim = 0.0;
    double act = 0.0;
    double below_pooled = 0.0;   // percent
    double below_per_run = 0.0;  // percent

    double below(PctBelowMode m) const noexcept {
        return m == PctBelowMode::Pooled ? below_pooled : below_per_run;
    }
};

struct ReportLabels {
    std::string group = "all";
    std::string model = "ff3";
    std::string period = "full";
};

struct PercentileReport {
    std::vector<PercentileRow> rows;
    std::string group_label;
    std::string model_label;
    std::string period_label;
    std::size_t fund_count = 0;
    std::size_t successful_runs = 0;
    PctBelowMode mode = PctBelowMode::Pooled;
};

/// Sim = mean over successful runs of the run percentile; Act = percentile
/// of the actual cross-section. Throws DataError when there is no actual
/// t(α) or no successful run.
PercentileReport build_percentile_report(const SimulationOutput& output, PctBelowMode mode,
                                         const ReportLabels& labels = {});

/// pct,sim,act,pct_below_act_pooled,pct_below_act_per_run (2 decimals).
void write_report_csv(std::ostream& out, const PercentileReport& report);

struct ReportProvenance {
    std::uint64_t seed = 0;
    std::size_t n_sims = 0;
    std::size_t empty_runs = 0;
    bool pooled_exact = true;
};

/// JSON sidecar with group/model/period/fund_count/seed/n_sims.
void write_report_sidecar(std::ostream& out, const PercentileReport& report,
                          const ReportProvenance& provenance);

/// Fixed-width Pct / Sim / Act / %<Act table using the report's mode.
void write_report_table(std::ostream& out, const PercentileReport& report);

struct CoefficientRow {
    std::string name;
    std::vector<double> percentiles;  // at CoefficientSummary::kPercentiles
    double mean = 0.0;
    std::size_t count = 0;
};

struct CoefficientSummary {
    static constexpr std::array<double, 5> kPercentiles{10, 25, 50, 75, 90};

    std::string group_label;
    std::vector<CoefficientRow> rows;
};

/// One row per coefficient (alpha, each factor) then per t-statistic.
/// Undefined t-statistics of degenerate fits are left out of their rows.
CoefficientSummary build_coefficient_summary(std::span<const RegressionResult> fits, Model model,
                                             const std::string& group_label);

/// coefficient,p10,p25,p50,p75,p90,mean,count. The alpha row is emitted in
/// percent per month as `alpha_pct`.
void write_coefficient_summary_csv(std::ostream& out, const CoefficientSummary& summary);

/// t_value,cdf_actual,cdf_simulated over the merged distinct support.
void emit_cdf(const TStatCrossSection& actual, std::span<const double> pooled_sim,
              std::ostream& out);
void emit_cdf(const TStatCrossSection& actual, std::span<const double> pooled_sim,
              const std::filesystem::path& path);

/// Line-oriented simulation artifacts: <prefix>_runs.csv, <prefix>_actual.csv
/// and <prefix>_pooled.csv, at full precision.
void write_simulation(const std::filesystem::path& prefix, const SimulationOutput& output);
SimulationOutput read_simulation(const std::filesystem::path& prefix);

} // namespace fundalpha
