#pragma once

#include "fundalpha/panel.hpp"
#include "fundalpha/regress.hpp"

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

namespace fundalpha {

/// Row labels of the published percentile tables.
std::vector<double> default_pct_grid();

struct SimConfig {
    std::size_t n_sims = 10000;
    std::uint64_t base_seed = 0;
    std::size_t min_resampled_obs = 12;
    Model model = Model::FF3;
    std::vector<double> pct_grid = default_pct_grid();
    /// Worker threads (0 = all hardware threads). Never affects results.
    unsigned threads = 1;
    /// 0 keeps every simulated t(α). Otherwise the pool is reduced to this
    /// many values by a hash-keyed bottom-k sample, which is independent of
    /// run order.
    std::size_t pooled_cap = 0;

    /// Throws ConfigError.
    void validate() const;
};

/// SplitMix64 finaliser (Stafford variant 13).
std::uint64_t mix64(std::uint64_t z) noexcept;

/// Seed of run r: mix64(base_seed + (r + 1) * 0x9E3779B97F4A7C15), i.e. the
/// (r+1)-th output of a SplitMix64 stream started at base_seed. Each run
/// owns an independent std::mt19937_64 seeded with this value.
std::uint64_t child_seed(std::uint64_t base_seed, std::uint64_t run) noexcept;

/// n_panel_months i.i.d. uniform draws with replacement from
/// [0, n_panel_months), a pure function of (cfg.base_seed, run_index).
std::vector<std::uint32_t> draw_months(std::size_t run_index, const SimConfig& cfg,
                                       std::size_t n_panel_months);

struct TStatCrossSection {
    std::vector<double> values;  // ascending

    static TStatCrossSection from_unsorted(std::vector<double> v);
    std::size_t fund_count() const noexcept { return values.size(); }
};

struct SimulationOutput {
    TStatCrossSection actual;
    std::vector<double> pct_grid;
    /// n_sims rows of |pct_grid| values; rows of empty runs hold NaN.
    std::vector<std::vector<double>> per_run_percentiles;
    /// Funds that produced a t(α) in each run.
    std::vector<std::size_t> run_fund_counts;
    std::size_t empty_runs = 0;
    /// Simulated t(α) over all runs, ascending.
    std::vector<double> pooled_sim;
    std::size_t pooled_total = 0;  // before any reduction
    bool pooled_exact = true;

    std::size_t n_sims() const noexcept { return per_run_percentiles.size(); }
    bool run_ok(std::size_t r) const noexcept { return run_fund_counts[r] > 0; }
};

/// y - α̂ for each month of the sample.
std::vector<double> zero_alpha_adjust(const AlignedSample& sample, const RegressionResult& fit);

struct GroupMember {
    AlignedSample sample;  // aligned under SimConfig::model
    RegressionResult fit;  // ols fit of `sample`
};

/// Called once per (run, member) with the panel rows that member uses in
/// that run, before any exclusion. May be called from worker threads.
using RunObserver =
    std::function<void(std::size_t run, std::size_t member, std::span<const std::uint32_t> rows)>;

/// Zero-alpha bootstrap. Every run draws one month vector shared by all
/// members; a member keeps the drawn months it observed (with repeats),
/// regresses its alpha-adjusted returns on those factor rows and
/// contributes t(α) unless it has fewer than min_resampled_obs rows or the
/// fit fails. Output is identical for any thread count.
SimulationOutput run_simulation(std::span<const GroupMember> group, const FactorPanel& panel,
                                const SimConfig& cfg, const RunObserver& observer = {});

} // namespace fundalpha
