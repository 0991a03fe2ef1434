#include "fundalpha/boot.hpp"

#include "fundalpha/error.hpp"
#include "fundalpha/parallel.hpp"
#include "fundalpha/percentile.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <random>

namespace fundalpha {

std::vector<double> default_pct_grid() {
    return {1, 2, 3, 4, 5, 10, 20, 30, 40, 50, 60, 70, 80, 90, 95, 96, 97, 98, 99};
}

void SimConfig::validate() const {
    if (n_sims < 1) throw ConfigError("n_sims must be at least 1");
    if (pct_grid.empty()) throw ConfigError("pct_grid must not be empty");
    for (std::size_t i = 0; i < pct_grid.size(); ++i) {
        if (!(pct_grid[i] > 0.0 && pct_grid[i] < 100.0)) {
            throw ConfigError("pct_grid values must lie strictly between 0 and 100");
        }
        if (i > 0 && !(pct_grid[i - 1] < pct_grid[i])) {
            throw ConfigError("pct_grid must be strictly increasing");
        }
    }
}

std::uint64_t mix64(std::uint64_t z) noexcept {
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
}

std::uint64_t child_seed(std::uint64_t base_seed, std::uint64_t run) noexcept {
    return mix64(base_seed + (run + 1) * 0x9E3779B97F4A7C15ull);
}

std::vector<std::uint32_t> draw_months(std::size_t run_index, const SimConfig& cfg,
                                       std::size_t n_panel_months) {
    if (n_panel_months == 0) throw ConfigError("cannot draw from an empty panel");
    std::mt19937_64 rng(child_seed(cfg.base_seed, run_index));
    std::uniform_int_distribution<std::uint32_t> pick(0, static_cast<std::uint32_t>(n_panel_months - 1));
    std::vector<std::uint32_t> out(n_panel_months);
    for (auto& m : out) m = pick(rng);
    return out;
}

TStatCrossSection TStatCrossSection::from_unsorted(std::vector<double> v) {
    std::sort(v.begin(), v.end());
    return {std::move(v)};
}

std::vector<double> zero_alpha_adjust(const AlignedSample& sample, const RegressionResult& fit) {
    if (fit.n_obs != sample.n_obs() || fit.residuals.size() != sample.n_obs()) {
        throw FitError(FitErrorKind::Mismatch, "fit of " + std::to_string(fit.n_obs) +
                                                   " months does not match sample of " +
                                                   std::to_string(sample.n_obs()));
    }
    std::vector<double> out(sample.y);
    for (double& v : out) v -= fit.alpha;
    return out;
}

namespace {

// Members sharing one observed-month set share the per-run operator.
struct Coverage {
    std::vector<char> observed;  // per panel month
    std::vector<std::size_t> members;
};

struct RunResult {
    std::vector<double> t;                 // member order, excluded members skipped
    std::vector<std::uint32_t> member_ids;  // parallel to t
    std::vector<double> percentiles;
};

struct PooledEntry {
    std::uint64_t key;
    double value;
    friend bool operator<(const PooledEntry& a, const PooledEntry& b) {
        return a.key != b.key ? a.key < b.key : a.value < b.value;
    }
};

} // namespace

SimulationOutput run_simulation(std::span<const GroupMember> group, const FactorPanel& panel,
                                const SimConfig& cfg, const RunObserver& observer) {
    cfg.validate();
    if (group.empty()) throw DataError("simulation group is empty");
    const DesignMatrix design = DesignMatrix::for_model(panel, cfg.model);
    const std::size_t n_months = panel.size();

    // Dense alpha-adjusted returns per member, NaN where unobserved.
    std::vector<std::vector<double>> adjusted(group.size());
    std::vector<Coverage> coverages;
    std::map<std::vector<std::size_t>, std::size_t> coverage_of;
    std::vector<double> actual;
    for (std::size_t i = 0; i < group.size(); ++i) {
        const auto& m = group[i];
        if (m.sample.n_cols() != design.cols) {
            throw DataError("fund " + m.sample.fund_id + " was not aligned under model " +
                            std::string(model_name(cfg.model)));
        }
        const auto adj = zero_alpha_adjust(m.sample, m.fit);
        auto& dense = adjusted[i];
        dense.assign(n_months, std::numeric_limits<double>::quiet_NaN());
        for (std::size_t k = 0; k < adj.size(); ++k) {
            if (m.sample.panel_rows[k] >= n_months) {
                throw DataError("fund " + m.sample.fund_id + " has rows outside the panel");
            }
            dense[m.sample.panel_rows[k]] = adj[k];
        }
        auto [it, fresh] = coverage_of.try_emplace(m.sample.panel_rows, coverages.size());
        if (fresh) {
            Coverage c;
            c.observed.assign(n_months, 0);
            for (std::size_t r : m.sample.panel_rows) c.observed[r] = 1;
            coverages.push_back(std::move(c));
        }
        coverages[it->second].members.push_back(i);
        if (!m.fit.degenerate && !m.fit.tstats.empty() && !std::isnan(m.fit.tstats[0])) {
            actual.push_back(m.fit.tstats[0]);
        }
    }

    auto simulate_run = [&](std::size_t run) {
        RunResult res;
        const auto drawn = draw_months(run, cfg, n_months);
        std::vector<std::uint32_t> rows;
        std::vector<double> y;
        std::vector<std::pair<std::uint32_t, double>> hits;
        for (const auto& cov : coverages) {
            rows.clear();
            for (std::uint32_t d : drawn) {
                if (cov.observed[d]) rows.push_back(d);
            }
            if (observer) {
                for (std::size_t member : cov.members) observer(run, member, rows);
            }
            if (rows.size() < cfg.min_resampled_obs) continue;
            std::optional<SolveOperator> op;
            try {
                op.emplace(SolveOperator::gather(design, rows));
            } catch (const FitError&) {
                continue;
            }
            y.resize(rows.size());
            for (std::size_t member : cov.members) {
                const auto& dense = adjusted[member];
                for (std::size_t k = 0; k < rows.size(); ++k) y[k] = dense[rows[k]];
                const AlphaT at = op->alpha_t(y);
                if (at.degenerate || !std::isfinite(at.t)) continue;
                hits.emplace_back(static_cast<std::uint32_t>(member), at.t);
            }
        }
        std::sort(hits.begin(), hits.end());
        res.t.reserve(hits.size());
        res.member_ids.reserve(hits.size());
        for (const auto& [member, t] : hits) {
            res.member_ids.push_back(member);
            res.t.push_back(t);
        }
        if (res.t.empty()) {
            res.percentiles.assign(cfg.pct_grid.size(), std::numeric_limits<double>::quiet_NaN());
        } else {
            std::vector<double> sorted = res.t;
            std::sort(sorted.begin(), sorted.end());
            res.percentiles.reserve(cfg.pct_grid.size());
            for (double p : cfg.pct_grid) res.percentiles.push_back(percentile(sorted, p));
        }
        return res;
    };

    SimulationOutput out;
    out.actual = TStatCrossSection::from_unsorted(std::move(actual));
    out.pct_grid = cfg.pct_grid;
    out.per_run_percentiles.resize(cfg.n_sims);
    out.run_fund_counts.assign(cfg.n_sims, 0);

    std::vector<PooledEntry> capped;
    const std::size_t block = std::max<std::size_t>(64, std::size_t{resolve_threads(cfg.threads)} * 16);
    std::vector<RunResult> results;
    for (std::size_t start = 0; start < cfg.n_sims; start += block) {
        const std::size_t count = std::min(block, cfg.n_sims - start);
        results.assign(count, RunResult{});
        parallel_for(count, cfg.threads,
                     [&](std::size_t i) { results[i] = simulate_run(start + i); });
        for (std::size_t i = 0; i < count; ++i) {
            const std::size_t run = start + i;
            auto& res = results[i];
            out.per_run_percentiles[run] = std::move(res.percentiles);
            out.run_fund_counts[run] = res.t.size();
            if (res.t.empty()) ++out.empty_runs;
            out.pooled_total += res.t.size();
            if (cfg.pooled_cap == 0) {
                out.pooled_sim.insert(out.pooled_sim.end(), res.t.begin(), res.t.end());
                continue;
            }
            const std::uint64_t run_seed = child_seed(cfg.base_seed, run);
            for (std::size_t k = 0; k < res.t.size(); ++k) {
                capped.push_back({mix64(run_seed ^ mix64(res.member_ids[k] + 1ull)), res.t[k]});
            }
            if (capped.size() > 2 * cfg.pooled_cap) {
                std::nth_element(capped.begin(), capped.begin() + static_cast<std::ptrdiff_t>(cfg.pooled_cap),
                                 capped.end());
                capped.resize(cfg.pooled_cap);
            }
        }
    }
    if (cfg.pooled_cap != 0) {
        if (capped.size() > cfg.pooled_cap) {
            std::nth_element(capped.begin(), capped.begin() + static_cast<std::ptrdiff_t>(cfg.pooled_cap),
                             capped.end());
            capped.resize(cfg.pooled_cap);
        }
        out.pooled_exact = out.pooled_total <= cfg.pooled_cap;
        out.pooled_sim.reserve(capped.size());
        for (const auto& e : capped) out.pooled_sim.push_back(e.value);
    }
    std::sort(out.pooled_sim.begin(), out.pooled_sim.end());
    return out;
}

} // namespace fundalpha
