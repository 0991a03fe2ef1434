#include "fundalpha/screen.hpp"

#include "fundalpha/csv.hpp"
#include "fundalpha/error.hpp"
#include "fundalpha/parallel.hpp"
#include "fundalpha/regress.hpp"

#include <array>
#include <cmath>
#include <ostream>

namespace fundalpha {

namespace {

constexpr std::size_t kMinScreenObs = 3;

bool positive(double v) { return v > 0.0 && !std::isnan(v); }
bool non_negative(double v) { return v >= 0.0 && !std::isnan(v); }

} // namespace

void ScreenConfig::validate() const {
    if (!positive(incubation_threshold_aum) || std::isinf(incubation_threshold_aum)) {
        throw ConfigError("incubation_threshold_aum must be a positive finite number");
    }
    if (!positive(rf_tstat_max)) throw ConfigError("rf_tstat_max must be positive");
    if (!non_negative(index_beta_band)) throw ConfigError("index_beta_band must be non-negative");
    if (!positive(index_tstat_max)) throw ConfigError("index_tstat_max must be positive");
    if (!positive(leverage_beta_max_excess)) {
        throw ConfigError("leverage_beta_max_excess must be positive");
    }
    if (!non_negative(market_tstat_min) || std::isinf(market_tstat_min)) {
        throw ConfigError("market_tstat_min must be a non-negative finite number");
    }
    for (std::size_t i = 0; i < size_cutoffs.size(); ++i) {
        if (!positive(size_cutoffs[i]) || std::isinf(size_cutoffs[i])) {
            throw ConfigError("size cutoffs must be positive finite numbers");
        }
        if (i > 0 && !(size_cutoffs[i - 1] < size_cutoffs[i])) {
            throw ConfigError("size cutoffs must be strictly increasing");
        }
    }
}

std::string_view rule_name(Rule r) noexcept {
    switch (r) {
    case Rule::Incubation: return "incubation";
    case Rule::MinHistory: return "min_history";
    case Rule::MoneyMarket: return "money_market";
    case Rule::IndexLeverage: return "index_leverage";
    }
    return "?";
}

std::optional<FundSeries> trim_incubation(const FundSeries& fund, const ScreenConfig& cfg) {
    const auto& obs = fund.observations();
    for (std::size_t i = 0; i < obs.size(); ++i) {
        if (obs[i].aum && *obs[i].aum >= cfg.incubation_threshold_aum) {
            return FundSeries(fund.id(), {obs.begin() + static_cast<std::ptrdiff_t>(i), obs.end()});
        }
    }
    return std::nullopt;
}

MoneyMarketCheck screen_money_market(const FundSeries& fund, const FactorPanel& panel,
                                     const ScreenConfig& cfg) {
    MoneyMarketCheck out;
    if (std::isinf(cfg.rf_tstat_max)) {
        out.passed = true;
        return out;
    }
    if (fund.size() < kMinScreenObs) {
        out.reason = "insufficient observations";
        return out;
    }
    constexpr std::array regressors{Factor::Rf};
    try {
        const auto fit = ols_fit(align_columns(fund, panel, regressors, /*excess=*/false));
        if (fit.degenerate) {
            out.reason = "perfect fit on RF";
            return out;
        }
        out.t_rf = fit.tstats[1];
        out.passed = std::abs(*out.t_rf) < cfg.rf_tstat_max;
        if (!out.passed) out.reason = "|t(RF)| >= " + csv::format_decimal(cfg.rf_tstat_max);
    } catch (const FitError& e) {
        out.reason = e.what();
    }
    return out;
}

IndexLeverageCheck screen_index_leverage(const FundSeries& fund, const FactorPanel& panel,
                                         const ScreenConfig& cfg) {
    IndexLeverageCheck out;
    const bool b_off = std::isinf(cfg.index_tstat_max);
    const bool c_off = std::isinf(cfg.leverage_beta_max_excess);
    const bool d_off = cfg.market_tstat_min == 0.0;
    if (b_off && c_off && d_off) {
        out.passed = out.not_index_tstat = out.below_leverage = out.market_exposed = true;
        return out;
    }
    if (fund.size() < kMinScreenObs) {
        out.reason = "insufficient observations";
        return out;
    }
    RegressionResult fit;
    try {
        fit = ols_fit(align(fund, panel, Model::Capm));
    } catch (const FitError& e) {
        out.reason = e.what();
        return out;
    }
    const double beta = fit.betas[0];
    const double t_beta = fit.tstats[1];
    out.beta = beta;
    out.t_beta = t_beta;
    const double excess = std::abs(beta) - 1.0;
    out.not_index_band = excess > cfg.index_beta_band;
    out.not_index_tstat = b_off || std::abs(t_beta) < cfg.index_tstat_max;
    out.below_leverage = c_off || excess < cfg.leverage_beta_max_excess;
    out.market_exposed = d_off || std::abs(t_beta) > cfg.market_tstat_min;

    const bool a = out.not_index_band, b = out.not_index_tstat, c = out.below_leverage,
               d = out.market_exposed;
    switch (cfg.grouping) {
    case IndexRuleGrouping::NotIndexAndEquity: out.passed = (a || b) && c && d; break;
    case IndexRuleGrouping::IndexOrRest: out.passed = a || (b && c && d); break;
    }
    if (!out.passed) {
        if (!(a || b)) out.reason = "index tracker";
        else if (!c) out.reason = "leveraged";
        else out.reason = "no market exposure";
    }
    return out;
}

bool screen_min_history(const FundSeries& fund, const ScreenConfig& cfg) noexcept {
    return fund.size() >= cfg.min_history_months;
}

std::string size_label(double cutoff_millions) {
    if (cutoff_millions >= 1000.0) return csv::format_decimal(cutoff_millions / 1000.0) + "b";
    return csv::format_decimal(cutoff_millions) + "m";
}

std::vector<std::string> assign_size_groups(const FundSeries& fund, const ScreenConfig& cfg) {
    std::vector<std::string> groups;
    const auto aum = fund.last_aum();
    if (!aum) return groups;
    for (double c : cfg.size_cutoffs) {
        if (*aum >= c) groups.push_back(size_label(c));
    }
    return groups;
}

namespace {

ScreenOutcome screen_one(const FundSeries& fund, const FactorPanel& panel, const ScreenConfig& cfg) {
    ScreenOutcome o;
    o.fund_id = fund.id();
    auto fail = [&](Rule r, std::optional<double> stat, std::string note) {
        o.decisions.push_back({r, false, stat, std::move(note)});
        o.failing_rule = r;
        o.admitted = false;
        return o;
    };

    o.n_obs = fund.size();
    o.last_aum = fund.last_aum();
    auto trimmed = trim_incubation(fund, cfg);
    if (!trimmed) {
        return fail(Rule::Incubation, o.last_aum,
                    fund.last_aum() ? "never incubated out" : "no AuM observations");
    }
    o.trimmed_start = trimmed->observations().front().month;
    o.n_obs = trimmed->size();
    o.decisions.push_back({Rule::Incubation, true, std::nullopt,
                           "from " + o.trimmed_start->str()});

    const double n = static_cast<double>(trimmed->size());
    if (!screen_min_history(*trimmed, cfg)) {
        o.trimmed = std::move(trimmed);
        return fail(Rule::MinHistory, n, "too few observations");
    }
    o.decisions.push_back({Rule::MinHistory, true, n, {}});

    const auto mm = screen_money_market(*trimmed, panel, cfg);
    o.t_rf = mm.t_rf;
    if (!mm.passed) {
        o.trimmed = std::move(trimmed);
        return fail(Rule::MoneyMarket, mm.t_rf, mm.reason);
    }
    o.decisions.push_back({Rule::MoneyMarket, true, mm.t_rf, {}});

    const auto il = screen_index_leverage(*trimmed, panel, cfg);
    o.beta = il.beta;
    o.t_beta = il.t_beta;
    if (!il.passed) {
        o.trimmed = std::move(trimmed);
        return fail(Rule::IndexLeverage, il.beta, il.reason);
    }
    o.decisions.push_back({Rule::IndexLeverage, true, il.beta, {}});

    o.admitted = true;
    o.size_groups = assign_size_groups(*trimmed, cfg);
    o.trimmed = std::move(trimmed);
    return o;
}

} // namespace

std::vector<ScreenOutcome> run_screen(std::span<const FundSeries> funds, const FactorPanel& panel,
                                      const ScreenConfig& cfg, unsigned threads) {
    cfg.validate();
    std::vector<ScreenOutcome> out(funds.size());
    parallel_for(funds.size(), threads,
                 [&](std::size_t i) { out[i] = screen_one(funds[i], panel, cfg); });
    return out;
}

void write_screen_csv(std::ostream& out, std::span<const ScreenOutcome> outcomes) {
    auto opt = [](const std::optional<double>& v) { return v ? csv::format_decimal(*v) : ""; };
    out << "fund_id,admitted,failing_rule,beta,t_beta,t_rf,n_obs,last_aum,size_groups\n";
    for (const auto& o : outcomes) {
        std::string groups;
        for (const auto& g : o.size_groups) groups += (groups.empty() ? "" : ";") + g;
        out << csv::escape(o.fund_id) << ',' << (o.admitted ? "true" : "false") << ','
            << (o.failing_rule ? rule_name(*o.failing_rule) : "") << ',' << opt(o.beta) << ','
            << opt(o.t_beta) << ',' << opt(o.t_rf) << ',' << o.n_obs << ',' << opt(o.last_aum)
            << ',' << groups << '\n';
    }
}

} // namespace fundalpha
