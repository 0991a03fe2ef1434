#pragma once

#include "fundalpha/panel.hpp"

#include <iosfwd>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace fundalpha {

/// Threshold value that switches a max-type rule off. Min-type thresholds
/// (`index_beta_band`, `market_tstat_min`, `min_history_months`) are switched
/// off with 0.
inline constexpr double kDisabled = std::numeric_limits<double>::infinity();

/// How the four clauses of the index/leverage rule combine, with
/// A = |β|-1 > band, B = |T_β| < index_tstat_max,
/// C = |β|-1 < leverage_beta_max_excess, D = |T_β| > market_tstat_min.
enum class IndexRuleGrouping {
    NotIndexAndEquity,  // (A or B) and C and D
    IndexOrRest,        // A or (B and C and D)
};

struct ScreenConfig {
    double incubation_threshold_aum = 2.5;  // millions
    double rf_tstat_max = 8.0;
    double index_beta_band = 0.05;
    double index_tstat_max = 8.0;
    double leverage_beta_max_excess = 5.0;
    double market_tstat_min = 1.95;
    std::size_t min_history_months = 24;
    std::vector<double> size_cutoffs{5.0, 250.0, 1000.0};  // millions
    IndexRuleGrouping grouping = IndexRuleGrouping::NotIndexAndEquity;

    /// Throws ConfigError.
    void validate() const;
};

enum class Rule { Incubation, MinHistory, MoneyMarket, IndexLeverage };
std::string_view rule_name(Rule r) noexcept;

struct RuleDecision {
    Rule rule = Rule::Incubation;
    bool passed = false;
    std::optional<double> statistic;  // the measured value that drove the decision
    std::string note;
};

struct MoneyMarketCheck {
    bool passed = false;
    std::optional<double> t_rf;
    std::string reason;  // set when failed
};

struct IndexLeverageCheck {
    bool passed = false;
    std::optional<double> beta;
    std::optional<double> t_beta;
    bool not_index_band = false;    // A
    bool not_index_tstat = false;   // B
    bool below_leverage = false;    // C
    bool market_exposed = false;    // D
    std::string reason;
};

struct ScreenOutcome {
    std::string fund_id;
    std::optional<MonthId> trimmed_start;
    std::optional<FundSeries> trimmed;  // the series downstream stages use
    std::vector<RuleDecision> decisions;
    bool admitted = false;
    std::optional<Rule> failing_rule;
    std::optional<double> beta;
    std::optional<double> t_beta;
    std::optional<double> t_rf;
    std::size_t n_obs = 0;
    std::optional<double> last_aum;
    std::vector<std::string> size_groups;
};

/// Drops every month before the first with AuM >= threshold. Later dips
/// below the threshold are kept. nullopt when the threshold is never reached.
std::optional<FundSeries> trim_incubation(const FundSeries& fund, const ScreenConfig& cfg);

/// Raw net return on [1, RF]; fails when |t(RF)| >= rf_tstat_max or the fit
/// is perfect.
MoneyMarketCheck screen_money_market(const FundSeries& fund, const FactorPanel& panel,
                                     const ScreenConfig& cfg);

/// Excess return on [1, MKT_RF] (CAPM), clauses combined per cfg.grouping.
IndexLeverageCheck screen_index_leverage(const FundSeries& fund, const FactorPanel& panel,
                                         const ScreenConfig& cfg);

bool screen_min_history(const FundSeries& fund, const ScreenConfig& cfg) noexcept;

/// "5m", "250m", "1b", ...
std::string size_label(double cutoff_millions);

/// Labels of every cutoff at or below the fund's last available AuM,
/// smallest first. Empty when the fund has no AuM.
std::vector<std::string> assign_size_groups(const FundSeries& fund, const ScreenConfig& cfg);

/// incubation -> min history -> money market -> index/leverage, stopping at
/// the first failure. One outcome per fund, in input order.
std::vector<ScreenOutcome> run_screen(std::span<const FundSeries> funds, const FactorPanel& panel,
                                      const ScreenConfig& cfg, unsigned threads = 1);

/// fund_id,admitted,failing_rule,beta,t_beta,t_rf,n_obs,last_aum,size_groups
void write_screen_csv(std::ostream& out, std::span<const ScreenOutcome> outcomes);

} // namespace fundalpha
