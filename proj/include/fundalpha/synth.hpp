#pragma once

#include "fundalpha/panel.hpp"
#include "fundalpha/regress.hpp"

#include <array>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace fundalpha {

/// Fund behaviours the screens are meant to tell apart.
enum class Archetype { Active, IndexTracker, MoneyMarket, Leveraged, Incubating };
std::string_view archetype_name(Archetype a) noexcept;

struct Moments {
    double mean = 0.0;
    double vol = 0.0;
};

/// Traded factors in generation order: MKT_RF, SMB, HML, MOM, RMW, CMA.
inline constexpr std::array kTradedFactors{Factor::MktRf, Factor::Smb, Factor::Hml,
                                           Factor::Mom,   Factor::Rmw, Factor::Cma};

struct ArchetypeMix {
    double active = 1.0;
    double index_tracker = 0.0;
    double money_market = 0.0;
    double leveraged = 0.0;
    double incubating = 0.0;
};

struct SynthConfig {
    std::size_t n_months = 240;
    std::size_t n_funds = 100;
    MonthId start{1990, 1};
    std::uint64_t seed = 1;

    std::array<Moments, 6> factors{{{0.006, 0.045},
                                    {0.002, 0.030},
                                    {0.002, 0.030},
                                    {0.006, 0.045},
                                    {0.003, 0.020},
                                    {0.003, 0.020}}};
    Moments rf{0.003, 0.001};
    /// Row-major 6x6 correlation of the traded factors; empty = identity.
    std::vector<double> factor_correlation;

    /// Factors that carry non-zero loadings for active funds.
    Model truth_model = Model::FF5;
    double active_alpha = 0.0;
    /// The first `n_skilled` active funds get `skilled_alpha` instead.
    std::size_t n_skilled = 0;
    double skilled_alpha = 0.005;
    double idio_vol = 0.02;
    /// Market loading of active funds, uniform in [min, max]. Kept well
    /// clear of the index band so sampling noise cannot trip it.
    double active_beta_min = 1.4;
    double active_beta_max = 1.9;

    ArchetypeMix mix;
    double index_noise = 1e-4;
    double money_market_noise = 1e-5;
    double leveraged_beta = 7.0;
    double leveraged_vol = 0.01;
    /// Month offset at which incubating funds first reach the AuM
    /// threshold; nullopt means never.
    std::optional<std::size_t> incubation_month;

    double aum_min = 3.0;     // initial AuM, log-uniform in [aum_min, aum_max]
    double aum_max = 5000.0;
    double aum_drift = 0.005;
    double aum_vol = 0.05;
    /// Probability that any single fund-month is unreported.
    double missing_fraction = 0.0;

    /// Throws ConfigError.
    void validate() const;
};

struct FundTruth {
    std::string fund_id;
    Archetype archetype = Archetype::Active;
    double alpha = 0.0;
    std::array<double, 6> betas{};  // on kTradedFactors
    double idio_vol = 0.0;
};

struct Universe {
    FactorPanel panel;
    std::vector<FundSeries> funds;
    std::vector<FundTruth> truth;
};

/// Gaussian factors and fund returns rf + α + β·F + ε, deterministic in the
/// seed. Each fund draws from its own stream, so changing one fund's truth
/// leaves every other fund unchanged.
Universe generate_universe(const SynthConfig& cfg);

/// fund_id,archetype,true_alpha,beta_MKT_RF,...,beta_CMA,idio_vol
void write_truth_csv(std::ostream& out, std::span<const FundTruth> truth);

/// Reference least squares through explicit normal equations solved by
/// Gauss-Jordan elimination with partial pivoting. Shares no code with the
/// production kernel; used to cross-check it.
RegressionResult oracle_fit(const AlignedSample& sample);

} // namespace fundalpha
