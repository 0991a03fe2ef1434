#include "fundalpha/synth.hpp"

#include "fundalpha/boot.hpp"
#include "fundalpha/csv.hpp"
#include "fundalpha/error.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>
#include <random>

namespace fundalpha {

std::string_view archetype_name(Archetype a) noexcept {
    switch (a) {
    case Archetype::Active: return "active";
    case Archetype::IndexTracker: return "index";
    case Archetype::MoneyMarket: return "money_market";
    case Archetype::Leveraged: return "leveraged";
    case Archetype::Incubating: return "incubating";
    }
    return "?";
}

void SynthConfig::validate() const {
    if (n_months == 0) throw ConfigError("n_months must be positive");
    const std::array fractions{mix.active, mix.index_tracker, mix.money_market, mix.leveraged,
                               mix.incubating};
    double total = 0.0;
    for (double f : fractions) {
        if (!(f >= 0.0)) throw ConfigError("archetype fractions must be non-negative");
        total += f;
    }
    if (std::abs(total - 1.0) > 1e-9) throw ConfigError("archetype fractions must sum to 1");
    for (const auto& m : factors) {
        if (!(m.vol >= 0.0)) throw ConfigError("factor volatilities must be non-negative");
    }
    if (!(rf.vol >= 0.0) || !(idio_vol >= 0.0) || !(index_noise >= 0.0) ||
        !(money_market_noise >= 0.0) || !(leveraged_vol >= 0.0) || !(aum_vol >= 0.0)) {
        throw ConfigError("volatilities must be non-negative");
    }
    if (!(active_beta_max >= active_beta_min)) throw ConfigError("need active_beta_min <= active_beta_max");
    if (!(aum_min > 0.0) || !(aum_max >= aum_min)) throw ConfigError("need 0 < aum_min <= aum_max");
    if (!(missing_fraction >= 0.0 && missing_fraction < 1.0)) {
        throw ConfigError("missing_fraction must lie in [0, 1)");
    }
    if (!factor_correlation.empty() && factor_correlation.size() != 36) {
        throw ConfigError("factor_correlation must be a 6x6 matrix");
    }
}

namespace {

// Largest-remainder apportionment of n funds across the archetypes.
std::vector<Archetype> apportion(const ArchetypeMix& mix, std::size_t n) {
    const std::array kinds{Archetype::Active, Archetype::IndexTracker, Archetype::MoneyMarket,
                           Archetype::Leveraged, Archetype::Incubating};
    const std::array fractions{mix.active, mix.index_tracker, mix.money_market, mix.leveraged,
                               mix.incubating};
    std::array<std::size_t, 5> counts{};
    std::array<double, 5> rem{};
    std::size_t used = 0;
    for (std::size_t k = 0; k < 5; ++k) {
        const double exact = fractions[k] * static_cast<double>(n);
        counts[k] = static_cast<std::size_t>(std::floor(exact));
        rem[k] = exact - static_cast<double>(counts[k]);
        used += counts[k];
    }
    while (used < n) {
        const auto k = static_cast<std::size_t>(std::max_element(rem.begin(), rem.end()) - rem.begin());
        ++counts[k];
        rem[k] = -1.0;
        ++used;
    }
    std::vector<Archetype> out;
    for (std::size_t k = 0; k < 5; ++k) out.insert(out.end(), counts[k], kinds[k]);
    return out;
}

std::string fund_name(std::size_t i) {
    std::string digits = std::to_string(i + 1);
    while (digits.size() < 5) digits.insert(0, "0");
    return "F" + digits;
}

} // namespace

Universe generate_universe(const SynthConfig& cfg) {
    cfg.validate();
    const std::size_t n = cfg.n_months;

    // Factor panel.
    Eigen::Matrix<double, 6, 6> chol = Eigen::Matrix<double, 6, 6>::Identity();
    if (!cfg.factor_correlation.empty()) {
        Eigen::Matrix<double, 6, 6> corr;
        for (int r = 0; r < 6; ++r) {
            for (int c = 0; c < 6; ++c) corr(r, c) = cfg.factor_correlation[static_cast<std::size_t>(r * 6 + c)];
        }
        Eigen::LLT<Eigen::Matrix<double, 6, 6>> llt(corr);
        if (llt.info() != Eigen::Success) throw ConfigError("factor_correlation is not positive definite");
        chol = llt.matrixL();
    }
    std::mt19937_64 rng(cfg.seed);
    std::normal_distribution<double> gauss(0.0, 1.0);
    std::vector<MonthId> months;
    FactorPanel::Columns cols;
    for (auto& c : cols) c.emplace();
    MonthId m = cfg.start;
    for (std::size_t t = 0; t < n; ++t, m = m.next()) {
        months.push_back(m);
        Eigen::Matrix<double, 6, 1> z;
        for (int k = 0; k < 6; ++k) z(k) = gauss(rng);
        const Eigen::Matrix<double, 6, 1> shocks = chol * z;
        for (std::size_t k = 0; k < 6; ++k) {
            const auto& mom = cfg.factors[k];
            (*cols[static_cast<std::size_t>(kTradedFactors[k])]).push_back(mom.mean + mom.vol * shocks(static_cast<int>(k)));
        }
        (*cols[static_cast<std::size_t>(Factor::Rf)]).push_back(cfg.rf.mean + cfg.rf.vol * gauss(rng));
    }
    FactorPanel panel(months, std::move(cols));

    std::array<bool, 6> loaded{};
    for (Factor f : model_factors(cfg.truth_model)) {
        for (std::size_t k = 0; k < 6; ++k) {
            if (kTradedFactors[k] == f) loaded[k] = true;
        }
    }

    const auto kinds = apportion(cfg.mix, cfg.n_funds);
    Universe u{std::move(panel), {}, {}};
    std::size_t active_seen = 0;
    for (std::size_t i = 0; i < kinds.size(); ++i) {
        std::mt19937_64 frng(child_seed(cfg.seed, i));
        std::uniform_real_distribution<double> unif(0.0, 1.0);
        FundTruth truth;
        truth.fund_id = fund_name(i);
        truth.archetype = kinds[i];
        switch (kinds[i]) {
        case Archetype::Active:
        case Archetype::Incubating:
            truth.alpha = (kinds[i] == Archetype::Active && active_seen++ < cfg.n_skilled)
                              ? cfg.skilled_alpha
                              : cfg.active_alpha;
            truth.betas[0] = cfg.active_beta_min + (cfg.active_beta_max - cfg.active_beta_min) * unif(frng);
            for (std::size_t k = 1; k < 6; ++k) {
                const double b = -0.3 + 0.6 * unif(frng);
                truth.betas[k] = loaded[k] ? b : 0.0;
            }
            truth.idio_vol = cfg.idio_vol;
            break;
        case Archetype::IndexTracker:
            truth.betas[0] = 1.0;
            truth.idio_vol = cfg.index_noise;
            break;
        case Archetype::MoneyMarket:
            truth.idio_vol = cfg.money_market_noise;
            break;
        case Archetype::Leveraged:
            truth.betas[0] = cfg.leveraged_beta;
            truth.idio_vol = cfg.leveraged_vol;
            break;
        }

        const double log_lo = std::log(cfg.aum_min), log_hi = std::log(cfg.aum_max);
        double aum = std::exp(log_lo + (log_hi - log_lo) * unif(frng));
        const std::size_t incubated_at =
            kinds[i] == Archetype::Incubating ? cfg.incubation_month.value_or(n) : 0;

        std::vector<Observation> obs;
        obs.reserve(n);
        for (std::size_t t = 0; t < n; ++t) {
            double r = u.panel.column(Factor::Rf)[t] + truth.alpha;
            for (std::size_t k = 0; k < 6; ++k) {
                if (truth.betas[k] != 0.0) r += truth.betas[k] * u.panel.column(kTradedFactors[k])[t];
            }
            r += truth.idio_vol * gauss(frng);
            aum *= std::exp(cfg.aum_drift + cfg.aum_vol * gauss(frng));
            const bool missing = cfg.missing_fraction > 0.0 && unif(frng) < cfg.missing_fraction;
            if (missing) continue;
            const double reported_aum = t < incubated_at ? 1.0 : std::max(aum, cfg.aum_min);
            obs.push_back({u.panel.months()[t], r, reported_aum});
        }
        u.funds.emplace_back(truth.fund_id, std::move(obs));
        u.truth.push_back(std::move(truth));
    }
    return u;
}

void write_truth_csv(std::ostream& out, std::span<const FundTruth> truth) {
    out << "fund_id,archetype,true_alpha";
    for (Factor f : kTradedFactors) out << ",beta_" << factor_name(f);
    out << ",idio_vol\n";
    for (const auto& t : truth) {
        out << csv::escape(t.fund_id) << ',' << archetype_name(t.archetype) << ','
            << csv::format_decimal(t.alpha);
        for (double b : t.betas) out << ',' << csv::format_decimal(b);
        out << ',' << csv::format_decimal(t.idio_vol) << '\n';
    }
}

// ---------------------------------------------------------------------------

RegressionResult oracle_fit(const AlignedSample& sample) {
    const std::size_t n = sample.n_obs();
    const std::size_t p = sample.n_cols();
    if (n < p + 1) throw FitError(FitErrorKind::InsufficientObservations, "insufficient observations");

    // Augmented [X'X | I | X'y].
    const std::size_t w = 2 * p + 1;
    std::vector<std::vector<double>> a(p, std::vector<double>(w, 0.0));
    for (std::size_t r = 0; r < p; ++r) {
        for (std::size_t c = 0; c < p; ++c) {
            double s = 0.0;
            for (std::size_t i = 0; i < n; ++i) s += sample.at(i, r) * sample.at(i, c);
            a[r][c] = s;
        }
        a[r][p + r] = 1.0;
        double s = 0.0;
        for (std::size_t i = 0; i < n; ++i) s += sample.at(i, r) * sample.y[i];
        a[r][2 * p] = s;
    }
    double scale = 0.0;
    for (std::size_t r = 0; r < p; ++r) {
        for (std::size_t c = 0; c < p; ++c) scale = std::max(scale, std::abs(a[r][c]));
    }

    for (std::size_t col = 0; col < p; ++col) {
        std::size_t pivot = col;
        for (std::size_t r = col + 1; r < p; ++r) {
            if (std::abs(a[r][col]) > std::abs(a[pivot][col])) pivot = r;
        }
        if (!(std::abs(a[pivot][col]) > 1e-12 * scale)) {
            throw FitError(FitErrorKind::SingularDesign, "singular design");
        }
        std::swap(a[col], a[pivot]);
        const double d = a[col][col];
        for (std::size_t c = 0; c < w; ++c) a[col][c] /= d;
        for (std::size_t r = 0; r < p; ++r) {
            if (r == col) continue;
            const double f = a[r][col];
            if (f == 0.0) continue;
            for (std::size_t c = 0; c < w; ++c) a[r][c] -= f * a[col][c];
        }
    }

    std::vector<double> beta(p);
    for (std::size_t r = 0; r < p; ++r) beta[r] = a[r][2 * p];

    RegressionResult res;
    res.n_obs = n;
    res.dof = n - p;
    res.residuals.resize(n);
    double ssr = 0.0, yy = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        double fitted = 0.0;
        for (std::size_t c = 0; c < p; ++c) fitted += sample.at(i, c) * beta[c];
        res.residuals[i] = sample.y[i] - fitted;
        ssr += res.residuals[i] * res.residuals[i];
        yy += sample.y[i] * sample.y[i];
    }
    res.sigma2 = ssr / static_cast<double>(res.dof);
    res.degenerate = std::sqrt(ssr) <= kDegenerateResidual * std::sqrt(yy);
    res.alpha = beta[0];
    res.betas.assign(beta.begin() + 1, beta.end());
    for (std::size_t c = 0; c < p; ++c) {
        const double se = std::sqrt(res.sigma2 * a[c][p + c]);
        res.se.push_back(se);
        res.tstats.push_back(res.degenerate || !(se > 0.0) ? std::numeric_limits<double>::quiet_NaN()
                                                           : beta[c] / se);
    }
    return res;
}

} // namespace fundalpha
