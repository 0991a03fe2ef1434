#pragma once

#include "fundalpha/error.hpp"
#include "fundalpha/panel.hpp"

#include <cstdint>
#include <functional>
#include <memory>
#include <mutex>
#include <span>
#include <unordered_map>
#include <variant>
#include <vector>

namespace fundalpha {

/// Reciprocal 1-norm condition number of X'X below which a design is
/// rejected as singular.
inline constexpr double kSingularRcond = 1e-12;

/// Residual norm relative to |y| at or below which a fit is a perfect
/// (degenerate) fit and its t-statistics are undefined.
inline constexpr double kDegenerateResidual = 1e-10;

/// OLS fit of y on [1, factors...]. Coefficient j = 0 is the intercept.
struct RegressionResult {
    double alpha = 0.0;
    std::vector<double> betas;
    std::vector<double> se;      // aligned with [alpha, betas...]
    std::vector<double> tstats;  // NaN when the fit is degenerate
    std::vector<double> residuals;
    double sigma2 = 0.0;
    std::size_t n_obs = 0;
    std::size_t dof = 0;
    bool degenerate = false;

    std::size_t n_coef() const noexcept { return betas.size() + 1; }
    double coefficient(std::size_t j) const noexcept { return j == 0 ? alpha : betas[j - 1]; }
};

/// Dense row-major design over every month of a panel: [1, model factors].
struct DesignMatrix {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> data;

    static DesignMatrix for_model(const FactorPanel& panel, Model model);
    std::span<const double> row(std::size_t r) const noexcept {
        return {data.data() + r * cols, cols};
    }
};

/// Intercept estimate and its t-statistic, without residual storage.
struct AlphaT {
    double alpha = 0.0;
    double t = 0.0;
    bool degenerate = false;
};

/// Precomputed least-squares operator for one fixed set of design rows:
/// holds the rows (column-major) and (X'X)^-1, so fitting any response is
/// O(n * cols).
class SolveOperator {
public:
    /// `x` is row-major n x cols. Throws FitError on too few rows or a
    /// singular design.
    static SolveOperator build(std::span<const double> x, std::size_t n, std::size_t cols);
    /// Rows `rows` of `design` (duplicates allowed).
    static SolveOperator gather(const DesignMatrix& design, std::span<const std::uint32_t> rows);

    std::size_t n_obs() const noexcept { return n_; }
    std::size_t n_cols() const noexcept { return cols_; }
    double rcond() const noexcept { return rcond_; }
    /// True when the Cholesky factorisation failed and the orthogonal
    /// fallback produced the inverse.
    bool used_fallback() const noexcept { return fallback_; }

    RegressionResult fit(std::span<const double> y) const;
    AlphaT alpha_t(std::span<const double> y) const;

private:
    SolveOperator() = default;
    void factorize();

    std::size_t n_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> xt_;        // cols x n
    std::vector<double> gram_inv_;  // cols x cols
    double rcond_ = 0.0;
    bool fallback_ = false;
};

RegressionResult ols_fit(const AlignedSample& sample);

/// The intercept t-statistic. Throws FitError(Degenerate) "t(α) undefined".
double tstat_of_alpha(const RegressionResult& result);

/// Month-mask keyed store of solve operators. Each key is built at most
/// once, also under concurrent lookups; a build failure is cached and
/// rethrown for every later lookup of the same key.
class BatchDesignCache {
public:
    using Key = std::vector<std::uint32_t>;

    std::shared_ptr<const SolveOperator> get_or_build(const Key& key,
                                                      const std::function<SolveOperator()>& build);
    std::size_t size() const;

private:
    struct KeyHash {
        std::size_t operator()(const Key& k) const noexcept;
    };
    struct Entry {
        std::once_flag once;
        std::shared_ptr<const SolveOperator> op;
        std::exception_ptr error;
    };

    mutable std::mutex mutex_;
    std::unordered_map<Key, std::shared_ptr<Entry>, KeyHash> entries_;
};

using FitOutcome = std::variant<RegressionResult, FitError>;

/// Fits every sample (all from one panel and model). Samples with the same
/// month coverage share one cached operator. A failing sample yields a
/// FitError in its slot and does not affect the others. Output order and
/// values do not depend on `threads`.
std::vector<FitOutcome> batch_fit(std::span<const AlignedSample> samples,
                                  BatchDesignCache& cache, unsigned threads = 1);
std::vector<FitOutcome> batch_fit(std::span<const AlignedSample> samples, unsigned threads = 1);

} // namespace fundalpha
