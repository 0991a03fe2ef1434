#include "fundalpha/regress.hpp"

#include "fundalpha/parallel.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <limits>
#include <numeric>

namespace fundalpha {

namespace {

double one_norm(const std::vector<double>& m, std::size_t p) {
    double best = 0.0;
    for (std::size_t c = 0; c < p; ++c) {
        double s = 0.0;
        for (std::size_t r = 0; r < p; ++r) s += std::abs(m[r * p + c]);
        best = std::max(best, s);
    }
    return best;
}

// Inverse of a symmetric positive definite matrix through its Cholesky
// factor. Returns false if a pivot is not strictly positive.
bool cholesky_inverse(const std::vector<double>& g, std::size_t p, std::vector<double>& inv) {
    std::vector<double> l(p * p, 0.0);
    for (std::size_t j = 0; j < p; ++j) {
        double d = g[j * p + j];
        for (std::size_t k = 0; k < j; ++k) d -= l[j * p + k] * l[j * p + k];
        if (!(d > 0.0) || !std::isfinite(d)) return false;
        const double ljj = std::sqrt(d);
        l[j * p + j] = ljj;
        for (std::size_t i = j + 1; i < p; ++i) {
            double s = g[i * p + j];
            for (std::size_t k = 0; k < j; ++k) s -= l[i * p + k] * l[j * p + k];
            l[i * p + j] = s / ljj;
        }
    }
    // L^-1, lower triangular
    std::vector<double> li(p * p, 0.0);
    for (std::size_t j = 0; j < p; ++j) {
        li[j * p + j] = 1.0 / l[j * p + j];
        for (std::size_t i = j + 1; i < p; ++i) {
            double s = 0.0;
            for (std::size_t k = j; k < i; ++k) s -= l[i * p + k] * li[k * p + j];
            li[i * p + j] = s / l[i * p + i];
        }
    }
    // (X'X)^-1 = L^-T L^-1
    inv.assign(p * p, 0.0);
    for (std::size_t r = 0; r < p; ++r) {
        for (std::size_t c = 0; c <= r; ++c) {
            double s = 0.0;
            for (std::size_t k = r; k < p; ++k) s += li[k * p + r] * li[k * p + c];
            inv[r * p + c] = s;
            inv[c * p + r] = s;
        }
    }
    return true;
}

FitError singular() { return FitError(FitErrorKind::SingularDesign, "singular design"); }

} // namespace

// ---------------------------------------------------------------------------

DesignMatrix DesignMatrix::for_model(const FactorPanel& panel, Model model) {
    const auto factors = model_factors(model);
    std::vector<std::span<const double>> cols;
    for (Factor f : factors) cols.push_back(panel.column(f));
    DesignMatrix d;
    d.rows = panel.size();
    d.cols = factors.size() + 1;
    d.data.reserve(d.rows * d.cols);
    for (std::size_t r = 0; r < d.rows; ++r) {
        d.data.push_back(1.0);
        for (const auto& c : cols) d.data.push_back(c[r]);
    }
    return d;
}

// ---------------------------------------------------------------------------

SolveOperator SolveOperator::build(std::span<const double> x, std::size_t n, std::size_t cols) {
    if (n < cols + 1) {
        throw FitError(FitErrorKind::InsufficientObservations, "insufficient observations");
    }
    SolveOperator op;
    op.n_ = n;
    op.cols_ = cols;
    op.xt_.resize(cols * n);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < cols; ++j) op.xt_[j * n + i] = x[i * cols + j];
    }
    op.factorize();
    return op;
}

SolveOperator SolveOperator::gather(const DesignMatrix& design, std::span<const std::uint32_t> rows) {
    const std::size_t n = rows.size();
    const std::size_t cols = design.cols;
    if (n < cols + 1) {
        throw FitError(FitErrorKind::InsufficientObservations, "insufficient observations");
    }
    SolveOperator op;
    op.n_ = n;
    op.cols_ = cols;
    op.xt_.resize(cols * n);
    for (std::size_t i = 0; i < n; ++i) {
        const double* src = design.data.data() + std::size_t{rows[i]} * cols;
        for (std::size_t j = 0; j < cols; ++j) op.xt_[j * n + i] = src[j];
    }
    op.factorize();
    return op;
}

void SolveOperator::factorize() {
    const std::size_t p = cols_;
    const std::size_t n = n_;
    std::vector<double> gram(p * p, 0.0);
    for (std::size_t a = 0; a < p; ++a) {
        const double* xa = xt_.data() + a * n;
        for (std::size_t b = 0; b <= a; ++b) {
            const double* xb = xt_.data() + b * n;
            double s = 0.0;
            for (std::size_t i = 0; i < n; ++i) s += xa[i] * xb[i];
            gram[a * p + b] = s;
            gram[b * p + a] = s;
        }
    }

    if (!cholesky_inverse(gram, p, gram_inv_)) {
        // Rank-revealing fallback on X itself: X P = Q R, so
        // (X'X)^-1 = P R^-1 R^-T P'.
        fallback_ = true;
        Eigen::Map<const Eigen::MatrixXd> xm(xt_.data(), static_cast<Eigen::Index>(n),
                                             static_cast<Eigen::Index>(p));
        Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(xm);
        if (qr.rank() < static_cast<Eigen::Index>(p)) throw singular();
        const Eigen::MatrixXd r = qr.matrixR().topLeftCorner(p, p).triangularView<Eigen::Upper>();
        const Eigen::MatrixXd rinv =
            r.triangularView<Eigen::Upper>().solve(Eigen::MatrixXd::Identity(p, p));
        const Eigen::MatrixXd inv =
            qr.colsPermutation() * (rinv * rinv.transpose()) * qr.colsPermutation().transpose();
        gram_inv_.resize(p * p);
        for (std::size_t a = 0; a < p; ++a) {
            for (std::size_t b = 0; b < p; ++b) {
                gram_inv_[a * p + b] = inv(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b));
            }
        }
    }

    const double denom = one_norm(gram, p) * one_norm(gram_inv_, p);
    rcond_ = denom > 0.0 && std::isfinite(denom) ? 1.0 / denom : 0.0;
    if (!(rcond_ >= kSingularRcond)) throw singular();
}

RegressionResult SolveOperator::fit(std::span<const double> y) const {
    if (y.size() != n_) {
        throw FitError(FitErrorKind::Mismatch, "response length " + std::to_string(y.size()) +
                                                   " does not match " + std::to_string(n_) + " rows");
    }
    const std::size_t p = cols_;
    const std::size_t n = n_;

    std::vector<double> xty(p, 0.0);
    for (std::size_t j = 0; j < p; ++j) {
        const double* xj = xt_.data() + j * n;
        double s = 0.0;
        for (std::size_t i = 0; i < n; ++i) s += xj[i] * y[i];
        xty[j] = s;
    }
    std::vector<double> coef(p, 0.0);
    for (std::size_t a = 0; a < p; ++a) {
        double s = 0.0;
        for (std::size_t b = 0; b < p; ++b) s += gram_inv_[a * p + b] * xty[b];
        coef[a] = s;
    }

    RegressionResult r;
    r.residuals.assign(y.begin(), y.end());
    for (std::size_t j = 0; j < p; ++j) {
        const double* xj = xt_.data() + j * n;
        const double c = coef[j];
        for (std::size_t i = 0; i < n; ++i) r.residuals[i] -= xj[i] * c;
    }
    double ssr = 0.0;
    double yy = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        ssr += r.residuals[i] * r.residuals[i];
        yy += y[i] * y[i];
    }

    r.n_obs = n;
    r.dof = n - p;
    r.sigma2 = ssr / static_cast<double>(r.dof);
    r.degenerate = ssr <= kDegenerateResidual * kDegenerateResidual * yy;
    r.alpha = coef[0];
    r.betas.assign(coef.begin() + 1, coef.end());
    r.se.resize(p);
    r.tstats.resize(p);
    for (std::size_t j = 0; j < p; ++j) {
        r.se[j] = std::sqrt(r.sigma2 * gram_inv_[j * p + j]);
        r.tstats[j] = (r.degenerate || !(r.se[j] > 0.0))
                          ? std::numeric_limits<double>::quiet_NaN()
                          : coef[j] / r.se[j];
    }
    return r;
}

AlphaT SolveOperator::alpha_t(std::span<const double> y) const {
    constexpr std::size_t kMaxCols = 16;
    const std::size_t p = cols_;
    const std::size_t n = n_;
    if (p > kMaxCols) {
        const auto r = fit(y);
        return {r.alpha, r.tstats[0], r.degenerate};
    }

    double b[kMaxCols];
    for (std::size_t j = 0; j < p; ++j) {
        const double* xj = xt_.data() + j * n;
        double s = 0.0;
        for (std::size_t i = 0; i < n; ++i) s += xj[i] * y[i];
        b[j] = s;
    }
    double c[kMaxCols];
    for (std::size_t a = 0; a < p; ++a) {
        double s = 0.0;
        for (std::size_t k = 0; k < p; ++k) s += gram_inv_[a * p + k] * b[k];
        c[a] = s;
    }

    thread_local std::vector<double> resid;
    resid.assign(y.begin(), y.end());
    for (std::size_t j = 0; j < p; ++j) {
        const double* xj = xt_.data() + j * n;
        const double cj = c[j];
        for (std::size_t i = 0; i < n; ++i) resid[i] -= xj[i] * cj;
    }
    double ssr = 0.0;
    double yy = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        ssr += resid[i] * resid[i];
        yy += y[i] * y[i];
    }

    AlphaT out;
    out.alpha = c[0];
    out.degenerate = ssr <= kDegenerateResidual * kDegenerateResidual * yy;
    const double se = std::sqrt(ssr / static_cast<double>(n - p) * gram_inv_[0]);
    out.t = (out.degenerate || !(se > 0.0)) ? std::numeric_limits<double>::quiet_NaN() : c[0] / se;
    return out;
}

// ---------------------------------------------------------------------------

RegressionResult ols_fit(const AlignedSample& sample) {
    return SolveOperator::build(sample.x, sample.n_obs(), sample.n_cols()).fit(sample.y);
}

double tstat_of_alpha(const RegressionResult& result) {
    if (result.degenerate || result.tstats.empty() || std::isnan(result.tstats[0])) {
        throw FitError(FitErrorKind::Degenerate, "t(α) undefined");
    }
    return result.tstats[0];
}

// ---------------------------------------------------------------------------

std::size_t BatchDesignCache::KeyHash::operator()(const Key& k) const noexcept {
    std::uint64_t h = 0x9E3779B97F4A7C15ull ^ k.size();
    for (std::uint32_t v : k) {
        h ^= v + 0x9E3779B97F4A7C15ull + (h << 6) + (h >> 2);
    }
    return static_cast<std::size_t>(h);
}

std::shared_ptr<const SolveOperator>
BatchDesignCache::get_or_build(const Key& key, const std::function<SolveOperator()>& build) {
    std::shared_ptr<Entry> entry;
    {
        std::lock_guard lock(mutex_);
        auto& slot = entries_[key];
        if (!slot) slot = std::make_shared<Entry>();
        entry = slot;
    }
    std::call_once(entry->once, [&] {
        try {
            entry->op = std::make_shared<const SolveOperator>(build());
        } catch (...) {
            entry->error = std::current_exception();
        }
    });
    if (entry->error) std::rethrow_exception(entry->error);
    return entry->op;
}

std::size_t BatchDesignCache::size() const {
    std::lock_guard lock(mutex_);
    return entries_.size();
}

std::vector<FitOutcome> batch_fit(std::span<const AlignedSample> samples, BatchDesignCache& cache,
                                  unsigned threads) {
    std::vector<FitOutcome> out(samples.size());
    parallel_for(samples.size(), threads, [&](std::size_t i) {
        const AlignedSample& s = samples[i];
        try {
            BatchDesignCache::Key key;
            key.reserve(s.panel_rows.size() + 1);
            key.push_back(static_cast<std::uint32_t>(s.n_cols()));
            for (std::size_t r : s.panel_rows) key.push_back(static_cast<std::uint32_t>(r));
            if (s.n_obs() < s.n_cols() + 1) {
                throw FitError(FitErrorKind::InsufficientObservations, "insufficient observations");
            }
            auto op = cache.get_or_build(key, [&] {
                return SolveOperator::build(s.x, s.n_obs(), s.n_cols());
            });
            out[i] = op->fit(s.y);
        } catch (const FitError& e) {
            out[i] = e;
        }
    });
    return out;
}

std::vector<FitOutcome> batch_fit(std::span<const AlignedSample> samples, unsigned threads) {
    BatchDesignCache cache;
    return batch_fit(samples, cache, threads);
}

} // namespace fundalpha
