#include "fundalpha/regress.hpp"
#include "fundalpha/synth.hpp"

#include "support/testkit.hpp"

#include <doctest.h>

#include <atomic>
#include <cmath>
#include <random>
#include <thread>

using namespace fundalpha;
using testkit::make_sample;
using testkit::rel_close;

namespace {

// y = [1,2,2] on x = [0,1,2], solved by hand:
// X'X = [[3,3],[3,5]], det 6, X'y = [5,6]
// => alpha = 7/6, beta = 1/2, residuals (-1/6, 1/3, -1/6), SSR = 1/6, dof 1
// se(beta)  = sqrt(1/6 * 3/6) => t(beta)  = sqrt(3)
// se(alpha) = sqrt(1/6 * 5/6) => t(alpha) = 7 / sqrt(5)
AlignedSample hand_fixture() { return make_sample({{0.0}, {1.0}, {2.0}}, {1.0, 2.0, 2.0}); }

constexpr double kHandAlpha = 7.0 / 6.0;
constexpr double kHandBeta = 0.5;
constexpr double kHandSigma2 = 1.0 / 6.0;
const double kHandTBeta = std::sqrt(3.0);         // 1.7320508...
const double kHandTAlpha = 7.0 / std::sqrt(5.0);  // 3.1304951...

} // namespace

TEST_CASE("ols_fit reproduces the hand-solved normal equations") {
    const auto r = ols_fit(hand_fixture());
    CHECK(r.alpha == doctest::Approx(kHandAlpha).epsilon(1e-12));
    REQUIRE(r.betas.size() == 1);
    CHECK(r.betas[0] == doctest::Approx(kHandBeta).epsilon(1e-12));
    CHECK(r.sigma2 == doctest::Approx(kHandSigma2).epsilon(1e-12));
    CHECK(r.dof == 1);
    CHECK(r.n_obs == 3);
    CHECK_FALSE(r.degenerate);
    CHECK(r.tstats[1] == doctest::Approx(kHandTBeta).epsilon(1e-12));
    CHECK(r.tstats[0] == doctest::Approx(kHandTAlpha).epsilon(1e-12));
    CHECK(tstat_of_alpha(r) == doctest::Approx(3.1305).epsilon(1e-4));
    CHECK(r.residuals[0] == doctest::Approx(-1.0 / 6.0));
    CHECK(r.residuals[1] == doctest::Approx(1.0 / 3.0));
    CHECK(r.residuals[2] == doctest::Approx(-1.0 / 6.0));
}

TEST_CASE("perfect fit is flagged degenerate with undefined t-statistics") {
    const auto r = ols_fit(make_sample({{0.0}, {1.0}, {2.0}}, {1.0, 3.0, 5.0}));
    CHECK(r.alpha == doctest::Approx(1.0));
    CHECK(r.betas[0] == doctest::Approx(2.0));
    for (double e : r.residuals) CHECK(std::abs(e) < 1e-12);
    CHECK(r.degenerate);
    CHECK(std::isnan(r.tstats[0]));
    CHECK(std::isnan(r.tstats[1]));
    CHECK_THROWS_AS(tstat_of_alpha(r), FitError);
    try {
        (void)tstat_of_alpha(r);
    } catch (const FitError& e) {
        CHECK(e.kind() == FitErrorKind::Degenerate);
        CHECK(std::string(e.what()) == "t(α) undefined");
    }
}

TEST_CASE("duplicated factor columns are a singular design") {
    const auto s = make_sample({{0.1, 0.1}, {0.4, 0.4}, {-0.2, -0.2}, {0.3, 0.3}, {0.0, 0.0}},
                               {1.0, 2.0, 0.5, 1.5, 0.7});
    try {
        (void)ols_fit(s);
        FAIL("expected singular design");
    } catch (const FitError& e) {
        CHECK(e.kind() == FitErrorKind::SingularDesign);
        CHECK(std::string(e.what()) == "singular design");
    }
}

TEST_CASE("too few observations") {
    // k = 1 needs at least 3 rows
    const auto s = make_sample({{0.0}, {1.0}}, {1.0, 2.0});
    try {
        (void)ols_fit(s);
        FAIL("expected insufficient observations");
    } catch (const FitError& e) {
        CHECK(e.kind() == FitErrorKind::InsufficientObservations);
    }
}

TEST_CASE("tstat_of_alpha is the intercept ratio") {
    RegressionResult r;
    r.alpha = 0.002;
    r.betas = {1.0};
    r.se = {0.001, 0.1};
    r.tstats = {r.alpha / r.se[0], 10.0};
    CHECK(tstat_of_alpha(r) == doctest::Approx(2.0));
}

TEST_CASE("batch_fit shares one operator across identical coverage") {
    std::mt19937_64 rng(11);
    std::vector<AlignedSample> samples;
    for (int i = 0; i < 3; ++i) {
        auto s = testkit::random_sample(rng, 20, 3);
        samples.push_back(std::move(s));
    }
    // Same design rows for all three; only y differs.
    for (auto& s : samples) s.x = samples[0].x;
    BatchDesignCache cache;
    const auto out = batch_fit(samples, cache);
    CHECK(cache.size() == 1);
    for (std::size_t i = 0; i < samples.size(); ++i) {
        const auto& got = std::get<RegressionResult>(out[i]);
        const auto want = ols_fit(samples[i]);
        CHECK(testkit::vec_close(got.tstats, want.tstats, 1e-10));
        CHECK(testkit::vec_close(got.se, want.se, 1e-10));
        CHECK(rel_close(got.alpha, want.alpha, 1e-10));
    }
}

TEST_CASE("batch of one matches ols_fit") {
    const auto s = hand_fixture();
    const auto out = batch_fit(std::span(&s, 1));
    const auto& got = std::get<RegressionResult>(out[0]);
    const auto want = ols_fit(s);
    CHECK(rel_close(got.alpha, want.alpha, 1e-10));
    CHECK(rel_close(got.betas[0], want.betas[0], 1e-10));
    CHECK(testkit::vec_close(got.se, want.se, 1e-10));
    CHECK(testkit::vec_close(got.tstats, want.tstats, 1e-10));
}

TEST_CASE("a rank-deficient fund does not disturb the rest of the batch") {
    std::mt19937_64 rng(5);
    std::vector<AlignedSample> samples;
    samples.push_back(testkit::random_sample(rng, 15, 2));
    auto bad = testkit::random_sample(rng, 12, 2);
    for (std::size_t i = 0; i < bad.n_obs(); ++i) bad.x[i * 3 + 2] = bad.x[i * 3 + 1];
    bad.panel_rows.assign(bad.n_obs(), 0);
    for (std::size_t i = 0; i < bad.n_obs(); ++i) bad.panel_rows[i] = 100 + i;
    samples.push_back(bad);
    samples.push_back(testkit::random_sample(rng, 9, 2));
    samples[2].panel_rows = {50, 51, 52, 53, 54, 55, 56, 57, 58};

    const auto out = batch_fit(samples);
    REQUIRE(std::holds_alternative<FitError>(out[1]));
    CHECK(std::get<FitError>(out[1]).kind() == FitErrorKind::SingularDesign);
    for (std::size_t i : {0u, 2u}) {
        REQUIRE(std::holds_alternative<RegressionResult>(out[i]));
        const auto want = ols_fit(samples[i]);
        CHECK(testkit::vec_close(std::get<RegressionResult>(out[i]).tstats, want.tstats, 1e-10));
    }
}

TEST_CASE("batch_fit results do not depend on thread count") {
    std::mt19937_64 rng(99);
    std::vector<AlignedSample> samples;
    for (int i = 0; i < 64; ++i) {
        auto s = testkit::random_sample(rng, 24, 5);
        if (i % 2 == 0) {
            if (!samples.empty()) s.x = samples[0].x;
        } else {
            for (auto& r : s.panel_rows) r += 1000 * static_cast<std::size_t>(i);
        }
        samples.push_back(std::move(s));
    }
    const auto one = batch_fit(samples, 1);
    const auto many = batch_fit(samples, 8);
    for (std::size_t i = 0; i < samples.size(); ++i) {
        const auto& a = std::get<RegressionResult>(one[i]);
        const auto& b = std::get<RegressionResult>(many[i]);
        CHECK(a.alpha == b.alpha);
        CHECK(a.tstats == b.tstats);
        CHECK(a.residuals == b.residuals);
    }
}

TEST_CASE("BatchDesignCache builds each key once under contention") {
    BatchDesignCache cache;
    std::atomic<int> builds{0};
    const auto s = hand_fixture();
    std::vector<std::jthread> pool;
    for (int t = 0; t < 8; ++t) {
        pool.emplace_back([&] {
            for (int rep = 0; rep < 50; ++rep) {
                auto op = cache.get_or_build({1, 2, 3}, [&] {
                    ++builds;
                    return SolveOperator::build(s.x, s.n_obs(), s.n_cols());
                });
                CHECK(op->n_obs() == 3);
            }
        });
    }
    pool.clear();
    CHECK(builds.load() == 1);
    CHECK(cache.size() == 1);
}

TEST_CASE("cached operator errors are replayed") {
    BatchDesignCache cache;
    int builds = 0;
    auto failing = [&]() -> SolveOperator {
        ++builds;
        throw FitError(FitErrorKind::SingularDesign, "singular design");
    };
    CHECK_THROWS_AS(cache.get_or_build({7}, failing), FitError);
    CHECK_THROWS_AS(cache.get_or_build({7}, failing), FitError);
    CHECK(builds == 1);
}

TEST_CASE("response length mismatch is rejected") {
    const auto s = hand_fixture();
    const auto op = SolveOperator::build(s.x, s.n_obs(), s.n_cols());
    const std::vector<double> y{1.0, 2.0};
    CHECK_THROWS_AS(op.fit(y), FitError);
}

// ---------------------------------------------------------------------------
// Properties
// ---------------------------------------------------------------------------

TEST_CASE("property: residuals are orthogonal to the design") {
    std::mt19937_64 rng(2024);
    std::uniform_int_distribution<std::size_t> kd(1, 5);
    for (int c = 0; c < 200; ++c) {
        const std::size_t k = kd(rng);
        std::uniform_int_distribution<std::size_t> nd(k + 2, 40);
        const auto s = testkit::random_sample(rng, nd(rng), k);
        const auto r = ols_fit(s);
        double ynorm = 0.0;
        for (double v : s.y) ynorm += v * v;
        ynorm = std::sqrt(ynorm);
        for (std::size_t j = 0; j < s.n_cols(); ++j) {
            double dot = 0.0;
            for (std::size_t i = 0; i < s.n_obs(); ++i) dot += s.at(i, j) * r.residuals[i];
            CHECK(std::abs(dot) <= 1e-9 * ynorm);
        }
        // fitted + residuals reconstructs y
        for (std::size_t i = 0; i < s.n_obs(); ++i) {
            double fitted = r.alpha;
            for (std::size_t j = 1; j < s.n_cols(); ++j) fitted += s.at(i, j) * r.betas[j - 1];
            CHECK(rel_close(fitted + r.residuals[i], s.y[i], 1e-12, ynorm));
        }
    }
}

TEST_CASE("property: scaling y scales coefficients and leaves t unchanged") {
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> cd(-50.0, 50.0);
    for (int c = 0; c < 150; ++c) {
        auto s = testkit::random_sample(rng, 30, 4);
        const auto base = ols_fit(s);
        double scale = cd(rng);
        if (std::abs(scale) < 0.1) scale = 3.0;
        for (double& v : s.y) v *= scale;
        const auto r = ols_fit(s);
        CHECK(rel_close(r.alpha, scale * base.alpha, 1e-10, std::abs(scale) * 1e-6));
        for (std::size_t j = 0; j < base.betas.size(); ++j) {
            CHECK(rel_close(r.betas[j], scale * base.betas[j], 1e-10, std::abs(scale) * 1e-6));
        }
        for (std::size_t j = 0; j < base.se.size(); ++j) {
            CHECK(rel_close(r.se[j], std::abs(scale) * base.se[j], 1e-10));
            CHECK(rel_close(r.tstats[j], (scale > 0 ? 1 : -1) * base.tstats[j], 1e-10, 1e-6));
        }
    }
}

TEST_CASE("property: adding a constant to y shifts only alpha") {
    std::mt19937_64 rng(8);
    std::uniform_real_distribution<double> cd(-5.0, 5.0);
    for (int c = 0; c < 150; ++c) {
        auto s = testkit::random_sample(rng, 25, 3);
        const auto base = ols_fit(s);
        const double shift = cd(rng);
        for (double& v : s.y) v += shift;
        const auto r = ols_fit(s);
        CHECK(std::abs(r.alpha - (base.alpha + shift)) <= 1e-10 * std::max(1.0, std::abs(shift)));
        CHECK(testkit::vec_close(r.betas, base.betas, 1e-10));
    }
}

TEST_CASE("nested model: a zero column is rejected, an orthogonal column changes nothing") {
    std::mt19937_64 rng(31);
    for (int c = 0; c < 100; ++c) {
        const auto s = testkit::random_sample(rng, 30, 3);
        const auto base = ols_fit(s);

        // All-zero column: X'X is exactly singular.
        AlignedSample zero = s;
        zero.cols = s.cols + 1;
        zero.x.clear();
        for (std::size_t i = 0; i < s.n_obs(); ++i) {
            for (std::size_t j = 0; j < s.cols; ++j) zero.x.push_back(s.at(i, j));
            zero.x.push_back(0.0);
        }
        CHECK_THROWS_AS(ols_fit(zero), FitError);

        // Column orthogonal to X and y: same alpha, betas and SSR.
        std::normal_distribution<double> g;
        std::vector<double> z(s.n_obs());
        for (double& v : z) v = g(rng);
        auto project_out = [&](const std::vector<double>& w) {
            double ww = 0.0, zw = 0.0;
            for (std::size_t i = 0; i < w.size(); ++i) {
                ww += w[i] * w[i];
                zw += z[i] * w[i];
            }
            for (std::size_t i = 0; i < w.size(); ++i) z[i] -= zw / ww * w[i];
        };
        // Gram-Schmidt against an orthogonal basis of [X, y], twice for accuracy.
        std::vector<std::vector<double>> basis;
        for (std::size_t j = 0; j <= s.cols; ++j) {
            std::vector<double> w(s.n_obs());
            for (std::size_t i = 0; i < s.n_obs(); ++i) w[i] = j < s.cols ? s.at(i, j) : s.y[i];
            for (const auto& b : basis) {
                double bb = 0.0, wb = 0.0;
                for (std::size_t i = 0; i < w.size(); ++i) {
                    bb += b[i] * b[i];
                    wb += w[i] * b[i];
                }
                for (std::size_t i = 0; i < w.size(); ++i) w[i] -= wb / bb * b[i];
            }
            basis.push_back(w);
        }
        for (int pass = 0; pass < 2; ++pass) {
            for (const auto& b : basis) project_out(b);
        }
        AlignedSample wide = s;
        wide.cols = s.cols + 1;
        wide.x.clear();
        for (std::size_t i = 0; i < s.n_obs(); ++i) {
            for (std::size_t j = 0; j < s.cols; ++j) wide.x.push_back(s.at(i, j));
            wide.x.push_back(z[i]);
        }
        const auto r = ols_fit(wide);
        CHECK(rel_close(r.alpha, base.alpha, 1e-9, 1e-6));
        for (std::size_t j = 0; j < base.betas.size(); ++j) {
            CHECK(rel_close(r.betas[j], base.betas[j], 1e-9, 1e-6));
        }
        CHECK(std::abs(r.betas.back()) < 1e-9);
        CHECK(r.dof + 1 == base.dof);
        CHECK(rel_close(r.sigma2 * r.dof, base.sigma2 * base.dof, 1e-9));
    }
}

TEST_CASE("property: batch_fit agrees with the independent oracle") {
    std::mt19937_64 rng(123);
    const std::array ks{1u, 3u, 4u, 5u};
    std::vector<AlignedSample> samples;
    for (int c = 0; c < 300; ++c) {
        const std::size_t k = ks[static_cast<std::size_t>(c) % ks.size()];
        std::uniform_int_distribution<std::size_t> nd(k + 2, 30);
        samples.push_back(testkit::random_sample(rng, nd(rng), k));
        samples.back().panel_rows.assign(samples.back().n_obs(), 0);
        for (std::size_t i = 0; i < samples.back().n_obs(); ++i) samples.back().panel_rows[i] = 1000 * c + i;
    }
    const auto out = batch_fit(samples);
    for (std::size_t i = 0; i < samples.size(); ++i) {
        const auto want = oracle_fit(samples[i]);
        const auto& got = std::get<RegressionResult>(out[i]);
        std::vector<double> gc{got.alpha}, wc{want.alpha};
        gc.insert(gc.end(), got.betas.begin(), got.betas.end());
        wc.insert(wc.end(), want.betas.begin(), want.betas.end());
        CHECK(testkit::vec_close(gc, wc, 1e-10));
        CHECK(testkit::vec_close(got.se, want.se, 1e-10));
        CHECK(testkit::vec_close(got.tstats, want.tstats, 1e-10));
    }
}

TEST_CASE("DesignMatrix rows follow the model's column order") {
    FactorPanel::Columns cols;
    cols[static_cast<std::size_t>(Factor::MktRf)] = std::vector<double>{0.1, 0.2};
    cols[static_cast<std::size_t>(Factor::Smb)] = std::vector<double>{0.3, 0.4};
    cols[static_cast<std::size_t>(Factor::Hml)] = std::vector<double>{0.5, 0.6};
    cols[static_cast<std::size_t>(Factor::Rmw)] = std::vector<double>{0.7, 0.8};
    cols[static_cast<std::size_t>(Factor::Cma)] = std::vector<double>{0.9, 1.0};
    cols[static_cast<std::size_t>(Factor::Rf)] = std::vector<double>{0.01, 0.01};
    const FactorPanel panel({{2000, 1}, {2000, 2}}, cols);
    const auto d = DesignMatrix::for_model(panel, Model::FF5);
    CHECK(d.cols == 6);
    const std::vector<double> row1(d.row(1).begin(), d.row(1).end());
    CHECK(row1 == std::vector<double>{1.0, 0.2, 0.4, 0.6, 0.8, 1.0});
    CHECK_THROWS_AS(DesignMatrix::for_model(panel, Model::Carhart4), DataError);
}
