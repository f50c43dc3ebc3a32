#include "doctest.h"
#include "test_util.hpp"

#include "nefep/estimators.hpp"
#include "nefep/oracle.hpp"

#include <cmath>
#include <random>

using namespace nefep;

namespace {

TrajectoryResult make_sample(double work, double logw = 0.0, bool diverged = false) {
    TrajectoryResult r;
    r.x_final = Vec::Zero(1);
    r.work = work;
    r.log_weight = logw;
    r.diverged = diverged;
    return r;
}

}  // namespace

TEST_CASE("jarzynski_estimate basics") {
    const double beta = 5.0;

    SUBCASE("constant work gives dF = c") {
        std::vector<TrajectoryResult> s;
        for (int i = 0; i < 9; ++i) s.push_back(make_sample(0.73));
        auto rep = jarzynski_estimate(s, beta);
        CHECK(rep.dF == doctest::Approx(0.73).epsilon(1e-12));
        CHECK(rep.n_effective == doctest::Approx(9.0).epsilon(1e-12));
        CHECK(rep.mean_work == doctest::Approx(0.73).epsilon(1e-12));
    }
    SUBCASE("single zero-work sample") {
        std::vector<TrajectoryResult> s{make_sample(0.0)};
        auto rep = jarzynski_estimate(s, beta);
        CHECK(rep.estimate_I == 1.0);
        CHECK(rep.dF == 0.0);
    }
    SUBCASE("dF = -log(I)/beta holds exactly") {
        std::mt19937_64 rng(1);
        std::normal_distribution<double> nd(0.3, 0.5);
        std::vector<TrajectoryResult> s;
        for (int i = 0; i < 1000; ++i) s.push_back(make_sample(nd(rng), 0.1 * nd(rng)));
        auto rep = jarzynski_estimate(s, beta);
        CHECK(rep.dF == -std::log(rep.estimate_I) / beta);
        CHECK(rep.estimate_I > 0.0);
        CHECK(rep.n_effective <= 1000.0);
    }
    SUBCASE("log-sum-exp path agrees with the naive mean when finite") {
        std::mt19937_64 rng(2);
        std::normal_distribution<double> nd(0.0, 1.0);
        std::vector<TrajectoryResult> s;
        KahanSum naive;
        const int n = 4096;
        for (int i = 0; i < n; ++i) {
            const double w = nd(rng);
            s.push_back(make_sample(w));
            naive.add(std::exp(-beta * w));
        }
        auto rep = jarzynski_estimate(s, beta);
        CHECK(rep.estimate_I == doctest::Approx(naive.value() / n).epsilon(1e-12));
    }
    SUBCASE("overflow-prone exponents still work") {
        std::vector<TrajectoryResult> s{make_sample(-400.0), make_sample(-399.5)};
        auto rep = jarzynski_estimate(s, beta);  // exp(2000) overflows a double
        CHECK(std::isfinite(rep.dF));
        CHECK(rep.dF < -390.0);
    }
    SUBCASE("diverged samples are skipped; all-diverged is an error") {
        std::vector<TrajectoryResult> s{make_sample(1.0, 0.0, true), make_sample(0.5)};
        auto rep = jarzynski_estimate(s, beta);
        CHECK(rep.n_samples == 1);
        CHECK(rep.n_diverged == 1);
        std::vector<TrajectoryResult> bad{make_sample(1.0, 0.0, true)};
        CHECK_THROWS_AS(jarzynski_estimate(bad, beta), NumericsError);
    }
    SUBCASE("second-law inequality in sampled form") {
        std::mt19937_64 rng(3);
        std::normal_distribution<double> nd(0.8, 0.4);
        std::vector<TrajectoryResult> s;
        std::vector<double> works;
        for (int i = 0; i < 20000; ++i) {
            const double w = nd(rng);
            s.push_back(make_sample(w));
            works.push_back(w);
        }
        auto rep = jarzynski_estimate(s, beta);
        CHECK(rep.dF <= rep.mean_work + 3.0 * testutil::stderr_of_mean(works));
    }
}

TEST_CASE("combine_runs aggregates per-run statistics") {
    const double beta = 2.0;
    std::mt19937_64 rng(4);
    std::normal_distribution<double> nd(0.5, 0.3);
    std::vector<EstimatorReport> runs;
    for (int r = 0; r < 10; ++r) {
        std::vector<TrajectoryResult> s;
        for (int i = 0; i < 500; ++i) s.push_back(make_sample(nd(rng)));
        runs.push_back(jarzynski_estimate(s, beta));
    }
    auto rep = combine_runs(runs, beta);
    CHECK(rep.per_run_dF.size() == 10);
    CHECK(rep.n_samples == 5000);
    CHECK(std::isfinite(rep.sd_I));
    CHECK(std::isfinite(rep.sd_dF));
    CHECK(rep.dF == doctest::Approx(-std::log(rep.estimate_I) / beta));
    CHECK(rep.sd_dF > 0.0);
    CHECK(rep.sd_dF < 0.1);
}

TEST_CASE("work histogram") {
    SUBCASE("single sample density is 1/binwidth in its bin") {
        HistogramSpec spec{-1.0, 1.0, 1.0};
        std::vector<TrajectoryResult> s{make_sample(0.0)};
        auto [mean_w, hist] = work_statistics(s, spec);
        CHECK(mean_w == 0.0);
        auto d = hist.densities();
        REQUIRE(d.size() == 2);
        CHECK(d[0] == 0.0);
        CHECK(d[1] == doctest::Approx(1.0));  // bin [0,1), width 1
    }
    SUBCASE("densities integrate to one") {
        HistogramSpec spec{-5.0, 5.0, 0.05};
        std::mt19937_64 rng(5);
        std::normal_distribution<double> nd(0.0, 1.0);
        std::vector<TrajectoryResult> s;
        for (int i = 0; i < 10000; ++i) s.push_back(make_sample(nd(rng)));
        auto [mean_w, hist] = work_statistics(s, spec);
        double mass = 0.0;
        for (double d : hist.densities()) mass += d * spec.bin_width;
        CHECK(mass == doctest::Approx(1.0).epsilon(1e-12));
    }
    SUBCASE("out-of-range samples are counted, not binned") {
        HistogramSpec spec{-1.0, 1.0, 0.5};
        std::vector<TrajectoryResult> s{make_sample(0.2), make_sample(9.0)};
        auto [mean_w, hist] = work_statistics(s, spec);
        CHECK(hist.n_in_range == 1);
        CHECK(hist.n_out_of_range == 1);
    }
}

TEST_CASE("df_curve") {
    const double beta = 5.0;

    SUBCASE("grid {0} gives dF = 0") {
        TrajectoryResult r = make_sample(0.4);
        r.checkpoint_work = {0.0};
        r.checkpoint_log_weight = {0.0};
        std::vector<TrajectoryResult> s{r};
        auto curve = df_curve(s, beta, {0.0}, {0.0});
        CHECK(curve.dF[0] == 0.0);
    }
    SUBCASE("frozen state under V = lambda x with x = c: dF is linear") {
        const double c = 0.8;
        std::vector<double> grid_t = {0.0, 0.25, 0.5, 0.75, 1.0};
        std::vector<TrajectoryResult> s;
        for (int i = 0; i < 4; ++i) {
            TrajectoryResult r = make_sample(c);
            for (double t : grid_t) {
                r.checkpoint_work.push_back(c * t);
                r.checkpoint_log_weight.push_back(0.0);
            }
            s.push_back(r);
        }
        auto curve = df_curve(s, beta, grid_t, grid_t);
        for (std::size_t k = 0; k < grid_t.size(); ++k)
            CHECK(curve.dF[k] == doctest::Approx(c * grid_t[k]).epsilon(1e-12));
    }
    SUBCASE("endpoint matches the single-point estimate") {
        std::mt19937_64 rng(6);
        std::normal_distribution<double> nd(0.3, 0.2);
        std::vector<TrajectoryResult> s;
        for (int i = 0; i < 2000; ++i) {
            const double w = nd(rng);
            TrajectoryResult r = make_sample(w);
            r.checkpoint_work = {0.0, 0.5 * w, w};
            r.checkpoint_log_weight = {0.0, 0.0, 0.0};
            s.push_back(r);
        }
        auto curve = df_curve(s, beta, {0.0, 0.5, 1.0}, {0.0, 0.5, 1.0});
        auto rep = jarzynski_estimate(s, beta);
        CHECK(curve.dF.back() == doctest::Approx(rep.dF).epsilon(1e-12));
        CHECK(curve.dF.front() == 0.0);
    }
}

TEST_CASE("crooks_diagnostic edge cases") {
    const double beta = 5.0;
    SUBCASE("single zero-work pair gives ratio 1 in the zero bin") {
        std::vector<TrajectoryResult> f{make_sample(0.0)}, r{make_sample(0.0)};
        HistogramSpec bins{-1.0, 1.0, 0.5};
        auto table = crooks_diagnostic(f, r, beta, 0.0, bins);
        bool found = false;
        for (const auto& b : table) {
            if (b.w_lo <= 0.0 && 0.0 < b.w_hi) {
                CHECK(b.defined);
                CHECK(b.ratio == doctest::Approx(1.0));
                found = true;
            } else {
                CHECK(!b.defined);
            }
        }
        CHECK(found);
    }
    SUBCASE("frozen protocol: all work zero, ratio 1 everywhere occupied") {
        std::vector<TrajectoryResult> f, r;
        for (int i = 0; i < 64; ++i) {
            f.push_back(make_sample(0.0));
            r.push_back(make_sample(0.0));
        }
        HistogramSpec bins{-1.0, 1.0, 0.25};
        auto table = crooks_diagnostic(f, r, beta, 0.0, bins);
        for (const auto& b : table)
            if (b.defined) CHECK(b.ratio == doctest::Approx(1.0));
    }
    SUBCASE("empty ensembles are rejected") {
        std::vector<TrajectoryResult> f{make_sample(0.0)}, empty;
        CHECK_THROWS_AS(crooks_diagnostic(f, empty, beta, 0.0, HistogramSpec{}), ConfigError);
    }
}

TEST_CASE("ti_estimate") {
    SUBCASE("lambda-independent potential gives zero") {
        auto mf = [](double) { return 0.0; };
        CHECK(ti_estimate(mf, uniform_grid(0.0, 1.0, 50)) == 0.0);
    }
    SUBCASE("quadratic mean force integrates to the known value") {
        auto mf = [](double s) { return 3.0 * s * s; };
        CHECK(ti_estimate(mf, uniform_grid(0.0, 1.0, 2001)) == doctest::Approx(1.0).epsilon(1e-6));
    }
    SUBCASE("example 1 with exact equilibrium expectations reaches the oracle") {
        Oracle1D o = example1_oracle();
        auto mf = [&](double lam) {
            return o.equilibrium_mean(
                lam, [lam](double x) { return Example1Potential::grad_lambda_value(x, lam); });
        };
        const double ti = ti_estimate(mf, uniform_grid(0.0, 1.0, 100));
        CHECK(std::abs(ti - o.delta_f(1.0, 0.0)) < 2e-3);
    }
}
