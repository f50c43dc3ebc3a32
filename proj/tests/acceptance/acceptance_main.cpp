// Acceptance suite: runs every acceptance criterion at its stated scale and
// prints one PASS/FAIL line per criterion.
//
// NEFEP_ACCEPT_SCALE=full   (default) paper-scale parameters everywhere
// NEFEP_ACCEPT_SCALE=desk   criterion 3 falls back to N=5e4 with the
//                           sanctioned sqrt(10)-widened SD band; criteria
//                           4-7 are reported SKIP (no sanctioned fallback)
// NEFEP_ACCEPT_SCALE=smoke  tiny ensembles, informational only, always exits 0
//
// Criterion 2's kappa=0.6 reference is implemented exactly as specified and
// is expected to FAIL: the stated reference value -3.74e-1 contradicts the
// closed-form value of the stated potential (-3.6663e-1; the stated value
// matches the kappa=0.7 closed form instead). That one documented failure
// does not affect the exit code; any other failure does.

#include "nefep/crossentropy.hpp"
#include "nefep/estimators.hpp"
#include "nefep/model.hpp"
#include "nefep/oracle.hpp"
#include "nefep/pdeopt.hpp"
#include "nefep/sde.hpp"
#include "nefep/sde_rc.hpp"

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <string>
#include <vector>

using namespace nefep;

namespace {

enum class Scale { Full, Desk, Smoke };
Scale g_scale = Scale::Full;

struct Outcome {
    bool pass = false;
    bool skipped = false;
    bool expected_fail = false;
    std::string detail;
};

int g_unexpected_failures = 0;

void report(const std::string& name, const Outcome& o) {
    const char* verdict = o.skipped ? "SKIP" : (o.pass ? "PASS" : "FAIL");
    std::printf("%s  %s%s%s\n", verdict, name.c_str(), o.detail.empty() ? "" : " -- ",
                o.detail.c_str());
    std::fflush(stdout);
    if (!o.pass && !o.skipped && !o.expected_fail && g_scale != Scale::Smoke)
        ++g_unexpected_failures;
}

std::string fmt(double x) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.4g", x);
    return buf;
}

struct Timer {
    std::chrono::steady_clock::time_point t0 = std::chrono::steady_clock::now();
    double s() const {
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    }
};

constexpr double kBeta = 5.0;
constexpr double kThetaStart = M_PI / 6.0;
constexpr double kThetaEnd = M_PI / 2.0;
constexpr double kThetaDrive = M_PI / 3.0;

std::size_t scaled(std::size_t full) {
    if (g_scale == Scale::Smoke) return std::max<std::size_t>(full / 100, 200);
    return full;
}

// ---------------------------------------------------------------------------
// example-1 multi-run machinery
// ---------------------------------------------------------------------------

template <class Control>
EstimatorReport ex1_multirun(const Control& control, const Sampler1D& initial,
                             bool reweight_initial, std::size_t n_traj, int n_runs,
                             std::uint64_t seed, double dt = 5e-4) {
    Example1Potential model;
    LinearProtocol protocol;
    const GaussianSampler mu0(-1.0, 1.0 / kBeta);
    IntegratorConfig cfg = make_config(dt, 1.0, seed);
    std::vector<EstimatorReport> runs;
    for (int r = 0; r < n_runs; ++r) {
        auto ens = run_ensemble(n_traj, seed, static_cast<std::uint64_t>(r),
                                [&](NoiseStream& ns, std::size_t) {
                                    const double x0 = initial.sample(ns);
                                    SimOptions opts;
                                    if (reweight_initial)
                                        opts.initial_log_weight =
                                            mu0.log_density(x0) - initial.log_density(x0);
                                    return simulate_alchemical(model, protocol, kBeta, control,
                                                               x0, cfg, ns, opts);
                                });
        runs.push_back(jarzynski_estimate(ens.results, kBeta));
    }
    return combine_runs(runs, kBeta);
}

struct Ex2Run {
    EstimatorReport report;
    double max_violation = 0.0;
};

Ex2Run ex2_multirun(double kappa, double tau, std::size_t n_traj, int n_runs, std::uint64_t seed,
                    double dt = 1e-4) {
    Ex2RcSystem sys;
    sys.p.kappa = kappa;
    IntegratorConfig cfg = make_config(dt, 1.0, seed);
    auto sched = make_rc_schedule(sys, [](double, double) { return kThetaDrive; }, kThetaStart,
                                  cfg);
    RcLevelDensity init(sys.p, kThetaStart, Quadrature2DConfig{});
    Ex2Run out;
    std::vector<EstimatorReport> runs;
    for (int r = 0; r < n_runs; ++r) {
        auto ens = run_ensemble(n_traj, seed, static_cast<std::uint64_t>(r),
                                [&](NoiseStream& ns, std::size_t) {
                                    return simulate_rc(sys, sched, kBeta, tau, NoControl{},
                                                       init.sample_state(ns), cfg, ns);
                                });
        for (const auto& t : ens.results)
            out.max_violation = std::max(out.max_violation, t.max_constraint_violation);
        runs.push_back(jarzynski_estimate(ens.results, kBeta));
    }
    out.report = combine_runs(runs, kBeta);
    return out;
}

double sd_across(const std::vector<double>& v) {
    double m = 0.0;
    for (double x : v) m += x;
    m /= static_cast<double>(v.size());
    double s = 0.0;
    for (double x : v) s += (x - m) * (x - m);
    return std::sqrt(s / static_cast<double>(v.size() - 1));
}

double se_of_mean_vals(const std::vector<double>& vals) {
    return sd_across(vals) / std::sqrt(static_cast<double>(vals.size()));
}

// ---------------------------------------------------------------------------
// criteria
// ---------------------------------------------------------------------------

Outcome criterion1() {
    Oracle1D oracle = example1_oracle();
    const double df = oracle.delta_f(1.0, 0.0);
    Outcome o;
    o.pass = std::abs(df - (-0.344)) < 1e-3;
    o.detail = "oracle dF(1) = " + fmt(df) + " vs -0.344 (tol 1e-3)";
    return o;
}

Outcome criterion2() {
    OracleRc o03;
    o03.params.kappa = 0.3;
    OracleRc o06;
    o06.params.kappa = 0.6;
    const double df3 = o03.delta_f(kThetaEnd, kThetaStart);
    const double df6 = o06.delta_f(kThetaEnd, kThetaStart);
    const bool pass3 = std::abs(df3 - (-0.342)) < 2e-3;
    const bool pass6 = std::abs(df6 - (-0.374)) < 2e-3;
    Outcome o;
    o.pass = pass3 && pass6;
    o.expected_fail = pass3 && !pass6;
    o.detail = "kappa=0.3: dF = " + fmt(df3) + " vs -0.342 (" + (pass3 ? "ok" : "off") +
               "); kappa=0.6: dF = " + fmt(df6) + " vs -0.374 (" + (pass6 ? "ok" : "off") + ")";
    if (o.expected_fail)
        o.detail +=
            " [expected failure: the stated kappa=0.6 reference equals the kappa=0.7 closed "
            "form; the measured value matches the exact closed form -0.36663]";
    return o;
}

struct StdMcResults {
    EstimatorReport mu0;
    bool have = false;
};
StdMcResults g_stdmc;

Outcome criterion3() {
    std::size_t n = 500000;
    double widen = 1.0;
    if (g_scale == Scale::Desk) {
        n = 50000;
        widen = std::sqrt(10.0);
    }
    n = scaled(n);
    const GaussianSampler mu0(-1.0, 1.0 / kBeta);
    Timer t;
    g_stdmc.mu0 = ex1_multirun(NoControl{}, mu0, false, n, 10, 101);
    g_stdmc.have = true;
    const auto& rep = g_stdmc.mu0;
    const double mean_df = rep.mean_dF_across_runs();
    const double in_band = std::abs(mean_df - (-0.353));
    const bool b1 = in_band <= 3.0 * rep.sd_dF;
    const bool b2 = rep.sd_dF >= 2e-2 * widen && rep.sd_dF <= 2e-1 * widen;
    const bool b3 = std::abs(rep.mean_work - 0.40) <= 0.1;
    Outcome o;
    o.pass = b1 && b2 && b3;
    o.detail = "N=" + std::to_string(n) + ": mean dF = " + fmt(mean_df) + " (|d|=" +
               fmt(in_band) + " vs 3SD=" + fmt(3.0 * rep.sd_dF) + "), SD dF = " + fmt(rep.sd_dF) +
               " in [" + fmt(2e-2 * widen) + "," + fmt(2e-1 * widen) + "], mean W = " +
               fmt(rep.mean_work) + " (0.40 +- 0.1), " + fmt(t.s()) + "s";
    return o;
}

struct CeResults {
    EstimatorReport report;
    bool have = false;
};
CeResults g_ce;

Outcome criterion5() {
    if (g_scale == Scale::Desk) return {false, true, false, "no sanctioned desk fallback"};
    const std::size_t n = scaled(500000);
    const std::size_t n_pilot = scaled(100000);
    Example1Potential model;
    LinearProtocol protocol;
    GaussianDerivBasis1D basis;
    const GaussianSampler mubar(0.5, 1.0 / kBeta);
    Timer t;
    auto pilot = iterate_ce(model, protocol, basis, basis.k, mubar,
                            {{0.4 * kBeta, n_pilot}, {kBeta, n_pilot}}, 5e-4, 777);
    BasisControl1D<GaussianDerivBasis1D> control{&basis, pilot.omega};
    g_ce.report = ex1_multirun(control, mubar, true, n, 10, 103);
    g_ce.have = true;
    Oracle1D oracle = example1_oracle();
    const double df_ref = oracle.delta_f(1.0, 0.0);
    const double mean_df = g_ce.report.mean_dF_across_runs();
    const bool acc = std::abs(mean_df - df_ref) <= 2e-3;
    const bool prec = g_ce.report.sd_dF <= 1e-3;
    Outcome o;
    o.pass = acc && prec;
    o.detail = "CE gaussian from mubar0: mean dF = " + fmt(mean_df) + " (oracle " + fmt(df_ref) +
               ", tol 2e-3), SD dF = " + fmt(g_ce.report.sd_dF) + " (<= 1e-3), " + fmt(t.s()) +
               "s";
    return o;
}

struct OptResults {
    EstimatorReport full_runs;
    double cov = 0.0;
    double mean_df = 0.0;
    bool have = false;
};
OptResults g_opt;

Outcome criterion6() {
    if (g_scale == Scale::Desk) return {false, true, false, "no sanctioned desk fallback"};
    Timer t;
    auto problem = example1_pde_problem();
    GridSpec spec;  // 2000 x 2000
    auto sol = solve_g(problem, kBeta, spec);
    GridControl ustar(sol);
    GridDensity mu0star(sol, problem.v0);
    const GaussianSampler mu0(-1.0, 1.0 / kBeta);
    Example1Potential model;
    LinearProtocol protocol;
    IntegratorConfig cfg = make_config(5e-4, 1.0, 105);

    const std::size_t n = scaled(10000);
    auto ens = run_ensemble(n, 105, 0, [&](NoiseStream& ns, std::size_t) {
        const double x0 = mu0star.sample(ns);
        SimOptions opts;
        opts.initial_log_weight = mu0.log_density(x0) - mu0star.log_density(x0);
        return simulate_alchemical(model, protocol, kBeta, ustar, x0, cfg, ns, opts);
    });
    std::vector<double> vals;
    for (const auto& r : ens.results)
        if (!r.diverged) vals.push_back(std::exp(-kBeta * r.work + r.log_weight));
    double m = 0.0;
    for (double v : vals) m += v;
    m /= static_cast<double>(vals.size());
    g_opt.cov = sd_across(vals) / m;
    g_opt.mean_df = -std::log(m) / kBeta;

    // the 10-run production ensemble feeding the variance-ordering criterion
    struct Fwd final : Sampler1D {
        const GridDensity* d;
        double sample(NoiseStream& ns) const override { return d->sample(ns); }
        double log_density(double x) const override { return d->log_density(x); }
    };
    Fwd fwd;
    fwd.d = &mu0star;
    g_opt.full_runs = ex1_multirun(ustar, fwd, true, scaled(500000), 10, 106);
    g_opt.have = true;

    Oracle1D oracle = example1_oracle();
    const double df_ref = oracle.delta_f(1.0, 0.0);
    const bool cov_ok = g_opt.cov <= 0.05;
    const bool df_ok = std::abs(g_opt.mean_df - df_ref) <= 1e-3;
    Outcome o;
    o.pass = cov_ok && df_ok;
    o.detail = "CoV = " + fmt(g_opt.cov) + " (<= 0.05) at N=" + std::to_string(n) + ", dF = " +
               fmt(g_opt.mean_df) + " (oracle " + fmt(df_ref) + ", tol 1e-3), " + fmt(t.s()) +
               "s";
    return o;
}

Outcome criterion4() {
    if (g_scale == Scale::Desk) return {false, true, false, "no sanctioned desk fallback"};
    if (!g_stdmc.have || !g_ce.have || !g_opt.have)
        return {false, false, false, "prerequisite runs missing"};
    Timer t;
    const GaussianSampler mubar(0.5, 1.0 / kBeta);
    auto stdmc_mubar = ex1_multirun(NoControl{}, mubar, true, scaled(500000), 10, 104);

    const double sd_opt = g_opt.full_runs.sd_I;
    const double sd_ce = g_ce.report.sd_I;
    const double sd_mubar = stdmc_mubar.sd_I;
    const double sd_mu0 = g_stdmc.mu0.sd_I;
    const bool ordered =
        sd_opt * 3.0 <= sd_ce && sd_ce * 3.0 <= sd_mubar && sd_mubar * 3.0 <= sd_mu0;
    Outcome o;
    o.pass = ordered;
    o.detail = "SD(I): optimal " + fmt(sd_opt) + " < CE " + fmt(sd_ce) + " < stdMC(mubar0) " +
               fmt(sd_mubar) + " < stdMC(mu0) " + fmt(sd_mu0) + " (each x3), " + fmt(t.s()) + "s";
    return o;
}

Outcome criterion7() {
    if (g_scale == Scale::Desk) return {false, true, false, "no sanctioned desk fallback"};
    Timer t;
    const std::size_t n = scaled(500000);
    const double taus[3] = {1.0, 0.6, 0.3};
    const double sd_ref[3] = {1.6e-1, 4.0e-2, 1.3e-2};
    const double w_ref[3] = {2.14, 1.22, 0.46};
    double sd_df[3], mean_w[3], mean_df[3];
    for (int i = 0; i < 3; ++i) {
        auto run = ex2_multirun(0.6, taus[i], n, 10, 300 + i);
        sd_df[i] = run.report.sd_dF;
        mean_w[i] = run.report.mean_work;
        mean_df[i] = run.report.mean_dF_across_runs();
        std::printf("  .. tau=%.1f: mean dF = %s, SD dF = %s, mean W = %s (%.0fs)\n", taus[i],
                    fmt(mean_df[i]).c_str(), fmt(sd_df[i]).c_str(), fmt(mean_w[i]).c_str(),
                    t.s());
        std::fflush(stdout);
    }
    bool ok = true;
    std::string why;
    for (int i = 0; i < 3; ++i) {
        if (std::abs(sd_df[i] - sd_ref[i]) > 0.3 * sd_ref[i]) {
            ok = false;
            why += " SDdF[tau=" + fmt(taus[i]) + "]=" + fmt(sd_df[i]) + " vs " + fmt(sd_ref[i]);
        }
        if (std::abs(mean_w[i] - w_ref[i]) > 0.3 * w_ref[i]) {
            ok = false;
            why += " W[tau=" + fmt(taus[i]) + "]=" + fmt(mean_w[i]) + " vs " + fmt(w_ref[i]);
        }
    }
    if (!(sd_df[0] > sd_df[1] && sd_df[1] > sd_df[2])) {
        ok = false;
        why += " SD dF not decreasing";
    }
    if (!(mean_w[0] > mean_w[1] && mean_w[1] > mean_w[2])) {
        ok = false;
        why += " mean W not decreasing";
    }
    const double dev = std::abs(mean_df[2] - (-0.374));
    if (dev > 3.0 * sd_df[2]) {
        ok = false;
        why += " tau=0.3 mean dF " + fmt(mean_df[2]) + " beyond 3SD of -0.374";
    }
    Outcome o;
    o.pass = ok;
    o.detail = "tau sweep kappa=0.6 N=" + std::to_string(n) + (ok ? ": all bands met" : why) +
               "; tau=0.3 |dF+0.374| = " + fmt(dev) + " vs 3SD = " + fmt(3.0 * sd_df[2]) + ", " +
               fmt(t.s()) + "s";
    return o;
}

Outcome criterion8() {
    Timer t;
    std::string detail;
    bool ok = true;
    auto sub = [&](const char* name, bool pass, const std::string& info) {
        ok = ok && pass;
        detail += std::string(detail.empty() ? "" : "; ") + name + (pass ? " ok" : " FAIL") +
                  (info.empty() ? "" : " (" + info + ")");
    };

    Example1Potential model;
    LinearProtocol protocol;
    Oracle1D oracle = example1_oracle();
    const double df_ref = oracle.delta_f(1.0, 0.0);
    const GaussianSampler mu0(-1.0, 1.0 / kBeta);
    IntegratorConfig cfg = make_config(5e-4, 1.0, 400);
    const std::size_t n = scaled(100000);

    {  // Girsanov mean weight
        GaussianDerivBasis1D basis;
        Vec omega(2);
        omega << 1.3, -0.8;
        BasisControl1D<GaussianDerivBasis1D> control{&basis, omega};
        auto ens = run_ensemble(n, 400, 0, [&](NoiseStream& ns, std::size_t) {
            return simulate_alchemical(model, protocol, kBeta, control, mu0.sample(ns), cfg, ns);
        });
        std::vector<double> ratios;
        for (const auto& r : ens.results)
            if (!r.diverged) ratios.push_back(std::exp(r.log_weight));
        double m = 0.0;
        for (double v : ratios) m += v;
        m /= static_cast<double>(ratios.size());
        const double se = se_of_mean_vals(ratios);
        sub("girsanov-mean-1", std::abs(m - 1.0) <= 3.0 * se,
            "mean=" + fmt(m) + " 3SE=" + fmt(3.0 * se));
    }
    {  // Jarzynski / TI / quadrature three-way agreement
        auto ens = run_ensemble(n, 401, 0, [&](NoiseStream& ns, std::size_t) {
            return simulate_alchemical(model, protocol, kBeta, NoControl{}, mu0.sample(ns), cfg,
                                       ns);
        });
        std::vector<double> vals;
        for (const auto& r : ens.results)
            if (!r.diverged) vals.push_back(std::exp(-kBeta * r.work));
        double m = 0.0;
        for (double v : vals) m += v;
        m /= static_cast<double>(vals.size());
        const double se = se_of_mean_vals(vals);
        const bool jarz_ok = std::abs(m - std::exp(-kBeta * df_ref)) <= 3.0 * se;
        auto mean_force = [&](double lam) {
            return oracle.equilibrium_mean(
                lam, [lam](double x) { return Example1Potential::grad_lambda_value(x, lam); });
        };
        const double ti = ti_estimate(mean_force, uniform_grid(0.0, 1.0, 100));
        const bool ti_ok = std::abs(ti - df_ref) <= 1e-3;
        sub("jarzynski-ti-quadrature", jarz_ok && ti_ok,
            "MC I dev=" + fmt(std::abs(m - std::exp(-kBeta * df_ref))) + " 3SE=" +
                fmt(3.0 * se) + ", TI dev=" + fmt(std::abs(ti - df_ref)));
    }
    {  // Crooks, alchemical
        QuadratureConfig qcfg;
        auto mu1 = equilibrium_sampler_1d(
            [](double x, double l) { return Example1Potential::eval(x, l); }, 1.0, kBeta, qcfg);
        auto fwd = run_ensemble(n, 402, 0, [&](NoiseStream& ns, std::size_t) {
            return simulate_alchemical(model, protocol, kBeta, NoControl{}, mu0.sample(ns), cfg,
                                       ns);
        });
        auto rev = run_ensemble(n, 402, 1, [&](NoiseStream& ns, std::size_t) {
            return simulate_reversed(model, protocol, kBeta, mu1->sample(ns), cfg, ns);
        });
        auto table =
            crooks_diagnostic(fwd.results, rev.results, kBeta, df_ref, {-2.0, 3.0, 0.25});
        bool crooks_ok = true;
        int occupied = 0;
        for (const auto& b : table) {
            if (!b.defined || b.n_forward < 100 || b.n_reverse < 100) continue;
            ++occupied;
            if (std::abs(b.deviation) > 3.0) crooks_ok = false;
        }
        sub("crooks-alchemical", crooks_ok && occupied >= 5,
            std::to_string(occupied) + " occupied bins");
    }
    {  // Crooks, reaction coordinate + constraint preservation
        Ex2RcSystem sys;
        sys.p.kappa = 0.3;
        IntegratorConfig rcfg = make_config(2e-4, 1.0, 403);
        auto f = [](double, double) { return kThetaDrive; };
        auto fs = make_rc_schedule(sys, f, kThetaStart, rcfg);
        auto rs = make_rc_schedule_reversed(sys, f, kThetaEnd, rcfg);
        Quadrature2DConfig qc;
        RcLevelDensity init_f(sys.p, kThetaStart, qc), init_r(sys.p, kThetaEnd, qc);
        OracleRc orc;
        orc.params = sys.p;
        const double df_rc = orc.delta_f(kThetaEnd, kThetaStart);
        auto fwd = run_ensemble(n, 403, 0, [&](NoiseStream& ns, std::size_t) {
            return simulate_rc(sys, fs, kBeta, 1.0, NoControl{}, init_f.sample_state(ns), rcfg,
                               ns);
        });
        auto rev = run_ensemble(n, 403, 1, [&](NoiseStream& ns, std::size_t) {
            return simulate_rc_reversed(sys, rs, kBeta, 1.0, init_r.sample_state(ns), rcfg, ns);
        });
        auto table =
            crooks_diagnostic(fwd.results, rev.results, kBeta, df_rc, {-1.0, 3.5, 0.25});
        bool crooks_ok = true;
        int occupied = 0;
        for (const auto& b : table) {
            if (!b.defined || b.n_forward < 100 || b.n_reverse < 100) continue;
            ++occupied;
            if (std::abs(b.deviation) > 3.0) crooks_ok = false;
        }
        sub("crooks-rc", crooks_ok && occupied >= 4, std::to_string(occupied) + " occupied bins");

        // constraint preservation at the production step size dt=1e-4
        Ex2Run tight = ex2_multirun(0.6, 0.3, std::min<std::size_t>(n, 20000), 1, 404);
        sub("constraint-preservation", tight.max_violation <= 1e-3,
            "max |xi - z| = " + fmt(tight.max_violation));
    }
    {  // projection identities on 1000 random level-set points
        AngleRC rc;
        auto erc = rc.erased();
        NoiseStream ns(404, 0, 0);
        bool geo_ok = true;
        Mat g(3, 1);
        for (int i = 0; i < 1000 && geo_ok; ++i) {
            const double th = 0.25 + 1.3 * ns.uniform();
            const double r = 3.0 + 4.0 * ns.uniform();
            Vec y(3);
            y << r * std::cos(th), r * std::sin(th), 3.0 + 4.0 * ns.uniform();
            auto parts = build_projection(erc, y);
            erc.grad_xi(y, g);
            if ((parts.P * parts.P - parts.P).lpNorm<Eigen::Infinity>() >= 1e-10) geo_ok = false;
            if ((parts.P.transpose() * g).lpNorm<Eigen::Infinity>() >= 1e-10) geo_ok = false;
            if (!(parts.Psi(0, 0) > 0.0)) geo_ok = false;
        }
        sub("projection-identities", geo_ok, "");
    }
    {  // gradient finite-difference checks
        NoiseStream ns(405, 0, 0);
        bool grad_ok = true;
        Example2Potential pot{Example2Params{}};
        for (int i = 0; i < 200 && grad_ok; ++i) {
            const double x = -2.5 + 5.0 * ns.uniform(), lam = ns.uniform();
            const double fd =
                fd_derivative([lam](double xx) { return Example1Potential::eval(xx, lam); }, x);
            if (std::abs(Example1Potential::grad_x_value(x, lam) - fd) >
                1e-5 * std::max(1.0, std::abs(fd)))
                grad_ok = false;
            const double th = 0.3 + 1.2 * ns.uniform(), r = 4.0 + 2.0 * ns.uniform();
            Eigen::Vector3d y(r * std::cos(th), r * std::sin(th), 4.0 + 2.0 * ns.uniform());
            Eigen::Vector3d gv;
            pot.grad(y, gv);
            for (int j = 0; j < 3; ++j) {
                Eigen::Vector3d yp = y, ym = y;
                yp[j] += kFdStep;
                ym[j] -= kFdStep;
                const double fdj = (pot.eval(yp) - pot.eval(ym)) / (2.0 * kFdStep);
                if (std::abs(gv[j] - fdj) > 1e-5 * std::max(1.0, std::abs(fdj))) grad_ok = false;
            }
        }
        sub("gradient-fd", grad_ok, "");
    }
    {  // PDE conservation
        auto problem = example1_pde_problem();
        GridSpec spec;
        auto sol = solve_g(problem, kBeta, spec);
        const double defect = conservation_defect(
            sol, [](double x, double tt) { return Example1Potential::eval(x, tt); });
        sub("pde-conservation", defect <= 1e-3, "defect=" + fmt(defect));
    }

    Outcome o;
    o.pass = ok;
    o.detail = detail + ", " + fmt(t.s()) + "s";
    return o;
}

Outcome criterion9() {
    Timer t;
    Example1Potential model;
    LinearProtocol protocol;
    const GaussianSampler mu0(-1.0, 1.0 / kBeta);
    IntegratorConfig cfg = make_config(1e-3, 1.0, 500);
    auto traj = [&](NoiseStream& ns, std::size_t) {
        return simulate_alchemical(model, protocol, kBeta, NoControl{}, mu0.sample(ns), cfg, ns);
    };
    EnsembleOptions one;
    one.threads = 1;
    EnsembleOptions many;
    many.threads = 4;
    const std::size_t n = scaled(20000);
    auto a = run_ensemble(n, 500, 0, traj, one);
    auto b = run_ensemble(n, 500, 0, traj, many);
    bool same = a.results.size() == b.results.size();
    for (std::size_t i = 0; same && i < a.results.size(); ++i) {
        same = a.results[i].work == b.results[i].work &&
               a.results[i].log_weight == b.results[i].log_weight &&
               a.results[i].x_final[0] == b.results[i].x_final[0];
    }
    Outcome o;
    o.pass = same;
    o.detail = "1 vs 4 worker threads, N=" + std::to_string(n) + ", bit-identical=" +
               (same ? "yes" : "no") + ", " + fmt(t.s()) + "s";
    return o;
}

}  // namespace

int main(int argc, char** argv) {
    if (const char* env = std::getenv("NEFEP_ACCEPT_SCALE")) {
        if (std::strcmp(env, "desk") == 0) g_scale = Scale::Desk;
        if (std::strcmp(env, "smoke") == 0) g_scale = Scale::Smoke;
    }
    for (int i = 1; i < argc; ++i) {
        if (std::strcmp(argv[i], "--desk") == 0) g_scale = Scale::Desk;
        if (std::strcmp(argv[i], "--smoke") == 0) g_scale = Scale::Smoke;
    }
    std::printf("acceptance suite (scale=%s)\n",
                g_scale == Scale::Full ? "full" : (g_scale == Scale::Desk ? "desk" : "smoke"));

    report("criterion 1: example-1 oracle reproduction", criterion1());
    report("criterion 2: example-2 oracle reproduction", criterion2());
    report("criterion 3: table-1 stdMC row (mu0)", criterion3());
    report("criterion 5: CE-controlled IS accuracy", criterion5());
    report("criterion 6: grid-derived optimal IS", criterion6());
    report("criterion 4: variance-reduction ordering", criterion4());
    report("criterion 7: example-2 tau sweep", criterion7());
    report("criterion 8: identity-level property suites", criterion8());
    report("criterion 9: thread-count determinism", criterion9());

    if (g_scale == Scale::Smoke) {
        std::printf("smoke scale: informational only\n");
        return 0;
    }
    if (g_unexpected_failures > 0) {
        std::printf("%d unexpected criterion failure(s)\n", g_unexpected_failures);
        return 1;
    }
    std::printf(
        "all criteria passed (criterion-2 kappa=0.6 expected failure is documented)\n");
    return 0;
}
