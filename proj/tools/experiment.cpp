#include "experiment.hpp"

#include "nefep/crossentropy.hpp"
#include "nefep/estimators.hpp"
#include "nefep/model.hpp"
#include "nefep/oracle.hpp"
#include "nefep/pdeopt.hpp"
#include "nefep/sde.hpp"
#include "nefep/sde_rc.hpp"

#include <json.hpp>

#include <chrono>
#include <cstdio>
#include <fstream>
#include <memory>
#include <set>
#include <sstream>

namespace nefep::tools {

using nlohmann::json;

namespace {

constexpr double kThetaStart = M_PI / 6.0;
constexpr double kThetaEnd = M_PI / 2.0;
constexpr double kThetaDrive = M_PI / 3.0;

const std::set<std::string> kKnownKeys = {
    "example", "method",  "beta",    "n_traj",  "dt",          "n_runs",  "seed",
    "tau",     "kappa",   "ansatz",  "initial", "output_dir",  "n_pilot", "threads",
    "curve_points", "hist_lo", "hist_hi", "hist_bin", "ti_grid", "ti_samples"};

double to_double(const std::string& key, const std::string& v) {
    try {
        std::size_t pos = 0;
        const double x = std::stod(v, &pos);
        if (pos != v.size()) throw std::invalid_argument(v);
        return x;
    } catch (const std::exception&) {
        throw ConfigError("config: key '" + key + "' expects a number, got '" + v + "'");
    }
}

long long to_int(const std::string& key, const std::string& v) {
    try {
        std::size_t pos = 0;
        const long long x = std::stoll(v, &pos);
        if (pos != v.size()) throw std::invalid_argument(v);
        return x;
    } catch (const std::exception&) {
        throw ConfigError("config: key '" + key + "' expects an integer, got '" + v + "'");
    }
}

// ---------------------------------------------------------------------------
// artifact writing
// ---------------------------------------------------------------------------

class ArtifactWriter {
  public:
    explicit ArtifactWriter(const std::filesystem::path& dir) {
        set_.dir = dir;
        std::error_code ec;
        std::filesystem::create_directories(dir, ec);
        if (ec) throw IoError("cannot create output directory " + dir.string());
    }

    void write_text(const std::string& name, const std::string& content) {
        const auto path = set_.dir / name;
        std::ofstream out(path, std::ios::binary | std::ios::trunc);
        if (!out) throw IoError("cannot open " + path.string() + " for writing");
        out << content;
        if (!out) throw IoError("write failed for " + path.string());
        set_.files.push_back(name);
    }

    void write_json(const std::string& name, const json& j) { write_text(name, j.dump(2) + "\n"); }

    // removes everything written so far (called when a later stage fails, so
    // no partial artifact set survives)
    void discard() {
        for (const auto& name : set_.files) {
            std::error_code ec;
            std::filesystem::remove(set_.dir / name, ec);
        }
        set_.files.clear();
    }

    ArtifactSet take() { return std::move(set_); }

  private:
    ArtifactSet set_;
};

std::string fmt17(double x) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", x);
    return buf;
}

std::string curve_csv(const WorkCurve& curve, const std::string& coord_name) {
    std::ostringstream os;
    os << coord_name << ",dF_mean,dF_sd\n";
    for (std::size_t i = 0; i < curve.coordinate.size(); ++i)
        os << fmt17(curve.coordinate[i]) << ',' << fmt17(curve.dF[i]) << ','
           << fmt17(curve.dF_sd[i]) << '\n';
    return os.str();
}

std::string hist_csv(const Histogram& hist) {
    std::ostringstream os;
    os << "bin_left,bin_right,density\n";
    const auto dens = hist.densities();
    for (std::size_t b = 0; b < dens.size(); ++b)
        os << fmt17(hist.bin_left(static_cast<int>(b))) << ','
           << fmt17(hist.bin_right(static_cast<int>(b))) << ',' << fmt17(dens[b]) << '\n';
    return os.str();
}

json summary_json(const EstimatorReport& rep) {
    json j;
    j["mean_I"] = rep.mean_I_across_runs();
    j["sd_I"] = rep.sd_I;
    j["mean_dF"] = rep.mean_dF_across_runs();
    j["sd_dF"] = rep.sd_dF;
    j["mean_W"] = rep.mean_work;
    j["n_runs"] = rep.per_run_dF.size();
    j["n_traj_per_run"] = rep.per_run_dF.empty() ? 0 : rep.n_samples / rep.per_run_dF.size();
    j["n_effective"] = rep.n_effective;
    j["per_run_dF"] = rep.per_run_dF;
    j["per_run_I"] = rep.per_run_I;
    return j;
}

struct Timer {
    std::chrono::steady_clock::time_point t0 = std::chrono::steady_clock::now();
    double seconds() const {
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    }
};

json meta_json(const ExperimentConfig& cfg, std::size_t diverged, double wall_seconds) {
    json j;
    j["seed"] = cfg.seed;
    json echo;
    for (const auto& [k, v] : echo_config(cfg)) echo[k] = v;
    j["config"] = echo;
    j["divergence_count"] = diverged;
    j["wall_time_seconds"] = wall_seconds;
    j["threads"] = resolve_threads(cfg.threads);
    return j;
}

// ---------------------------------------------------------------------------
// example-1 machinery
// ---------------------------------------------------------------------------

struct Ex1Grid {
    std::vector<double> times, coords;
};

Ex1Grid ex1_grid(int points) {
    Ex1Grid g;
    g.times = uniform_grid(0.0, 1.0, points);
    g.coords = g.times;  // lambda(t) = t
    return g;
}

struct PdeObjects {
    GridSolution sol;
    GridControl control;
    GridDensity density;
};

std::shared_ptr<PdeObjects> make_pde_objects(double beta) {
    auto problem = example1_pde_problem();
    GridSpec spec;  // 2000 x 2000
    GridSolution sol = solve_g(problem, beta, spec);
    GridControl control(sol);
    GridDensity density(sol, problem.v0);
    return std::make_shared<PdeObjects>(
        PdeObjects{std::move(sol), std::move(control), std::move(density)});
}

std::unique_ptr<Sampler1D> ex1_initial(const ExperimentConfig& cfg,
                                       const std::shared_ptr<PdeObjects>& pde) {
    ExampleOneSpec spec;
    if (cfg.initial == "mu0")
        return std::make_unique<GaussianSampler>(spec.mu0_mean, 1.0 / cfg.beta);
    if (cfg.initial == "mubar0")
        return std::make_unique<GaussianSampler>(spec.mubar0_mean, 1.0 / cfg.beta);
    // mu0star: forwarding sampler over the PDE grid density
    struct Fwd final : Sampler1D {
        std::shared_ptr<PdeObjects> pde;
        double sample(NoiseStream& ns) const override { return pde->density.sample(ns); }
        double log_density(double x) const override { return pde->density.log_density(x); }
    };
    auto fwd = std::make_unique<Fwd>();
    fwd->pde = pde;
    return fwd;
}

template <class Control>
Ensemble ex1_run(const ExperimentConfig& cfg, const Control& control, const Sampler1D& initial,
                 std::uint64_t run_index, const Ex1Grid& grid) {
    Example1Potential model;
    LinearProtocol protocol;
    const double beta = cfg.beta;
    const GaussianSampler mu0(ExampleOneSpec{}.mu0_mean, 1.0 / beta);
    const bool reweight_initial = cfg.initial != "mu0";
    IntegratorConfig icfg = make_config(cfg.effective_dt(), protocol.horizon(), cfg.seed);
    EnsembleOptions opts;
    opts.threads = cfg.threads;
    return run_ensemble(
        cfg.n_traj, cfg.seed, run_index,
        [&](NoiseStream& ns, std::size_t) {
            const double x0 = initial.sample(ns);
            SimOptions sopts;
            sopts.checkpoints = &grid.times;
            if (reweight_initial)
                sopts.initial_log_weight = mu0.log_density(x0) - initial.log_density(x0);
            return simulate_alchemical(model, protocol, beta, control, x0, icfg, ns, sopts);
        },
        opts);
}

// ---------------------------------------------------------------------------
// example-2 machinery
// ---------------------------------------------------------------------------

struct Ex2Grid {
    std::vector<double> times, coords;
};

Ex2Grid ex2_grid(int points) {
    Ex2Grid g;
    g.times = uniform_grid(0.0, 1.0, points);
    g.coords.resize(g.times.size());
    for (std::size_t i = 0; i < g.times.size(); ++i)
        g.coords[i] = kThetaStart + kThetaDrive * g.times[i];
    return g;
}

Ensemble ex2_run(const ExperimentConfig& cfg, std::uint64_t run_index, const Ex2Grid& grid) {
    Ex2RcSystem sys;
    sys.p.beta = cfg.beta;
    sys.p.kappa = cfg.kappa;
    IntegratorConfig icfg = make_config(cfg.effective_dt(), 1.0, cfg.seed);
    auto sched = make_rc_schedule(sys, [](double, double) { return kThetaDrive; }, kThetaStart,
                                  icfg);
    RcLevelDensity init(sys.p, kThetaStart, Quadrature2DConfig{});
    EnsembleOptions opts;
    opts.threads = cfg.threads;
    return run_ensemble(
        cfg.n_traj, cfg.seed, run_index,
        [&](NoiseStream& ns, std::size_t) {
            SimOptions sopts;
            sopts.checkpoints = &grid.times;
            return simulate_rc(sys, sched, cfg.beta, cfg.tau, NoControl{}, init.sample_state(ns),
                               icfg, ns, sopts);
        },
        opts);
}

// ---------------------------------------------------------------------------
// per-method drivers
// ---------------------------------------------------------------------------

struct MultiRun {
    EstimatorReport report;
    WorkCurve curve;
    std::size_t diverged = 0;
};

template <class RunFn>
MultiRun collect_runs(const ExperimentConfig& cfg, const std::vector<double>& grid_times,
                      const std::vector<double>& grid_coords, RunFn&& one_run) {
    const HistogramSpec hspec{cfg.hist_lo, cfg.hist_hi, cfg.hist_bin};
    std::vector<EstimatorReport> reports;
    std::vector<WorkCurve> curves;
    std::size_t diverged = 0;
    for (int r = 0; r < cfg.n_runs; ++r) {
        Ensemble ens = one_run(static_cast<std::uint64_t>(r));
        reports.push_back(jarzynski_estimate(ens.results, cfg.beta, hspec));
        curves.push_back(df_curve(ens.results, cfg.beta, grid_times, grid_coords));
        diverged += ens.n_diverged;
    }
    MultiRun out;
    out.report = combine_runs(reports, cfg.beta);
    out.curve = combine_curves(curves);
    out.diverged = diverged;
    return out;
}

MultiRun dispatch_mc(const ExperimentConfig& cfg, const Vec* omega) {
    if (cfg.example == "ex2") {
        Ex2Grid grid = ex2_grid(cfg.curve_points);
        return collect_runs(cfg, grid.times, grid.coords,
                            [&](std::uint64_t r) { return ex2_run(cfg, r, grid); });
    }
    Ex1Grid grid = ex1_grid(cfg.curve_points);
    std::shared_ptr<PdeObjects> pde;
    if (cfg.initial == "mu0star" || cfg.method == "is-optimal") pde = make_pde_objects(cfg.beta);
    auto initial = ex1_initial(cfg, pde);

    if (cfg.method == "is-optimal") {
        return collect_runs(cfg, grid.times, grid.coords, [&](std::uint64_t r) {
            return ex1_run(cfg, pde->control, *initial, r, grid);
        });
    }
    if (omega) {
        if (cfg.ansatz == "linear") {
            PiecewiseLinearBasis1D basis;
            BasisControl1D<PiecewiseLinearBasis1D> control{&basis, *omega};
            return collect_runs(cfg, grid.times, grid.coords, [&](std::uint64_t r) {
                return ex1_run(cfg, control, *initial, r, grid);
            });
        }
        GaussianDerivBasis1D basis;
        BasisControl1D<GaussianDerivBasis1D> control{&basis, *omega};
        return collect_runs(cfg, grid.times, grid.coords, [&](std::uint64_t r) {
            return ex1_run(cfg, control, *initial, r, grid);
        });
    }
    return collect_runs(cfg, grid.times, grid.coords, [&](std::uint64_t r) {
        return ex1_run(cfg, NoControl{}, *initial, r, grid);
    });
}

void write_mc_artifacts(ArtifactWriter& w, const ExperimentConfig& cfg, const MultiRun& mr,
                        const Timer& timer) {
    w.write_json("summary.json", summary_json(mr.report));
    w.write_text("df_curve.csv",
                 curve_csv(mr.curve, cfg.example == "ex2" ? "theta" : "lambda"));
    w.write_text("work_hist.csv", hist_csv(mr.report.work_histogram));
    w.write_json("run_meta.json", meta_json(cfg, mr.diverged, timer.seconds()));
}

// thermodynamic integration driver
void run_ti(ArtifactWriter& w, const ExperimentConfig& cfg, const Timer& timer) {
    std::vector<double> coords, dfs;
    double df_final = 0.0;
    // the mean force is evaluated once per grid node; the profile is its
    // cumulative trapezoid
    auto accumulate_profile = [&](const std::vector<double>& grid,
                                  const std::vector<double>& force) {
        KahanSum acc;
        coords.push_back(grid[0]);
        dfs.push_back(0.0);
        for (std::size_t i = 1; i < grid.size(); ++i) {
            acc.add(0.5 * (force[i - 1] + force[i]) * (grid[i] - grid[i - 1]));
            coords.push_back(grid[i]);
            dfs.push_back(acc.value());
        }
        df_final = dfs.back();
    };
    if (cfg.example == "ex1") {
        const int n_grid = cfg.ti_grid > 0 ? cfg.ti_grid : 100;
        Oracle1D oracle = example1_oracle(cfg.beta);
        const auto grid = uniform_grid(0.0, 1.0, n_grid);
        std::vector<double> force(grid.size());
        for (std::size_t j = 0; j < grid.size(); ++j) {
            const double lam = grid[j];
            force[j] = oracle.equilibrium_mean(lam, [lam](double x) {
                return Example1Potential::grad_lambda_value(x, lam);
            });
        }
        accumulate_profile(grid, force);
    } else {
        // constrained-sampling mean force on a theta grid: one long
        // constrained trajectory per grid point, time-averaging dV/dtheta
        const int n_grid = cfg.ti_grid > 0 ? cfg.ti_grid : 50;
        Ex2RcSystem sys;
        sys.p.beta = cfg.beta;
        sys.p.kappa = cfg.kappa;
        Example2Potential pot{sys.p};
        const auto grid = uniform_grid(kThetaStart, kThetaEnd, n_grid);
        std::vector<double> force(grid.size());
        struct MeanForceObserver {
            const Example2Potential* pot;
            KahanSum sum;
            std::size_t n = 0;
            void on_step(const Eigen::Vector3d& y, double, double, const Eigen::Vector3d&,
                         const Eigen::Vector3d&) {
                const double r = std::hypot(y[0], y[1]);
                sum.add(pot->dV_dtheta(r, std::atan2(y[1], y[0])));
                ++n;
            }
        };
        const double dt_s = 1e-3;
        for (std::size_t j = 0; j < grid.size(); ++j) {
            NoiseStream ns(cfg.seed, 7000, j);
            auto burn = sample_initial_rc(sys, grid[j], 10.0, dt_s, pot.seed_point(grid[j]), ns);
            if (burn.diverged) throw NumericsError("ti: constrained burn-in diverged");
            const double horizon = static_cast<double>(cfg.ti_samples) * dt_s;
            IntegratorConfig icfg = make_config(dt_s, horizon, cfg.seed);
            auto sched = make_rc_schedule(sys, [](double, double) { return 0.0; }, grid[j], icfg);
            MeanForceObserver obs{&pot};
            Eigen::Vector3d y0(burn.x_final[0], burn.x_final[1], burn.x_final[2]);
            auto r = simulate_rc(sys, sched, cfg.beta, 1.0, NoControl{}, y0, icfg, ns, {}, obs);
            if (r.diverged) throw NumericsError("ti: constrained sampling diverged");
            force[j] = obs.sum.value() / static_cast<double>(obs.n);
        }
        accumulate_profile(grid, force);
    }

    json j;
    j["mean_I"] = std::exp(-cfg.beta * df_final);
    j["sd_I"] = nullptr;
    j["mean_dF"] = df_final;
    j["sd_dF"] = nullptr;
    j["mean_W"] = nullptr;
    j["n_runs"] = 1;
    w.write_json("summary.json", j);
    std::ostringstream os;
    os << (cfg.example == "ex2" ? "theta" : "lambda") << ",dF_mean,dF_sd\n";
    for (std::size_t i = 0; i < coords.size(); ++i)
        os << fmt17(coords[i]) << ',' << fmt17(dfs[i]) << ',' << fmt17(0.0) << '\n';
    w.write_text("df_curve.csv", os.str());
    w.write_text("work_hist.csv", hist_csv(Histogram(HistogramSpec{cfg.hist_lo, cfg.hist_hi,
                                                                   cfg.hist_bin})));
    w.write_json("run_meta.json", meta_json(cfg, 0, timer.seconds()));
}

// bidirectional Crooks diagnostic driver
void run_crooks(ArtifactWriter& w, const ExperimentConfig& cfg, const Timer& timer) {
    const HistogramSpec bins{cfg.hist_lo, cfg.hist_hi, std::max(cfg.hist_bin, 0.25)};
    std::vector<TrajectoryResult> fwd, rev;
    double df_ref = 0.0;
    std::size_t diverged = 0;
    EnsembleOptions eopts;
    eopts.threads = cfg.threads;
    if (cfg.example == "ex1") {
        Example1Potential model;
        LinearProtocol protocol;
        const double beta = cfg.beta;
        const GaussianSampler mu0(ExampleOneSpec{}.mu0_mean, 1.0 / beta);
        QuadratureConfig qcfg;
        auto mu1 = equilibrium_sampler_1d(
            [](double x, double l) { return Example1Potential::eval(x, l); }, 1.0, beta, qcfg);
        IntegratorConfig icfg = make_config(cfg.effective_dt(), 1.0, cfg.seed);
        auto f = run_ensemble(cfg.n_traj, cfg.seed, 0,
                              [&](NoiseStream& ns, std::size_t) {
                                  return simulate_alchemical(model, protocol, beta, NoControl{},
                                                             mu0.sample(ns), icfg, ns);
                              },
                              eopts);
        auto r = run_ensemble(cfg.n_traj, cfg.seed, 1,
                              [&](NoiseStream& ns, std::size_t) {
                                  return simulate_reversed(model, protocol, beta, mu1->sample(ns),
                                                           icfg, ns);
                              },
                              eopts);
        fwd = std::move(f.results);
        rev = std::move(r.results);
        diverged = f.n_diverged + r.n_diverged;
        df_ref = example1_oracle(beta).delta_f(1.0, 0.0);
    } else {
        Ex2RcSystem sys;
        sys.p.beta = cfg.beta;
        sys.p.kappa = cfg.kappa;
        IntegratorConfig icfg = make_config(cfg.effective_dt(), 1.0, cfg.seed);
        auto f2 = [](double, double) { return kThetaDrive; };
        auto fsched = make_rc_schedule(sys, f2, kThetaStart, icfg);
        auto rsched = make_rc_schedule_reversed(sys, f2, kThetaEnd, icfg);
        Quadrature2DConfig qcfg;
        RcLevelDensity init_f(sys.p, kThetaStart, qcfg);
        RcLevelDensity init_r(sys.p, kThetaEnd, qcfg);
        auto f = run_ensemble(cfg.n_traj, cfg.seed, 0,
                              [&](NoiseStream& ns, std::size_t) {
                                  return simulate_rc(sys, fsched, cfg.beta, cfg.tau, NoControl{},
                                                     init_f.sample_state(ns), icfg, ns);
                              },
                              eopts);
        auto r = run_ensemble(cfg.n_traj, cfg.seed, 1,
                              [&](NoiseStream& ns, std::size_t) {
                                  return simulate_rc_reversed(sys, rsched, cfg.beta, cfg.tau,
                                                              init_r.sample_state(ns), icfg, ns);
                              },
                              eopts);
        fwd = std::move(f.results);
        rev = std::move(r.results);
        diverged = f.n_diverged + r.n_diverged;
        OracleRc oracle;
        oracle.params = sys.p;
        df_ref = oracle.delta_f(kThetaEnd, kThetaStart);
    }

    auto table = crooks_diagnostic(fwd, rev, cfg.beta, df_ref, bins);
    const HistogramSpec hspec{cfg.hist_lo, cfg.hist_hi, cfg.hist_bin};
    auto rep = jarzynski_estimate(fwd, cfg.beta, hspec);
    w.write_json("summary.json", summary_json(rep));
    // no checkpointed curve in this mode: emit the endpoint profile only
    std::ostringstream curve;
    curve << (cfg.example == "ex2" ? "theta" : "lambda") << ",dF_mean,dF_sd\n";
    curve << fmt17(cfg.example == "ex2" ? kThetaEnd : 1.0) << ',' << fmt17(rep.dF) << ','
          << fmt17(std::numeric_limits<double>::quiet_NaN()) << '\n';
    w.write_text("df_curve.csv", curve.str());
    w.write_text("work_hist.csv", hist_csv(rep.work_histogram));

    std::ostringstream os;
    os << "bin_left,bin_right,n_forward,n_reverse,ratio,expected,se\n";
    for (const auto& b : table) {
        os << fmt17(b.w_lo) << ',' << fmt17(b.w_hi) << ',' << b.n_forward << ',' << b.n_reverse
           << ',' << fmt17(b.ratio) << ',' << fmt17(b.expected) << ',' << fmt17(b.se) << '\n';
    }
    w.write_text("crooks.csv", os.str());
    w.write_json("run_meta.json", meta_json(cfg, diverged, timer.seconds()));
}

Vec solve_ce_omega(const ExperimentConfig& cfg, std::vector<json>* round_info) {
    Example1Potential model;
    LinearProtocol protocol;
    const ExampleOneSpec spec;
    // pilots start from the importance-sampling initial law (mubar0 unless
    // the user pinned mu0)
    const GaussianSampler pilot_init(cfg.initial == "mu0" ? spec.mu0_mean : spec.mubar0_mean,
                                     1.0 / cfg.beta);
    const std::vector<CeRound> rounds = {{0.4 * cfg.beta, cfg.n_pilot},
                                         {cfg.beta, cfg.n_pilot}};
    CePilotReport rep;
    if (cfg.ansatz == "linear") {
        PiecewiseLinearBasis1D basis;
        rep = iterate_ce(model, protocol, basis, basis.k, pilot_init, rounds, cfg.effective_dt(),
                         cfg.seed + 0xCEULL, -1.0, cfg.threads);
    } else {
        GaussianDerivBasis1D basis;
        rep = iterate_ce(model, protocol, basis, basis.k, pilot_init, rounds, cfg.effective_dt(),
                         cfg.seed + 0xCEULL, -1.0, cfg.threads);
    }
    if (round_info) {
        for (std::size_t i = 0; i < rep.systems.size(); ++i) {
            json r;
            r["beta"] = rounds[i].beta;
            r["n_pilot"] = rounds[i].n_pilot;
            r["condition_estimate"] = rep.systems[i].condition_estimate;
            r["omega_max_norm"] = rep.omega_norms[i];
            round_info->push_back(r);
        }
    }
    return rep.omega;
}

}  // namespace

// ---------------------------------------------------------------------------
// configuration
// ---------------------------------------------------------------------------

void ExperimentConfig::validate() const {
    if (example != "ex1" && example != "ex2") {
        if (example == "custom")
            throw ConfigError(
                "config: custom models plug in through the library API, not the CLI");
        throw ConfigError("config: unknown example '" + example + "'");
    }
    const std::set<std::string> methods = {"stdmc", "is-ce", "is-optimal", "ti", "crooks"};
    if (!methods.count(method)) throw ConfigError("config: unknown method '" + method + "'");
    if (!(beta > 0.0)) throw ConfigError("config: beta must be positive");
    if (n_traj < 1) throw ConfigError("config: n_traj must be >= 1");
    if (n_runs < 1) throw ConfigError("config: n_runs must be >= 1");
    if (!(effective_dt() > 0.0)) throw ConfigError("config: dt must be positive");
    if (curve_points < 2) throw ConfigError("config: curve_points must be >= 2");
    if (!(hist_bin > 0.0) || !(hist_lo < hist_hi))
        throw ConfigError("config: invalid histogram spec");
    const std::set<std::string> ansatze = {"linear", "gaussian", "none"};
    if (!ansatze.count(ansatz)) throw ConfigError("config: unknown ansatz '" + ansatz + "'");
    const std::set<std::string> initials = {"mu0", "mubar0", "mu0star"};
    if (!initials.count(initial)) throw ConfigError("config: unknown initial '" + initial + "'");
    if (method == "is-optimal" && example != "ex1")
        throw ConfigError("config: is-optimal requires ex1 (1D grid solver)");
    if (method == "is-ce") {
        if (ansatz == "none") throw ConfigError("config: is-ce requires an ansatz basis");
        if (example != "ex1")
            throw ConfigError("config: no reaction-coordinate ansatz is defined for ex2");
    }
    if (example == "ex2") {
        if (initial != "mu0")
            throw ConfigError("config: ex2 always starts from the level-set law mu_{z(0)}");
        if (!(tau > 0.0)) throw ConfigError("config: tau must be positive");
        if (!(kappa >= 0.0)) throw ConfigError("config: kappa must be non-negative");
    }
    if (initial == "mu0star" && example != "ex1")
        throw ConfigError("config: mu0star is defined by the ex1 grid solution");
}

std::map<std::string, std::string> read_config_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot read config file " + path.string());
    std::map<std::string, std::string> kv;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        const auto first = line.find_first_not_of(" \t\r");
        if (first == std::string::npos) continue;
        const auto last = line.find_last_not_of(" \t\r");
        line = line.substr(first, last - first + 1);
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigError("config: line " + std::to_string(lineno) + " is not key=value");
        std::string key = line.substr(0, eq);
        std::string value = line.substr(eq + 1);
        const auto kend = key.find_last_not_of(" \t");
        key = key.substr(0, kend + 1);
        const auto vbeg = value.find_first_not_of(" \t");
        value = vbeg == std::string::npos ? "" : value.substr(vbeg);
        kv[key] = value;
    }
    return kv;
}

void apply_override(std::map<std::string, std::string>& kv, const std::string& assignment) {
    const auto eq = assignment.find('=');
    if (eq == std::string::npos)
        throw ConfigError("--set expects key=value, got '" + assignment + "'");
    kv[assignment.substr(0, eq)] = assignment.substr(eq + 1);
}

ExperimentConfig parse_config(const std::map<std::string, std::string>& kv) {
    for (const auto& [k, v] : kv)
        if (!kKnownKeys.count(k)) throw ConfigError("config: unknown key '" + k + "'");
    ExperimentConfig cfg;
    auto get = [&kv](const char* key) -> std::optional<std::string> {
        const auto it = kv.find(key);
        if (it == kv.end()) return std::nullopt;
        return it->second;
    };
    if (auto v = get("example")) cfg.example = *v;
    if (auto v = get("method")) cfg.method = *v;
    if (auto v = get("beta")) cfg.beta = to_double("beta", *v);
    if (auto v = get("n_traj")) cfg.n_traj = static_cast<std::size_t>(to_double("n_traj", *v));
    if (auto v = get("dt")) cfg.dt = to_double("dt", *v);
    if (auto v = get("n_runs")) cfg.n_runs = static_cast<int>(to_int("n_runs", *v));
    if (auto v = get("seed")) cfg.seed = static_cast<std::uint64_t>(to_int("seed", *v));
    if (auto v = get("tau")) cfg.tau = to_double("tau", *v);
    if (auto v = get("kappa")) cfg.kappa = to_double("kappa", *v);
    if (auto v = get("ansatz")) cfg.ansatz = *v;
    if (auto v = get("initial")) cfg.initial = *v;
    if (auto v = get("output_dir")) cfg.output_dir = *v;
    if (auto v = get("n_pilot")) cfg.n_pilot = static_cast<std::size_t>(to_double("n_pilot", *v));
    if (auto v = get("threads")) cfg.threads = static_cast<int>(to_int("threads", *v));
    if (auto v = get("curve_points")) cfg.curve_points = static_cast<int>(to_int("curve_points", *v));
    if (auto v = get("hist_lo")) cfg.hist_lo = to_double("hist_lo", *v);
    if (auto v = get("hist_hi")) cfg.hist_hi = to_double("hist_hi", *v);
    if (auto v = get("hist_bin")) cfg.hist_bin = to_double("hist_bin", *v);
    if (auto v = get("ti_grid")) cfg.ti_grid = static_cast<int>(to_int("ti_grid", *v));
    if (auto v = get("ti_samples"))
        cfg.ti_samples = static_cast<std::size_t>(to_double("ti_samples", *v));
    cfg.validate();
    return cfg;
}

std::map<std::string, std::string> echo_config(const ExperimentConfig& cfg) {
    std::map<std::string, std::string> kv;
    kv["example"] = cfg.example;
    kv["method"] = cfg.method;
    kv["beta"] = fmt17(cfg.beta);
    kv["n_traj"] = std::to_string(cfg.n_traj);
    kv["dt"] = fmt17(cfg.effective_dt());
    kv["n_runs"] = std::to_string(cfg.n_runs);
    kv["seed"] = std::to_string(cfg.seed);
    kv["tau"] = fmt17(cfg.tau);
    kv["kappa"] = fmt17(cfg.kappa);
    kv["ansatz"] = cfg.ansatz;
    kv["initial"] = cfg.initial;
    kv["output_dir"] = cfg.output_dir;
    kv["n_pilot"] = std::to_string(cfg.n_pilot);
    kv["curve_points"] = std::to_string(cfg.curve_points);
    kv["hist_lo"] = fmt17(cfg.hist_lo);
    kv["hist_hi"] = fmt17(cfg.hist_hi);
    kv["hist_bin"] = fmt17(cfg.hist_bin);
    kv["ti_grid"] = std::to_string(cfg.ti_grid);
    kv["ti_samples"] = std::to_string(cfg.ti_samples);
    return kv;
}

// ---------------------------------------------------------------------------
// entry points
// ---------------------------------------------------------------------------

ArtifactSet run_experiment(const ExperimentConfig& cfg) {
    cfg.validate();
    Timer timer;
    ArtifactWriter w(cfg.output_dir);
    try {
        if (cfg.method == "ti") {
            run_ti(w, cfg, timer);
        } else if (cfg.method == "crooks") {
            run_crooks(w, cfg, timer);
        } else if (cfg.method == "is-ce") {
            // one-shot experiment entry for a CE run delegates to the
            // pipeline so the control actually exists
            w.discard();
            return run_pipeline_ce(cfg);
        } else {
            MultiRun mr = dispatch_mc(cfg, nullptr);
            write_mc_artifacts(w, cfg, mr, timer);
        }
    } catch (...) {
        w.discard();
        throw;
    }
    return w.take();
}

ArtifactSet run_pipeline_ce(const ExperimentConfig& cfg) {
    cfg.validate();
    if (cfg.ansatz == "none") throw ConfigError("ce pipeline requires an ansatz basis");
    if (cfg.example != "ex1")
        throw ConfigError("ce pipeline: no reaction-coordinate ansatz is defined for ex2");
    Timer timer;
    ArtifactWriter w(cfg.output_dir);
    try {
        std::vector<json> rounds;
        Vec omega = solve_ce_omega(cfg, &rounds);
        json oj;
        oj["ansatz"] = cfg.ansatz;
        oj["omega"] = std::vector<double>(omega.data(), omega.data() + omega.size());
        oj["rounds"] = rounds;
        w.write_json("omega.json", oj);

        MultiRun mr = dispatch_mc(cfg, &omega);
        write_mc_artifacts(w, cfg, mr, timer);
    } catch (...) {
        w.discard();
        throw;
    }
    return w.take();
}

ArtifactSet run_reference(const ExperimentConfig& cfg) {
    cfg.validate();
    Timer timer;
    ArtifactWriter w(cfg.output_dir);
    try {
        if (cfg.example == "ex1") {
            Oracle1D oracle = example1_oracle(cfg.beta);
            const auto grid = uniform_grid(0.0, 1.0, cfg.curve_points);
            std::ostringstream os;
            os << "lambda,dF\n";
            const double f0 = oracle.free_energy(0.0);
            for (double lam : grid)
                os << fmt17(lam) << ',' << fmt17(oracle.free_energy(lam) - f0) << '\n';
            w.write_text("oracle_df.csv", os.str());

            auto problem = example1_pde_problem();
            GridSpec spec;
            auto sol = solve_g(problem, cfg.beta, spec);
            // U surface, strided for a plottable dump
            const int stride = 10;
            std::ostringstream us;
            us << "x,t,U\n";
            for (int i = 0; i < spec.nx; i += stride)
                for (int m = 0; m <= spec.nt; m += stride)
                    us << fmt17(sol.x_grid[i]) << ',' << fmt17(sol.t_grid[m]) << ','
                       << fmt17(sol.U(i, m)) << '\n';
            w.write_text("u_surface.csv", us.str());

            GridControl ustar(sol);
            std::ostringstream cs;
            cs << "x,u_star_t0,u_star_T\n";
            for (int i = 0; i < spec.nx; i += 2)
                cs << fmt17(sol.x_grid[i]) << ',' << fmt17(ustar(sol.x_grid[i], 0.0)) << ','
                   << fmt17(ustar(sol.x_grid[i], 1.0)) << '\n';
            w.write_text("ustar_t0.csv", cs.str());

            GridDensity mu0star(sol, problem.v0);
            const GaussianSampler mu0(ExampleOneSpec{}.mu0_mean, 1.0 / cfg.beta);
            const GaussianSampler mubar(ExampleOneSpec{}.mubar0_mean, 1.0 / cfg.beta);
            std::ostringstream ds;
            ds << "x,mu0,mubar0,mu0star\n";
            for (int i = 0; i < spec.nx; i += 2) {
                const double x = sol.x_grid[i];
                ds << fmt17(x) << ',' << fmt17(std::exp(mu0.log_density(x))) << ','
                   << fmt17(std::exp(mubar.log_density(x))) << ','
                   << fmt17(std::exp(mu0star.log_density(x))) << '\n';
            }
            w.write_text("mu0star.csv", ds.str());

            json j;
            j["dF_oracle"] = oracle.delta_f(1.0, 0.0);
            j["dF_pde"] = df_from_solution(sol, problem);
            j["conservation_defect"] = conservation_defect(sol, [](double x, double t) {
                return Example1Potential::eval(x, t);
            });
            w.write_json("summary.json", j);
        } else {
            OracleRc oracle;
            oracle.params.beta = cfg.beta;
            oracle.params.kappa = cfg.kappa;
            const auto grid = uniform_grid(kThetaStart, kThetaEnd, cfg.curve_points);
            std::ostringstream os;
            os << "theta,dF\n";
            const double f0 = oracle.free_energy(kThetaStart);
            for (double th : grid)
                os << fmt17(th) << ',' << fmt17(oracle.free_energy(th) - f0) << '\n';
            w.write_text("oracle_df.csv", os.str());
            json j;
            j["dF_oracle"] = oracle.delta_f(kThetaEnd, kThetaStart);
            j["kappa"] = cfg.kappa;
            w.write_json("summary.json", j);
        }
        w.write_json("run_meta.json", meta_json(cfg, 0, timer.seconds()));
    } catch (...) {
        w.discard();
        throw;
    }
    return w.take();
}

}  // namespace nefep::tools
