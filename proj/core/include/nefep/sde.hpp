#pragma once

#include "nefep/common.hpp"
#include "nefep/model.hpp"
#include "nefep/rng.hpp"

#include <cstdint>
#include <functional>
#include <type_traits>
#include <vector>

namespace nefep {

// ---------------------------------------------------------------------------
// configuration & result types
// ---------------------------------------------------------------------------

struct IntegratorConfig {
    double dt = 5e-4;
    long n_steps = 2000;
    double horizon_T = 1.0;
    std::uint64_t seed = 0;
    double constraint_tol = 1e-3;  // reaction-coordinate case only

    void validate() const;
};

// n_steps from (dt, T); when dt divides T the invariant n_steps*dt == T holds
// to 1e-12 relative, otherwise the final step is shortened to land on T.
IntegratorConfig make_config(double dt, double T, std::uint64_t seed);

struct TrajectoryResult {
    Vec x_final;
    double work = 0.0;
    double log_weight = 0.0;  // log(dP/dP_sim); 0 for unbiased runs
    double max_constraint_violation = 0.0;
    bool diverged = false;
    std::vector<double> checkpoint_work;
    std::vector<double> checkpoint_log_weight;
};

struct SimOptions {
    double noise_scale = 1.0;         // multiplies sqrt(2/beta); 0 freezes the noise
    double initial_log_weight = 0.0;  // log(dmu_ref/dmu_sim)(x0) when initial laws differ
    const std::vector<double>* checkpoints = nullptr;  // ascending times in [0, T]
};

// ---------------------------------------------------------------------------
// scalar/vector state shims: one integrator body serves double (Example 1),
// Eigen::Vector3d (Example 2) and dynamic Vec (plug-in models)
// ---------------------------------------------------------------------------

namespace detail {

inline void fill_normal(NoiseStream& ns, double& w) { w = ns.normal(); }
template <class V>
inline void fill_normal(NoiseStream& ns, V& w) {
    for (Eigen::Index i = 0; i < w.size(); ++i) w[i] = ns.normal();
}
inline bool finite_state(double x) { return std::isfinite(x); }
template <class V>
inline bool finite_state(const V& x) {
    return x.allFinite();
}
inline double dot_s(double a, double b) { return a * b; }
template <class V>
inline double dot_s(const V& a, const V& b) {
    return a.dot(b);
}
inline double sqnorm_s(double a) { return a * a; }
template <class V>
inline double sqnorm_s(const V& a) {
    return a.squaredNorm();
}
inline void set_zero(double& a) { a = 0.0; }
template <class V>
inline void set_zero(V& a) {
    a.setZero();
}
inline double abs_s(double a) { return std::abs(a); }
template <class V>
inline double abs_s(const V& a) {
    return a.norm();
}
inline Vec as_vec(double x) {
    Vec v(1);
    v[0] = x;
    return v;
}
template <class V>
inline Vec as_vec(const V& x) {
    return x;
}

template <class S>
struct StateFactory {
    static S make(int n) { return S::Zero(n); }
};
template <>
struct StateFactory<double> {
    static double make(int) { return 0.0; }
};
template <>
struct StateFactory<Eigen::Vector3d> {
    static Eigen::Vector3d make(int) { return Eigen::Vector3d::Zero(); }
};

struct CheckpointCursor {
    const std::vector<double>* cps = nullptr;
    std::size_t i = 0;
    TrajectoryResult* res = nullptr;

    void init(const SimOptions& opts, TrajectoryResult& r) {
        cps = opts.checkpoints;
        res = &r;
        if (cps) {
            r.checkpoint_work.reserve(cps->size());
            r.checkpoint_log_weight.reserve(cps->size());
        }
    }
    void record_due(double t_now, double work, double logw) {
        if (!cps) return;
        while (i < cps->size() && (*cps)[i] <= t_now + 1e-12) {
            res->checkpoint_work.push_back(work);
            res->checkpoint_log_weight.push_back(logw);
            ++i;
        }
    }
    void flush(double work, double logw) {
        if (!cps) return;
        while (i < cps->size()) {
            res->checkpoint_work.push_back(work);
            res->checkpoint_log_weight.push_back(logw);
            ++i;
        }
    }
};

}  // namespace detail

struct NoControl {};
struct NoEscort {};
struct NoObserver {};

// control field built on a concrete scalar ansatz basis (Example 1)
template <class Basis>
struct BasisControl1D {
    const Basis* basis = nullptr;
    Vec omega;
    void eval(double x, double t, double& c) const { c = basis->control_value(omega, x, t); }
};

// generic control for plug-in models
struct FunctionControl {
    std::function<void(const Vec&, double, Vec&)> fn;
    void eval(const Vec& x, double t, Vec& c) const { fn(x, t, c); }
};

template <class E, class State, class Lambda>
concept EscortField = requires(const E e, const State& x, const Lambda& l, State& u) {
    e.u(x, l, u);
    { e.div_u(x, l) } -> std::convertible_to<double>;
};

// ---------------------------------------------------------------------------
// alchemical integrator (Euler-Maruyama, sigma = id)
//
//   dx = b dt + c dt + u dt + noise_scale * sqrt(2/beta) dW
//
// with b = model drift, c the importance-sampling control, u the escort
// field.  Work is the left-endpoint quadrature of grad_lambda(V) . f, plus
// the escorted correction  u . grad V - div(u)/beta  when an escort is set.
// The Girsanov log-weight log(dP/dP_sim) is accumulated from the increments
// actually drawn, which makes reweighting exact for the discrete chain.
// ---------------------------------------------------------------------------

template <class Model, class Protocol, class Control = NoControl, class Escort = NoEscort,
          class Observer = NoObserver>
TrajectoryResult simulate_alchemical_impl(const Model& model, const Protocol& protocol, double beta,
                                          const Control& control, const Escort& escort,
                                          const typename Model::State& x0,
                                          const IntegratorConfig& cfg, NoiseStream& ns,
                                          const SimOptions& opts = {}, Observer&& obs = {}) {
    using State = typename Model::State;
    using Lambda = typename Protocol::Lambda;
    constexpr bool has_control = !std::is_same_v<Control, NoControl>;
    constexpr bool has_escort = !std::is_same_v<Escort, NoEscort>;
    constexpr bool has_observer = !std::is_same_v<std::decay_t<Observer>, NoObserver>;

    cfg.validate();
    const double T = cfg.horizon_T;
    const double noise_coef = opts.noise_scale * std::sqrt(2.0 / beta);

    State x = x0;
    Lambda lam = detail::StateFactory<Lambda>::make(model.lambda_dim());
    Lambda gl = lam, fl = lam;
    State b = detail::StateFactory<State>::make(model.dim());
    State dw = b, c = b, uf = b, gv = b;

    TrajectoryResult res;
    res.log_weight = opts.initial_log_weight;
    double work = 0.0;
    double logw = res.log_weight;

    detail::CheckpointCursor cursor;
    cursor.init(opts, res);
    cursor.record_due(0.0, work, logw);

    for (long k = 0; k < cfg.n_steps; ++k) {
        const double t = static_cast<double>(k) * cfg.dt;
        const double dt = std::min(cfg.dt, T - t);
        if (dt <= 1e-15) break;

        protocol.value(t, lam);
        model.grad_lambda(x, lam, gl);
        protocol.rate(lam, t, fl);
        work += detail::dot_s(gl, fl) * dt;

        model.drift(x, lam, b);
        if constexpr (has_escort) {
            escort.u(x, lam, uf);
            model.grad_x(x, lam, gv);
            work += (detail::dot_s(uf, gv) - escort.div_u(x, lam) / beta) * dt;
        }

        detail::fill_normal(ns, dw);
        dw *= std::sqrt(dt);

        if constexpr (has_control) {
            control.eval(x, t, c);
            // log(dP/dP_omega) increment under the simulating measure
            logw -= detail::dot_s(c, dw) / noise_coef +
                    detail::sqnorm_s(c) * dt / (2.0 * noise_coef * noise_coef);
        }
        if constexpr (has_observer) obs.on_step(x, t, dt, dw, c);

        if constexpr (has_control) x += c * dt;
        if constexpr (has_escort) x += uf * dt;
        x += b * dt + noise_coef * dw;

        if (!detail::finite_state(x)) {
            res.diverged = true;
            break;
        }
        cursor.record_due(t + dt, work, logw);
    }

    cursor.flush(work, logw);
    res.work = work;
    res.log_weight = logw;
    res.x_final = detail::as_vec(x);
    return res;
}

template <class Model, class Protocol, class Control = NoControl, class Observer = NoObserver>
TrajectoryResult simulate_alchemical(const Model& model, const Protocol& protocol, double beta,
                                     const Control& control, const typename Model::State& x0,
                                     const IntegratorConfig& cfg, NoiseStream& ns,
                                     const SimOptions& opts = {}, Observer&& obs = {}) {
    return simulate_alchemical_impl(model, protocol, beta, control, NoEscort{}, x0, cfg, ns, opts,
                                    std::forward<Observer>(obs));
}

template <class Model, class Protocol, class Escort>
TrajectoryResult simulate_escorted(const Model& model, const Protocol& protocol, double beta,
                                   const Escort& escort, const typename Model::State& x0,
                                   const IntegratorConfig& cfg, NoiseStream& ns,
                                   const SimOptions& opts = {}) {
    return simulate_alchemical_impl(model, protocol, beta, NoControl{}, escort, x0, cfg, ns, opts,
                                    NoObserver{});
}

template <class Escort>
struct NegatedEscort {
    const Escort* base;
    template <class State, class Lambda>
    void u(const State& x, const Lambda& l, State& out) const {
        base->u(x, l, out);
        out = -out;
    }
    template <class State, class Lambda>
    double div_u(const State& x, const Lambda& l) const {
        return -base->div_u(x, l);
    }
};

// Backward-protocol dynamics: drift -grad V(., lambda(T-s)) (J = 0, a = id),
// accumulating the reverse work; with an escort the drift gains -u and the
// modified-work correction flips sign accordingly.
template <class Model, class Protocol, class Escort = NoEscort>
TrajectoryResult simulate_reversed(const Model& model, const Protocol& protocol, double beta,
                                   const typename Model::State& x0, const IntegratorConfig& cfg,
                                   NoiseStream& ns, const SimOptions& opts = {},
                                   const Escort& escort = {}) {
    ReversedProtocol<Protocol> rev{protocol};
    if constexpr (std::is_same_v<Escort, NoEscort>) {
        return simulate_alchemical_impl(model, rev, beta, NoControl{}, NoEscort{}, x0, cfg, ns,
                                        opts, NoObserver{});
    } else {
        NegatedEscort<Escort> neg{&escort};
        return simulate_alchemical_impl(model, rev, beta, NoControl{}, neg, x0, cfg, ns, opts,
                                        NoObserver{});
    }
}

// ---------------------------------------------------------------------------
// ensemble execution: trajectories are independent given (seed, run, index);
// workers claim fixed-size index blocks, so results are bit-identical for any
// thread count, and aggregation downstream runs in index order.
// ---------------------------------------------------------------------------

struct EnsembleOptions {
    int threads = 0;  // 0: NEFEP_THREADS env or hardware concurrency
    double max_diverged_frac = 1e-3;
    bool allow_divergence_failure = true;
};

struct Ensemble {
    std::vector<TrajectoryResult> results;
    std::size_t n_diverged = 0;
};

int resolve_threads(int requested);

using TrajectoryFn = std::function<TrajectoryResult(NoiseStream&, std::size_t)>;

Ensemble run_ensemble(std::size_t n_traj, std::uint64_t seed, std::uint64_t run_index,
                      const TrajectoryFn& make_trajectory, const EnsembleOptions& opts = {});

namespace detail {
constexpr std::size_t kEnsembleBlock = 1024;
void parallel_blocks(std::size_t n_blocks, int threads,
                     const std::function<void(std::size_t)>& block_fn);
}  // namespace detail

// Map-reduce over trajectories with per-block accumulators: the index
// partition is fixed (independent of thread count) and block contexts are
// merged in block order, so any associative-but-inexact reduction (Kahan
// sums, CE system assembly) stays bit-reproducible.  per_traj returns true
// when the trajectory diverged.
template <class Ctx, class MakeCtx, class PerTraj, class MergeCtx>
std::size_t run_ensemble_reduce(std::size_t n_traj, std::uint64_t seed, std::uint64_t run_index,
                                MakeCtx&& make_ctx, PerTraj&& per_traj, MergeCtx&& merge,
                                const EnsembleOptions& opts = {}) {
    if (n_traj == 0) throw ConfigError("run_ensemble_reduce: empty ensemble");
    const std::size_t block = detail::kEnsembleBlock;
    const std::size_t n_blocks = (n_traj + block - 1) / block;
    std::vector<Ctx> ctxs;
    ctxs.reserve(n_blocks);
    for (std::size_t b = 0; b < n_blocks; ++b) ctxs.push_back(make_ctx());
    std::vector<std::size_t> diverged(n_blocks, 0);

    detail::parallel_blocks(n_blocks, resolve_threads(opts.threads), [&](std::size_t b) {
        const std::size_t lo = b * block;
        const std::size_t hi = std::min(lo + block, n_traj);
        for (std::size_t i = lo; i < hi; ++i) {
            NoiseStream ns(seed, run_index, i);
            if (per_traj(ns, i, ctxs[b])) ++diverged[b];
        }
    });

    std::size_t n_diverged = 0;
    for (std::size_t b = 0; b < n_blocks; ++b) {
        n_diverged += diverged[b];
        merge(ctxs[b]);
    }
    if (opts.allow_divergence_failure &&
        static_cast<double>(n_diverged) > opts.max_diverged_frac * static_cast<double>(n_traj))
        throw NumericsError("run_ensemble_reduce: " + std::to_string(n_diverged) + "/" +
                            std::to_string(n_traj) + " trajectories diverged");
    return n_diverged;
}

}  // namespace nefep
