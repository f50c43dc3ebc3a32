#pragma once

#include "nefep/sde.hpp"

namespace nefep {

// ---------------------------------------------------------------------------
// Reaction-coordinate dynamics (scalar coordinate, a = sigma = id):
//
//   dy = [ -(Pa) grad V / tau + div(Pa)/(beta tau)
//          + (a grad_xi Psi^-1) f + P c ] dt + sqrt(2/(beta tau)) P dW
//
// with work  W(t) = int ( Psi^-1 (a grad_xi).grad V - div(Psi^-1 a grad_xi)/beta ) zdot ds.
// The drive f and the coordinate path z(t) (with zdot = f~(z,t)) are
// precomputed into an RcSchedule shared by every trajectory of an ensemble.
// ---------------------------------------------------------------------------

template <class State>
struct RcTerms {
    State pgv;      // (Pa) grad V
    State dpa;      // div(Pa)
    State drv;      // a grad_xi Psi^-1
    double wgrad = 0.0;  // Psi^-1 (a grad_xi) . grad V
    double wdiv = 0.0;   // div(Psi^-1 a grad_xi)
};

template <class Sys>
struct RcSchedule {
    std::vector<double> t;
    std::vector<double> z;
    std::vector<double> zdot;
    std::vector<typename Sys::ScheduleAux> aux;
};

// z(t) from zdot = f(z,t) on the integrator grid (classic RK4; exact for the
// constant drives used in the examples).
template <class Sys, class F>
RcSchedule<Sys> make_rc_schedule(const Sys& sys, F&& f, double z0, const IntegratorConfig& cfg) {
    cfg.validate();
    RcSchedule<Sys> s;
    const std::size_t n = static_cast<std::size_t>(cfg.n_steps);
    s.t.resize(n + 1);
    s.z.resize(n + 1);
    s.zdot.resize(n + 1);
    s.aux.resize(n + 1);
    double z = z0;
    for (std::size_t k = 0; k <= n; ++k) {
        const double t = std::min(static_cast<double>(k) * cfg.dt, cfg.horizon_T);
        s.t[k] = t;
        s.z[k] = z;
        s.zdot[k] = f(z, t);
        s.aux[k] = sys.make_aux(z);
        if (k == n) break;
        const double h = std::min(cfg.dt, cfg.horizon_T - t);
        const double k1 = f(z, t);
        const double k2 = f(z + 0.5 * h * k1, t + 0.5 * h);
        const double k3 = f(z + 0.5 * h * k2, t + 0.5 * h);
        const double k4 = f(z + h * k3, t + h);
        z += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    }
    return s;
}

// schedule of the time-reversed process: z^R(s) solves zdot = -f(z, T-s)
// from z^R(0) = z_T, which is what the reversed dynamics' drive term needs
template <class Sys, class F>
RcSchedule<Sys> make_rc_schedule_reversed(const Sys& sys, F&& f, double z_T,
                                          const IntegratorConfig& cfg) {
    const double T = cfg.horizon_T;
    return make_rc_schedule(
        sys, [&f, T](double z, double t) { return -f(z, T - t); }, z_T, cfg);
}

template <class Sys, class Control = NoControl, class Observer = NoObserver>
TrajectoryResult simulate_rc(const Sys& sys, const RcSchedule<Sys>& sched, double beta, double tau,
                             const Control& control, const typename Sys::State& y0,
                             const IntegratorConfig& cfg, NoiseStream& ns,
                             const SimOptions& opts = {}, Observer&& obs = {}) {
    using State = typename Sys::State;
    constexpr bool has_control = !std::is_same_v<Control, NoControl>;
    constexpr bool has_observer = !std::is_same_v<std::decay_t<Observer>, NoObserver>;

    cfg.validate();
    const double T = cfg.horizon_T;
    const double noise_coef = opts.noise_scale * std::sqrt(2.0 / (beta * tau));

    State y = y0;
    RcTerms<State> terms;
    terms.pgv = detail::StateFactory<State>::make(sys.dim());
    terms.dpa = terms.pgv;
    terms.drv = terms.pgv;
    State dw = terms.pgv, pdw = terms.pgv, c = terms.pgv, pc = terms.pgv;

    TrajectoryResult res;
    res.log_weight = opts.initial_log_weight;
    double work = 0.0;
    double logw = res.log_weight;
    double max_viol = 0.0;

    detail::CheckpointCursor cursor;
    cursor.init(opts, res);
    cursor.record_due(0.0, work, logw);

    for (long k = 0; k < cfg.n_steps; ++k) {
        const double t = static_cast<double>(k) * cfg.dt;
        const double dt = std::min(cfg.dt, T - t);
        if (dt <= 1e-15) break;
        const std::size_t ki = static_cast<std::size_t>(k);

        double xi_now = 0.0;
        if (!sys.eval(y, sched.z[ki], sched.aux[ki], terms, xi_now)) {
            res.diverged = true;
            break;
        }
        const double viol = std::abs(xi_now - sched.z[ki]);
        if (viol > max_viol) max_viol = viol;
        if (viol > cfg.constraint_tol) {
            res.diverged = true;
            break;
        }

        const double zdot = sched.zdot[ki];
        work += (terms.wgrad - terms.wdiv / beta) * zdot * dt;

        detail::fill_normal(ns, dw);
        dw *= std::sqrt(dt);
        if constexpr (has_control) {
            control.eval(y, t, c);
            logw -= detail::dot_s(c, dw) / noise_coef +
                    detail::sqnorm_s(c) * dt / (2.0 * noise_coef * noise_coef);
        }
        if constexpr (has_observer) obs.on_step(y, t, dt, dw, c);

        sys.apply_proj(y, dw, pdw);
        y += terms.pgv * (-dt / tau) + terms.dpa * (dt / (beta * tau)) + terms.drv * (zdot * dt) +
             noise_coef * pdw;
        if constexpr (has_control) {
            sys.apply_proj(y, c, pc);
            y += pc * dt;
        }

        if (!detail::finite_state(y)) {
            res.diverged = true;
            break;
        }
        cursor.record_due(t + dt, work, logw);
    }

    cursor.flush(work, logw);
    res.work = work;
    res.log_weight = logw;
    res.max_constraint_violation = max_viol;
    res.x_final = detail::as_vec(y);
    return res;
}

template <class Sys>
TrajectoryResult simulate_rc_reversed(const Sys& sys, const RcSchedule<Sys>& reversed_sched,
                                      double beta, double tau, const typename Sys::State& y0,
                                      const IntegratorConfig& cfg, NoiseStream& ns,
                                      const SimOptions& opts = {}) {
    return simulate_rc(sys, reversed_sched, beta, tau, NoControl{}, y0, cfg, ns, opts);
}

// Constrained sampling of mu_z: run the f == 0 dynamics for burn_in time from
// a feasible seed and return the terminal state (approximately mu_z-law).
template <class Sys>
TrajectoryResult sample_initial_rc(const Sys& sys, double z0, double burn_in, double dt,
                                   const typename Sys::State& seed_point, NoiseStream& ns,
                                   double constraint_tol = 1e-3) {
    if (burn_in <= 0.0) {
        TrajectoryResult r;
        r.x_final = detail::as_vec(seed_point);
        return r;
    }
    IntegratorConfig cfg = make_config(dt, burn_in, 0);
    cfg.constraint_tol = constraint_tol;
    auto sched = make_rc_schedule(sys, [](double, double) { return 0.0; }, z0, cfg);
    return simulate_rc(sys, sched, /*beta unused by caller*/ sys.beta_hint(), 1.0, NoControl{},
                       seed_point, cfg, ns);
}

// ---------------------------------------------------------------------------
// concrete Example-2 system: closed-form geometry of xi = arctan(y2/y1)
// ---------------------------------------------------------------------------

struct Ex2RcSystem {
    using State = Eigen::Vector3d;
    struct ScheduleAux {
        double sin_z = 0.0, cos_z = 1.0;
    };

    Example2Params p;

    int dim() const { return 3; }
    double beta_hint() const { return p.beta; }
    ScheduleAux make_aux(double z) const { return {std::sin(z), std::cos(z)}; }

    // exact angle; third-order expansion around the schedule value inside the
    // trust region (error below double round-off for |theta - z| <= 5e-3)
    static double angle_near(double y1, double y2, double r, double z, const ScheduleAux& a) {
        const double u = (y2 * a.cos_z - y1 * a.sin_z) / r;
        if (std::abs(u) < 5e-3) {
            const double u2 = u * u;
            return z + u * (1.0 + u2 * (1.0 / 6.0 + u2 * (3.0 / 40.0)));
        }
        return std::atan2(y2, y1);
    }

    bool eval(const State& y, double z_ref, const ScheduleAux& a, RcTerms<State>& t,
              double& xi_out) const {
        const double y1 = y[0], y2 = y[1];
        if (!p.angle_defined(y1, y2)) return false;
        const double r2 = y1 * y1 + y2 * y2;
        const double r = std::sqrt(r2);
        const double theta = angle_near(y1, y2, r, z_ref, a);
        xi_out = theta;

        const double sin_t = y2 / r, cos_t = y1 / r;
        const double ell = p.l_eq * (1.0 + p.kappa * (sin_t - 0.5));
        const double vr = (r - ell) / p.eps;
        const double dth = theta - p.theta0;
        const double v3p = 2.0 * p.k_theta * (dth * dth - p.delta_theta * p.delta_theta) * dth -
                           p.k_theta1;
        const double vtheta = -vr * (p.l_eq * p.kappa * cos_t) + v3p;

        t.pgv[0] = vr * cos_t;
        t.pgv[1] = vr * sin_t;
        t.pgv[2] = (std::abs(y[2]) - p.l_eq) / p.eps * (y[2] < 0.0 ? -1.0 : 1.0);
        t.dpa[0] = y1 / r2;
        t.dpa[1] = y2 / r2;
        t.dpa[2] = 0.0;
        t.drv[0] = -y2;
        t.drv[1] = y1;
        t.drv[2] = 0.0;
        t.wgrad = vtheta;             // Psi^-1 (grad_xi . grad V) = dV/dtheta
        t.wdiv = 0.0;                 // div(-y2, y1, 0) vanishes identically
        return true;
    }

    void apply_proj(const State& y, const State& v, State& out) const {
        const double r2 = y[0] * y[0] + y[1] * y[1];
        const double s = (-y[1] * v[0] + y[0] * v[1]) / r2;
        out[0] = v[0] + s * y[1];
        out[1] = v[1] - s * y[0];
        out[2] = v[2];
    }
};

// ---------------------------------------------------------------------------
// generic (type-erased) system for plug-in scalar reaction coordinates; the
// geometric objects fall back to finite differences via ReactionCoordinate
// ---------------------------------------------------------------------------

struct ErasedRcSystem {
    using State = Vec;
    struct ScheduleAux {};

    ReactionCoordinate rc;  // dim_d must be 1 for the integrator
    std::function<double(const Vec&)> potential;
    std::function<void(const Vec&, Vec&)> grad_potential;
    double beta = 1.0;

    int dim() const { return rc.dim_n; }
    double beta_hint() const { return beta; }
    ScheduleAux make_aux(double) const { return {}; }

    bool eval(const Vec& y, double /*z_ref*/, const ScheduleAux&, RcTerms<Vec>& t,
              double& xi_out) const {
        try {
            Vec z(1);
            rc.xi(y, z);
            xi_out = z[0];
            Mat g(rc.dim_n, 1);
            rc.grad_xi(y, g);
            const double psi = g.col(0).squaredNorm();
            if (psi <= 0.0 || !std::isfinite(psi)) return false;
            Vec gv(rc.dim_n);
            grad_potential(y, gv);
            t.pgv = gv - g.col(0) * (g.col(0).dot(gv) / psi);  // P grad V
            rc.div_Pa(y, t.dpa);
            t.drv = g.col(0) / psi;
            t.wgrad = g.col(0).dot(gv) / psi;
            Vec dh(1);
            rc.div_h(y, dh);
            t.wdiv = dh[0];
            return true;
        } catch (const GeometryError&) {
            return false;
        }
    }

    void apply_proj(const Vec& y, const Vec& v, Vec& out) const {
        Mat g(rc.dim_n, 1);
        rc.grad_xi(y, g);
        const double psi = g.col(0).squaredNorm();
        out = v - g.col(0) * (g.col(0).dot(v) / psi);
    }
};

}  // namespace nefep
