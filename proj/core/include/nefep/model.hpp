#pragma once

#include "nefep/common.hpp"

#include <cmath>
#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace nefep {

// ---------------------------------------------------------------------------
// finite-difference fallbacks (central, step 1e-6)
// ---------------------------------------------------------------------------

inline constexpr double kFdStep = 1e-6;

template <class F>
double fd_derivative(F&& f, double x, double h = kFdStep) {
    return (f(x + h) - f(x - h)) / (2.0 * h);
}

template <class F>
void fd_gradient(F&& f, const Vec& x, Vec& out, double h = kFdStep) {
    Vec xp = x;
    out.resize(x.size());
    for (Eigen::Index i = 0; i < x.size(); ++i) {
        const double xi = x[i];
        xp[i] = xi + h;
        const double fp = f(xp);
        xp[i] = xi - h;
        const double fm = f(xp);
        xp[i] = xi;
        out[i] = (fp - fm) / (2.0 * h);
    }
}

// ---------------------------------------------------------------------------
// Example 1: 1D alchemical interpolation between a quadratic well and a
// tilted double well.  V(x,l) = (1-l)(x+1)^2/2 + l((x^2-1)^2/4 - 0.4x).
// ---------------------------------------------------------------------------

struct Example1Potential {
    using State = double;
    using Lambda = double;

    int dim() const { return 1; }
    int lambda_dim() const { return 1; }

    static double eval(double x, double lam) {
        const double q = (x + 1.0) * (x + 1.0) / 2.0;
        const double d = x * x - 1.0;
        const double w = d * d / 4.0 - 0.4 * x;
        return (1.0 - lam) * q + lam * w;
    }
    static double grad_x_value(double x, double lam) {
        return (1.0 - lam) * (x + 1.0) + lam * (x * x * x - x - 0.4);
    }
    // d/dlam V = V(x,1) - V(x,0); also the work integrand for lambda(s)=s.
    static double grad_lambda_value(double x, double /*lam*/) {
        return eval(x, 1.0) - eval(x, 0.0);
    }

    void drift(double x, double lam, double& out) const { out = -grad_x_value(x, lam); }
    void grad_x(double x, double lam, double& out) const { out = grad_x_value(x, lam); }
    void grad_lambda(double x, double lam, double& out) const { out = grad_lambda_value(x, lam); }
};

struct ExampleOneSpec {
    double beta = 5.0;
    double domain_lo = -5.0;
    double domain_hi = 5.0;
    // initial laws used in section-4 experiments: mu0 = N(-1, 1/beta),
    // mubar0 = N(0.5, 1/beta)
    double mu0_mean = -1.0;
    double mubar0_mean = 0.5;
};

// lambda(s) = s on [0,1], clamped; rate f == 1.
struct LinearProtocol {
    using Lambda = double;
    double horizon() const { return 1.0; }
    void value(double t, double& lam) const { lam = t < 0.0 ? 0.0 : (t > 1.0 ? 1.0 : t); }
    void rate(double /*lam*/, double /*t*/, double& f) const { f = 1.0; }
};

// Time reversal of any protocol: lam^R(s) = lam(T-s), f^R(l,s) = -f(l,T-s).
template <class P>
struct ReversedProtocol {
    using Lambda = typename P::Lambda;
    P base;
    double horizon() const { return base.horizon(); }
    void value(double t, Lambda& lam) const { base.value(base.horizon() - t, lam); }
    void rate(const Lambda& lam, double t, Lambda& f) const {
        base.rate(lam, base.horizon() - t, f);
        f = -f;
    }
};

// ---------------------------------------------------------------------------
// Example 2: three particles in the plane with stiff bonds and an angle
// potential; state y = (y1,y2,y3) after removing rigid-body freedom.
// ---------------------------------------------------------------------------

struct Example2Params {
    double beta = 5.0;
    double kappa = 0.3;  // 0.3 or 0.6 in the experiments
    double eps = 0.1;
    double k_theta = 20.0;
    double k_theta1 = 0.3;
    double l_eq = 5.0;
    double theta0 = M_PI / 3.0;
    double delta_theta = M_PI / 6.0;
    // The angle map is singular at the origin and on the branch cut
    // (y1 < 0, y2 = 0); the drive ends at theta = pi/2 where y1 itself
    // crosses zero smoothly, so the guard must not reject small y1 alone.
    double angle_guard = 1e-8;

    bool angle_defined(double y1, double y2) const {
        if (y1 * y1 + y2 * y2 <= angle_guard * angle_guard) return false;
        return !(y1 < 0.0 && std::abs(y2) <= angle_guard);
    }

    double bond_target(double theta) const {
        return (1.0 + kappa * (std::sin(theta) - 0.5)) * l_eq;
    }
    double bond_target_dtheta(double theta) const { return kappa * l_eq * std::cos(theta); }
    double v3(double theta) const {
        const double d = theta - theta0;
        const double q = d * d - delta_theta * delta_theta;
        return 0.5 * k_theta * q * q - k_theta1 * d;
    }
    double v3_dtheta(double theta) const {
        const double d = theta - theta0;
        return 2.0 * k_theta * (d * d - delta_theta * delta_theta) * d - k_theta1;
    }
};

struct Example2Potential {
    Example2Params p;

    double theta_of(const Eigen::Vector3d& y) const {
        if (!p.angle_defined(y[0], y[1]))
            throw GeometryError("example2: angle undefined at y=(" + std::to_string(y[0]) + "," +
                                std::to_string(y[1]) + "," + std::to_string(y[2]) + ")");
        return std::atan2(y[1], y[0]);
    }

    double eval(const Eigen::Vector3d& y) const {
        const double r = std::hypot(y[0], y[1]);
        const double theta = theta_of(y);
        return eval_polar(r, theta, y[2]);
    }
    // V in the (r, theta, y3) parametrization; y3 > 0 branch
    double eval_polar(double r, double theta, double y3) const {
        const double dr = r - p.bond_target(theta);
        const double d3 = std::abs(y3) - p.l_eq;
        return (dr * dr + d3 * d3) / (2.0 * p.eps) + p.v3(theta);
    }
    // dV/dtheta at fixed (r, y3): the Example-2 work-rate integrand
    double dV_dtheta(double r, double theta) const {
        const double dr = r - p.bond_target(theta);
        return -dr * p.bond_target_dtheta(theta) / p.eps + p.v3_dtheta(theta);
    }
    void grad(const Eigen::Vector3d& y, Eigen::Vector3d& g) const {
        const double r2 = y[0] * y[0] + y[1] * y[1];
        const double r = std::sqrt(r2);
        const double theta = theta_of(y);
        const double vr = (r - p.bond_target(theta)) / p.eps;
        const double vt = dV_dtheta(r, theta);
        g[0] = vr * y[0] / r - vt * y[1] / r2;
        g[1] = vr * y[1] / r + vt * y[0] / r2;
        g[2] = (std::abs(y[2]) - p.l_eq) / p.eps * (y[2] < 0.0 ? -1.0 : 1.0);
    }
    // feasible point on the level set theta(y)=theta: both bonds relaxed
    Eigen::Vector3d seed_point(double theta) const {
        const double r = p.bond_target(theta);
        return {r * std::cos(theta), r * std::sin(theta), p.l_eq};
    }
};

// ---------------------------------------------------------------------------
// Reaction-coordinate geometry (type-erased, general d < n, a = sigma = id)
// ---------------------------------------------------------------------------

struct ReactionCoordinate {
    int dim_n = 0;
    int dim_d = 0;
    std::function<void(const Vec&, Vec&)> xi;          // R^n -> R^d
    std::function<void(const Vec&, Mat&)> grad_xi;     // n x d
    double condition_cap = 1e12;

    void psi(const Vec& y, Mat& out) const {
        Mat g(dim_n, dim_d);
        grad_xi(y, g);
        out.noalias() = g.transpose() * g;  // a = id
    }
    void proj(const Vec& y, Mat& P) const;          // id - grad_xi psi^-1 grad_xi^T
    void div_Pa(const Vec& y, Vec& out) const;      // FD divergence of the rows of Pa
    void div_h(const Vec& y, Vec& out) const;       // FD divergence of columns of grad_xi psi^-1
};

struct ProjectionParts {
    Mat P;
    Mat Psi;
    Vec div_Pa;
};

// Returns (P, Psi, div(Pa)) at y; throws GeometryError when Psi is singular
// or badly conditioned.
ProjectionParts build_projection(const ReactionCoordinate& rc, const Vec& y);

// Concrete Example-2 reaction coordinate xi = arctan(y2/y1), with closed-form
// projection, divergence and work terms (derived from the explicit P matrix).
struct AngleRC {
    Example2Params guard_params;  // only the angle guard is used

    static int dim() { return 3; }
    static int rc_dim() { return 1; }
    double xi(const Eigen::Vector3d& y) const {
        if (!guard_params.angle_defined(y[0], y[1])) throw GeometryError("angle rc: angle undefined");
        return std::atan2(y[1], y[0]);
    }
    // ReactionCoordinate view for the generic geometry contract
    ReactionCoordinate erased() const;
};

ReactionCoordinate make_fd_reaction_coordinate(int n, int d,
                                               std::function<void(const Vec&, Vec&)> xi);

// ---------------------------------------------------------------------------
// ansatz bases for the cross-entropy control (Example 1, scalar state)
// ---------------------------------------------------------------------------

// 30 time-damped indicator functions on a uniform partition of [-1.3, 1.3]:
// phi_l(x,t) = (1-t) 1_{C_l}(x)
struct PiecewiseLinearBasis1D {
    double lo = -1.3;
    double hi = 1.3;
    int k = 30;

    double width() const { return (hi - lo) / k; }
    int cell_of(double x) const {
        if (x < lo || x >= hi) return -1;
        int c = static_cast<int>((x - lo) / width());
        return c >= k ? k - 1 : c;
    }
    double phi(int l, double x, double t) const {
        return cell_of(x) == l ? (1.0 - t) : 0.0;
    }
    // control drift sum_l omega_l phi_l; one cell is active at a time
    double control_value(const Vec& omega, double x, double t) const {
        const int c = cell_of(x);
        return c < 0 ? 0.0 : (1.0 - t) * omega[c];
    }
    // nonzero basis values at (x,t): at most one entry
    template <class F>
    void for_each_nonzero(double x, double t, F&& f) const {
        const int c = cell_of(x);
        if (c >= 0 && t < 1.0) f(c, 1.0 - t);
    }
};

// phi_l = d/dx V_l for the two time-damped Gaussians
//   V_1(x,t) = (1-t) exp(-x^2/2),  V_2(x,t) = (1-t) exp(-(x-1.2)^2/4.5)
struct GaussianDerivBasis1D {
    static constexpr int k = 2;

    double phi(int l, double x, double t) const {
        const double damp = 1.0 - t;
        if (l == 0) return damp * (-x) * std::exp(-0.5 * x * x);
        const double d = x - 1.2;
        return damp * (-2.0 * d / 4.5) * std::exp(-d * d / 4.5);
    }
    double control_value(const Vec& omega, double x, double t) const {
        return omega[0] * phi(0, x, t) + omega[1] * phi(1, x, t);
    }
    template <class F>
    void for_each_nonzero(double x, double t, F&& f) const {
        f(0, phi(0, x, t));
        f(1, phi(1, x, t));
    }
};

// Type-erased basis: phi^(l) : (x, t) -> R^n, l = 0..size_k-1.
struct AnsatzBasis {
    int dim_n = 0;
    int size_k = 0;
    std::function<void(int, const Vec&, double, Vec&)> phi;
    std::vector<std::string> description;

    // spot-check boundedness of every phi on sampled points of a box domain
    bool bounded_on(const Vec& lo, const Vec& hi, double t_max, double bound,
                    int samples_per_dim = 64) const;
};

enum class Ex1AnsatzKind { PiecewiseLinear, Gaussian };
AnsatzBasis make_ansatz_example1(Ex1AnsatzKind kind);

// ---------------------------------------------------------------------------
// type-erased potential / protocol for user-pluggable models
// ---------------------------------------------------------------------------

struct PotentialModel {
    using State = Vec;
    using Lambda = Vec;

    int dim_n = 0;
    int dim_m = 0;  // protocol dimension
    std::function<double(const Vec&, const Vec&)> eval_fn;
    std::function<void(const Vec&, const Vec&, Vec&)> grad_x_fn;
    std::function<void(const Vec&, const Vec&, Vec&)> grad_lambda_fn;

    int dim() const { return dim_n; }
    int lambda_dim() const { return dim_m; }
    double eval(const Vec& x, const Vec& lam) const { return eval_fn(x, lam); }
    void drift(const Vec& x, const Vec& lam, Vec& out) const {
        grad_x_fn(x, lam, out);
        out = -out;
    }
    void grad_x(const Vec& x, const Vec& lam, Vec& out) const { grad_x_fn(x, lam, out); }
    void grad_lambda(const Vec& x, const Vec& lam, Vec& out) const { grad_lambda_fn(x, lam, out); }
};

// Builds a model from an energy alone (gradients by central differences) or
// from supplied analytic gradients.
PotentialModel make_potential_model(
    int n, int m, std::function<double(const Vec&, const Vec&)> eval,
    std::function<void(const Vec&, const Vec&, Vec&)> grad_x = nullptr,
    std::function<void(const Vec&, const Vec&, Vec&)> grad_lambda = nullptr);

// PotentialModel view of Example 1 (for the generic/plug-in code paths).
PotentialModel example1_model();

// Evaluates V(x, lambda) and rejects non-finite results with a diagnostic.
double eval_potential(const PotentialModel& m, const Vec& x, const Vec& lam);

struct Protocol {
    using Lambda = Vec;

    int dim_m = 0;
    double horizon_T = 0.0;
    std::function<void(double, Vec&)> lambda_of_t;
    std::function<void(const Vec&, double, Vec&)> rate_f;

    double horizon() const { return horizon_T; }
    void value(double t, Vec& lam) const { lambda_of_t(t, lam); }
    void rate(const Vec& lam, double t, Vec& f) const { rate_f(lam, t, f); }
    Protocol reversed() const;
};

Protocol linear_protocol_erased();  // lambda(s) = s on [0,1], m = 1

}  // namespace nefep
