#include "nefep/pdeopt.hpp"

#include "nefep/model.hpp"

namespace nefep {

PdeProblem1D example1_pde_problem() {
    PdeProblem1D p;
    // lambda(s) = s, f == 1
    p.drift = [](double x, double t) { return -Example1Potential::grad_x_value(x, t); };
    p.work_rate = [](double x, double /*t*/) { return Example1Potential::grad_lambda_value(x, 0.0); };
    p.v0 = [](double x) { return Example1Potential::eval(x, 0.0); };
    return p;
}

GridSolution solve_g(const PdeProblem1D& problem, double beta, const GridSpec& spec) {
    if (spec.nx < 3 || spec.nt < 1 || spec.time_substeps < 1)
        throw ConfigError("solve_g: grid too small");
    GridSolution sol;
    sol.spec = spec;
    sol.beta = beta;
    const int nx = spec.nx, nt = spec.nt;
    const double hx = spec.hx();
    const double ht = spec.ht() / spec.time_substeps;
    const double diff = 1.0 / beta;

    sol.x_grid.resize(nx);
    for (int i = 0; i < nx; ++i) sol.x_grid[i] = spec.x_min + i * hx;
    sol.t_grid.resize(nt + 1);
    for (int m = 0; m <= nt; ++m) sol.t_grid[m] = spec.horizon_T * m / nt;

    sol.g = Mat::Zero(nx, nt + 1);
    sol.g.col(nt).setOnes();

    // Thomas solve workspaces for (I - ht (L1 - beta s)) g_new = g_old
    std::vector<double> a(nx), b(nx), c(nx), cp(nx), dp(nx);
    Vec gnew(nx), gcur(nx);

    for (int m = nt - 1; m >= 0; --m) {
      gcur = sol.g.col(m + 1);
      for (int sub = spec.time_substeps - 1; sub >= 0; --sub) {
        const double t = sol.t_grid[m] + spec.ht() * sub / spec.time_substeps;
        for (int i = 0; i < nx; ++i) {
            const double x = sol.x_grid[i];
            const double bx = problem.drift(x, t);
            const double s = problem.work_rate(x, t);
            // hybrid advection: second-order centered wherever the mesh
            // Peclet number keeps the M-matrix property (everywhere the
            // solution carries mass), first-order upwind at the steep
            // confining walls where positivity would otherwise break
            double lw = diff / (hx * hx);  // west coefficient of L1
            double le = diff / (hx * hx);  // east
            double ld = -2.0 * diff / (hx * hx);  // diagonal of L1
            if (std::abs(bx) * hx <= 2.0 * diff) {
                le += bx / (2.0 * hx);
                lw -= bx / (2.0 * hx);
            } else if (bx >= 0.0) {
                le += bx / hx;
                ld -= bx / hx;
            } else {
                lw += -bx / hx;
                ld -= -bx / hx;
            }
            if (i == 0) {
                le += lw;  // ghost g[-1] = g[1]
                lw = 0.0;
            } else if (i == nx - 1) {
                lw += le;  // ghost g[nx] = g[nx-2]
                le = 0.0;
            }
            a[i] = -ht * lw;
            b[i] = 1.0 - ht * (ld - beta * s);
            c[i] = -ht * le;
        }
        // Thomas algorithm
        cp[0] = c[0] / b[0];
        dp[0] = gcur[0] / b[0];
        for (int i = 1; i < nx; ++i) {
            const double denom = b[i] - a[i] * cp[i - 1];
            cp[i] = c[i] / denom;
            dp[i] = (gcur[i] - a[i] * dp[i - 1]) / denom;
        }
        gnew[nx - 1] = dp[nx - 1];
        for (int i = nx - 2; i >= 0; --i) gnew[i] = dp[i] - cp[i] * gnew[i + 1];

        for (int i = 0; i < nx; ++i) {
            if (!(gnew[i] > 0.0) || !std::isfinite(gnew[i]))
                throw NumericsError(
                    "solve_g: non-positive g at t=" + std::to_string(t) + ", x=" +
                    std::to_string(sol.x_grid[i]) + "; refine the grid");
        }
        gcur = gnew;
      }
      sol.g.col(m) = gcur;
    }
    return sol;
}

double df_from_solution(const GridSolution& sol, const PdeProblem1D& problem) {
    const int nx = sol.spec.nx;
    const double hx = sol.spec.hx();
    KahanSum num, den;
    for (int i = 0; i < nx; ++i) {
        const double w = (i == 0 || i == nx - 1) ? 0.5 : 1.0;
        const double boltz = std::exp(-sol.beta * problem.v0(sol.x_grid[i]));
        num.add(w * boltz * sol.g(i, 0));
        den.add(w * boltz);
    }
    (void)hx;  // common factor cancels in the ratio
    return -std::log(num.value() / den.value()) / sol.beta;
}

double conservation_defect(const GridSolution& sol,
                           const std::function<double(double, double)>& v_of_x_t) {
    const int nx = sol.spec.nx, nt = sol.spec.nt;
    double qmin = std::numeric_limits<double>::infinity(), qmax = 0.0;
    for (int m = 0; m <= nt; ++m) {
        KahanSum q;
        const double t = sol.t_grid[m];
        for (int i = 0; i < nx; ++i) {
            const double w = (i == 0 || i == nx - 1) ? 0.5 : 1.0;
            q.add(w * std::exp(-sol.beta * v_of_x_t(sol.x_grid[i], t)) * sol.g(i, m));
        }
        qmin = std::min(qmin, q.value());
        qmax = std::max(qmax, q.value());
    }
    return (qmax - qmin) / qmax;
}

GridControl::GridControl(const GridSolution& sol) : spec_(sol.spec) {
    const int nx = spec_.nx, nt = spec_.nt;
    const double hx = spec_.hx();
    u_ = Mat::Zero(nx, nt + 1);
    for (int m = 0; m <= nt; ++m) {
        for (int i = 0; i < nx; ++i) {
            double gx;
            if (i == 0)
                gx = 0.0;  // Neumann wall
            else if (i == nx - 1)
                gx = 0.0;
            else
                gx = (sol.g(i + 1, m) - sol.g(i - 1, m)) / (2.0 * hx);
            u_(i, m) = (2.0 / sol.beta) * gx / sol.g(i, m);
        }
    }
    u_.col(nt).setZero();  // g(., T) = 1 exactly
}

double GridControl::operator()(double x, double t) const {
    const int nx = spec_.nx, nt = spec_.nt;
    const double hx = spec_.hx(), ht = spec_.ht();
    double xl = (x - spec_.x_min) / hx;
    double tl = t / ht;
    xl = std::min(std::max(xl, 0.0), static_cast<double>(nx - 1));
    tl = std::min(std::max(tl, 0.0), static_cast<double>(nt));
    const int i = std::min(static_cast<int>(xl), nx - 2);
    const int m = std::min(static_cast<int>(tl), nt - 1);
    const double wx = xl - i, wt = tl - m;
    return (1.0 - wx) * (1.0 - wt) * u_(i, m) + wx * (1.0 - wt) * u_(i + 1, m) +
           (1.0 - wx) * wt * u_(i, m + 1) + wx * wt * u_(i + 1, m + 1);
}

namespace {

InverseCdfSampler make_mu0star(const GridSolution& sol, const std::function<double(double)>& v0) {
    // shift exponents by the max for scale safety
    double max_exp = -std::numeric_limits<double>::infinity();
    const int nx = sol.spec.nx;
    for (int i = 0; i < nx; ++i)
        max_exp = std::max(max_exp, -sol.beta * v0(sol.x_grid[i]) + std::log(sol.g(i, 0)));
    if (!std::isfinite(max_exp)) throw NumericsError("optimal initial: degenerate density");
    const GridSolution* s = &sol;
    const double shift = max_exp;
    const double hx = sol.spec.hx();
    auto density = [s, v0, shift, hx](double x) {
        // interpolate log g(., 0) linearly between nodes
        double xl = (x - s->spec.x_min) / hx;
        xl = std::min(std::max(xl, 0.0), static_cast<double>(s->spec.nx - 1));
        const int i = std::min(static_cast<int>(xl), s->spec.nx - 2);
        const double w = xl - i;
        const double logg = (1.0 - w) * std::log(s->g(i, 0)) + w * std::log(s->g(i + 1, 0));
        return std::exp(-s->beta * v0(x) + logg - shift);
    };
    QuadratureConfig cfg{sol.spec.x_min, sol.spec.x_max, sol.spec.nx, QuadratureConfig::Rule::Trapezoid};
    if (cfg.n_nodes % 2 == 0) cfg.n_nodes += 1;
    return InverseCdfSampler(density, cfg);
}

}  // namespace

GridDensity::GridDensity(const GridSolution& sol, const std::function<double(double)>& v0)
    : inner_(make_mu0star(sol, v0)) {
    mass_ = inner_.normalized_mass();
    double best = -std::numeric_limits<double>::infinity();
    for (double x : inner_.grid()) {
        const double d = inner_.log_density(x);
        if (d > best) {
            best = d;
            mode_ = x;
        }
    }
}

double GridDensity::sample(NoiseStream& ns) const { return inner_.sample(ns); }
double GridDensity::log_density(double x) const { return inner_.log_density(x); }

}  // namespace nefep
