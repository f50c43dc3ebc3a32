#include "nefep/model.hpp"

#include <Eigen/Cholesky>

#include <sstream>

namespace nefep {

namespace {

std::string point_str(const Vec& y) {
    std::ostringstream os;
    os << "(";
    for (Eigen::Index i = 0; i < y.size(); ++i) os << (i ? "," : "") << y[i];
    os << ")";
    return os.str();
}

}  // namespace

void ReactionCoordinate::proj(const Vec& y, Mat& P) const {
    Mat g(dim_n, dim_d);
    grad_xi(y, g);
    Mat psi_m = g.transpose() * g;
    Eigen::LDLT<Mat> ldlt(psi_m);
    if (ldlt.info() != Eigen::Success || !ldlt.isPositive())
        throw GeometryError("reaction coordinate: Psi not SPD at y=" + point_str(y));
    P = Mat::Identity(dim_n, dim_n) - g * ldlt.solve(g.transpose());
}

void ReactionCoordinate::div_Pa(const Vec& y, Vec& out) const {
    // (div Pa)_i = d(Pa)_ij / dy_j, central differences column by column
    const double h = kFdStep;
    out = Vec::Zero(dim_n);
    Vec yp = y;
    Mat Pp(dim_n, dim_n), Pm(dim_n, dim_n);
    for (int j = 0; j < dim_n; ++j) {
        const double yj = y[j];
        yp[j] = yj + h;
        proj(yp, Pp);
        yp[j] = yj - h;
        proj(yp, Pm);
        yp[j] = yj;
        out += (Pp.col(j) - Pm.col(j)) / (2.0 * h);
    }
}

void ReactionCoordinate::div_h(const Vec& y, Vec& out) const {
    // divergence over y of the columns of H = grad_xi * Psi^{-1}  (a = id)
    const double h = kFdStep;
    auto H_at = [&](const Vec& yy, Mat& H) {
        Mat g(dim_n, dim_d);
        grad_xi(yy, g);
        Mat psi_m = g.transpose() * g;
        H = g * psi_m.ldlt().solve(Mat::Identity(dim_d, dim_d));
    };
    out = Vec::Zero(dim_d);
    Vec yp = y;
    Mat Hp(dim_n, dim_d), Hm(dim_n, dim_d);
    for (int i = 0; i < dim_n; ++i) {
        const double yi = y[i];
        yp[i] = yi + h;
        H_at(yp, Hp);
        yp[i] = yi - h;
        H_at(yp, Hm);
        yp[i] = yi;
        out += (Hp.row(i) - Hm.row(i)).transpose() / (2.0 * h);
    }
}

ProjectionParts build_projection(const ReactionCoordinate& rc, const Vec& y) {
    ProjectionParts parts;
    Mat g(rc.dim_n, rc.dim_d);
    rc.grad_xi(y, g);
    parts.Psi = g.transpose() * g;
    Eigen::SelfAdjointEigenSolver<Mat> es(parts.Psi);
    const double lmin = es.eigenvalues().minCoeff();
    const double lmax = es.eigenvalues().maxCoeff();
    if (lmin <= 0.0 || lmax / lmin > rc.condition_cap)
        throw GeometryError("build_projection: singular Psi at y=" + point_str(y));
    parts.P = Mat::Identity(rc.dim_n, rc.dim_n) - g * parts.Psi.ldlt().solve(g.transpose());
    rc.div_Pa(y, parts.div_Pa);
    return parts;
}

ReactionCoordinate AngleRC::erased() const {
    ReactionCoordinate rc;
    rc.dim_n = 3;
    rc.dim_d = 1;
    const Example2Params gp = guard_params;
    rc.xi = [gp](const Vec& y, Vec& z) {
        if (!gp.angle_defined(y[0], y[1])) throw GeometryError("angle rc: angle undefined");
        z.resize(1);
        z[0] = std::atan2(y[1], y[0]);
    };
    rc.grad_xi = [gp](const Vec& y, Mat& g) {
        if (!gp.angle_defined(y[0], y[1])) throw GeometryError("angle rc: angle undefined");
        const double r2 = y[0] * y[0] + y[1] * y[1];
        g.resize(3, 1);
        g(0, 0) = -y[1] / r2;
        g(1, 0) = y[0] / r2;
        g(2, 0) = 0.0;
    };
    return rc;
}

ReactionCoordinate make_fd_reaction_coordinate(int n, int d,
                                               std::function<void(const Vec&, Vec&)> xi) {
    ReactionCoordinate rc;
    rc.dim_n = n;
    rc.dim_d = d;
    rc.xi = xi;
    rc.grad_xi = [n, d, xi](const Vec& y, Mat& g) {
        g.resize(n, d);
        Vec yp = y, zp(d), zm(d);
        for (int i = 0; i < n; ++i) {
            const double yi = y[i];
            yp[i] = yi + kFdStep;
            xi(yp, zp);
            yp[i] = yi - kFdStep;
            xi(yp, zm);
            yp[i] = yi;
            g.row(i) = (zp - zm).transpose() / (2.0 * kFdStep);
        }
    };
    return rc;
}

bool AnsatzBasis::bounded_on(const Vec& lo, const Vec& hi, double t_max, double bound,
                             int samples_per_dim) const {
    // tensor sampling is exponential in n; this is a spot check, so sample a
    // fixed budget of quasi-random points instead
    const int n_points = samples_per_dim * samples_per_dim;
    Vec x(dim_n), val(dim_n);
    std::uint64_t h = 0x9e3779b97f4a7c15ULL;
    auto next01 = [&h]() {
        h ^= h << 13;
        h ^= h >> 7;
        h ^= h << 17;
        return static_cast<double>(h >> 11) * 0x1.0p-53;
    };
    for (int p = 0; p < n_points; ++p) {
        for (int i = 0; i < dim_n; ++i) x[i] = lo[i] + (hi[i] - lo[i]) * next01();
        const double t = t_max * next01();
        for (int l = 0; l < size_k; ++l) {
            phi(l, x, t, val);
            if (!val.allFinite() || val.lpNorm<Eigen::Infinity>() > bound) return false;
        }
    }
    return true;
}

AnsatzBasis make_ansatz_example1(Ex1AnsatzKind kind) {
    AnsatzBasis b;
    b.dim_n = 1;
    if (kind == Ex1AnsatzKind::PiecewiseLinear) {
        PiecewiseLinearBasis1D pl;
        b.size_k = pl.k;
        for (int l = 0; l < pl.k; ++l) {
            const double cl = pl.lo + l * pl.width();
            b.description.push_back("(1-t) * indicator[" + std::to_string(cl) + "," +
                                    std::to_string(cl + pl.width()) + ")");
        }
        b.phi = [pl](int l, const Vec& x, double t, Vec& out) {
            out.resize(1);
            out[0] = pl.phi(l, x[0], t);
        };
    } else {
        GaussianDerivBasis1D gb;
        b.size_k = gb.k;
        b.description = {"(1-t) d/dx exp(-x^2/2)", "(1-t) d/dx exp(-(x-1.2)^2/4.5)"};
        b.phi = [gb](int l, const Vec& x, double t, Vec& out) {
            out.resize(1);
            out[0] = gb.phi(l, x[0], t);
        };
    }
    return b;
}

PotentialModel make_potential_model(int n, int m,
                                    std::function<double(const Vec&, const Vec&)> eval,
                                    std::function<void(const Vec&, const Vec&, Vec&)> grad_x,
                                    std::function<void(const Vec&, const Vec&, Vec&)> grad_lambda) {
    PotentialModel model;
    model.dim_n = n;
    model.dim_m = m;
    model.eval_fn = eval;
    model.grad_x_fn = grad_x ? std::move(grad_x)
                             : [eval](const Vec& x, const Vec& lam, Vec& out) {
                                   fd_gradient([&](const Vec& xx) { return eval(xx, lam); }, x, out);
                               };
    model.grad_lambda_fn = grad_lambda
                               ? std::move(grad_lambda)
                               : [eval](const Vec& x, const Vec& lam, Vec& out) {
                                     fd_gradient([&](const Vec& ll) { return eval(x, ll); }, lam, out);
                                 };
    return model;
}

PotentialModel example1_model() {
    return make_potential_model(
        1, 1,
        [](const Vec& x, const Vec& l) { return Example1Potential::eval(x[0], l[0]); },
        [](const Vec& x, const Vec& l, Vec& out) {
            out.resize(1);
            out[0] = Example1Potential::grad_x_value(x[0], l[0]);
        },
        [](const Vec& x, const Vec& l, Vec& out) {
            out.resize(1);
            out[0] = Example1Potential::grad_lambda_value(x[0], l[0]);
        });
}

double eval_potential(const PotentialModel& m, const Vec& x, const Vec& lam) {
    const double v = m.eval(x, lam);
    if (!std::isfinite(v))
        throw NumericsError("eval_potential: non-finite energy at x=" + point_str(x) +
                            ", lambda=" + point_str(lam));
    return v;
}

Protocol Protocol::reversed() const {
    Protocol r = *this;
    const double T = horizon_T;
    auto lam = lambda_of_t;
    auto f = rate_f;
    r.lambda_of_t = [lam, T](double t, Vec& out) { lam(T - t, out); };
    r.rate_f = [f, T](const Vec& l, double t, Vec& out) {
        f(l, T - t, out);
        out = -out;
    };
    return r;
}

Protocol linear_protocol_erased() {
    Protocol p;
    p.dim_m = 1;
    p.horizon_T = 1.0;
    p.lambda_of_t = [](double t, Vec& lam) {
        lam.resize(1);
        lam[0] = t < 0.0 ? 0.0 : (t > 1.0 ? 1.0 : t);
    };
    p.rate_f = [](const Vec&, double, Vec& f) {
        f.resize(1);
        f[0] = 1.0;
    };
    return p;
}

}  // namespace nefep
