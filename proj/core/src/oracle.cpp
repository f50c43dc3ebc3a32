#include "nefep/oracle.hpp"

#include <algorithm>
#include <memory>

namespace nefep {

namespace {

constexpr double kBoundaryDecay = 1e-12;

void check_boundary_decay(const std::function<double(double)>& f, double lo, double hi,
                          double max_val, const char* what) {
    if (max_val <= 0.0) throw NumericsError(std::string(what) + ": integrand vanishes");
    if (f(lo) > kBoundaryDecay * max_val || f(hi) > kBoundaryDecay * max_val)
        throw NumericsError(std::string(what) +
                            ": integrand does not decay below 1e-12 of its max at the domain "
                            "boundary (domain too small)");
}

}  // namespace

void QuadratureConfig::validate() const {
    if (n_nodes < 3) throw ConfigError("quadrature: need at least 3 nodes");
    if (!(lo < hi) || !std::isfinite(lo) || !std::isfinite(hi))
        throw ConfigError("quadrature: bounds must be finite and ordered");
    if (rule == Rule::Simpson && n_nodes % 2 == 0)
        throw ConfigError("quadrature: Simpson rule needs an odd node count");
}

double integrate_1d(const std::function<double(double)>& f, const QuadratureConfig& cfg) {
    cfg.validate();
    const int n = cfg.n_nodes;
    const double h = (cfg.hi - cfg.lo) / (n - 1);
    KahanSum s;
    if (cfg.rule == QuadratureConfig::Rule::Trapezoid) {
        s.add(0.5 * f(cfg.lo));
        for (int i = 1; i < n - 1; ++i) s.add(f(cfg.lo + i * h));
        s.add(0.5 * f(cfg.hi));
        return s.value() * h;
    }
    s.add(f(cfg.lo));
    for (int i = 1; i < n - 1; ++i) s.add((i % 2 ? 4.0 : 2.0) * f(cfg.lo + i * h));
    s.add(f(cfg.hi));
    return s.value() * h / 3.0;
}

double Oracle1D::z_of_lambda(double lam) const {
    auto integrand = [&](double x) { return std::exp(-beta * v(x, lam)); };
    // locate the max on the grid for the decay check
    double max_val = 0.0;
    const int n = cfg.n_nodes;
    const double h = (cfg.hi - cfg.lo) / (n - 1);
    for (int i = 0; i < n; ++i) max_val = std::max(max_val, integrand(cfg.lo + i * h));
    check_boundary_decay(integrand, cfg.lo, cfg.hi, max_val, "z_of_lambda");
    return integrate_1d(integrand, cfg);
}

double Oracle1D::free_energy(double lam) const { return -std::log(z_of_lambda(lam)) / beta; }

double Oracle1D::delta_f(double lam1, double lam0) const {
    return free_energy(lam1) - free_energy(lam0);
}

double Oracle1D::equilibrium_mean(double lam, const std::function<double(double)>& g) const {
    const double z = z_of_lambda(lam);
    auto integrand = [&](double x) { return g(x) * std::exp(-beta * v(x, lam)); };
    return integrate_1d(integrand, cfg) / z;
}

Oracle1D example1_oracle(double beta) {
    Oracle1D o;
    o.v = [](double x, double lam) { return Example1Potential::eval(x, lam); };
    o.beta = beta;
    return o;
}

// ---------------------------------------------------------------------------

GaussianSampler::GaussianSampler(double mean, double variance)
    : mean_(mean), sd_(std::sqrt(variance)),
      log_norm_(-0.5 * std::log(2.0 * M_PI * variance)) {
    if (!(variance > 0.0)) throw ConfigError("GaussianSampler: variance must be positive");
}
double GaussianSampler::sample(NoiseStream& ns) const { return mean_ + sd_ * ns.normal(); }
double GaussianSampler::log_density(double x) const {
    const double z = (x - mean_) / sd_;
    return log_norm_ - 0.5 * z * z;
}

InverseCdfSampler::InverseCdfSampler(std::function<double(double)> density,
                                     const QuadratureConfig& cfg) {
    cfg.validate();
    const int n = cfg.n_nodes;
    const double h = (cfg.hi - cfg.lo) / (n - 1);
    x_.resize(n);
    std::vector<double> pdf(n);
    double max_val = 0.0;
    for (int i = 0; i < n; ++i) {
        x_[i] = cfg.lo + i * h;
        pdf[i] = density(x_[i]);
        if (pdf[i] < 0.0) throw NumericsError("InverseCdfSampler: negative density");
        max_val = std::max(max_val, pdf[i]);
    }
    if (max_val <= 0.0) throw NumericsError("InverseCdfSampler: zero-mass density");
    // cumulative trapezoid
    cdf_.assign(n, 0.0);
    KahanSum acc;
    for (int i = 1; i < n; ++i) {
        acc.add(0.5 * (pdf[i - 1] + pdf[i]) * h);
        cdf_[i] = acc.value();
    }
    norm_ = cdf_.back();
    if (!(norm_ > 0.0)) throw NumericsError("InverseCdfSampler: zero-mass density");
    for (auto& c : cdf_) c /= norm_;
    logpdf_.resize(n);
    const double tiny = max_val * 1e-300;
    for (int i = 0; i < n; ++i) logpdf_[i] = std::log(std::max(pdf[i], tiny) / norm_);
}

double InverseCdfSampler::sample_u(double u) const {
    const auto it = std::upper_bound(cdf_.begin(), cdf_.end(), u);
    if (it == cdf_.begin()) return x_.front();
    if (it == cdf_.end()) return x_.back();
    const std::size_t i = static_cast<std::size_t>(it - cdf_.begin());
    const double c0 = cdf_[i - 1], c1 = cdf_[i];
    const double w = c1 > c0 ? (u - c0) / (c1 - c0) : 0.5;
    return x_[i - 1] + w * (x_[i] - x_[i - 1]);
}

double InverseCdfSampler::sample(NoiseStream& ns) const { return sample_u(ns.uniform()); }

double InverseCdfSampler::normalized_mass() const {
    KahanSum mass;
    const double h = x_[1] - x_[0];
    for (std::size_t i = 0; i + 1 < x_.size(); ++i)
        mass.add(0.5 * (std::exp(logpdf_[i]) + std::exp(logpdf_[i + 1])) * h);
    return mass.value();
}

double InverseCdfSampler::log_density(double x) const {
    if (x <= x_.front()) return logpdf_.front();
    if (x >= x_.back()) return logpdf_.back();
    const double h = x_[1] - x_[0];
    const auto i = static_cast<std::size_t>((x - x_.front()) / h);
    const std::size_t j = std::min(i, logpdf_.size() - 2);
    const double w = (x - x_[j]) / h;
    return logpdf_[j] * (1.0 - w) + logpdf_[j + 1] * w;
}

std::unique_ptr<Sampler1D> equilibrium_sampler_1d(const std::function<double(double, double)>& v,
                                                  double lam, double beta,
                                                  const QuadratureConfig& cfg) {
    // probe for an exactly quadratic V(., lam): fit on three points, then
    // verify the residual across the domain
    const double x0 = 0.37, d = 1.13;
    const double f0 = v(x0 - d, lam), f1 = v(x0, lam), f2 = v(x0 + d, lam);
    const double a2 = (f0 - 2.0 * f1 + f2) / (2.0 * d * d);
    if (a2 > 0.0) {
        const double a1 = (f2 - f0) / (2.0 * d) - 2.0 * a2 * x0;
        const double a0 = f1 - a2 * x0 * x0 - a1 * x0;
        bool quadratic = true;
        for (int i = 0; i <= 16 && quadratic; ++i) {
            const double x = cfg.lo + (cfg.hi - cfg.lo) * i / 16.0;
            const double fit = a2 * x * x + a1 * x + a0;
            if (std::abs(v(x, lam) - fit) > 1e-10 * (1.0 + std::abs(fit))) quadratic = false;
        }
        if (quadratic) {
            const double mean = -a1 / (2.0 * a2);
            const double variance = 1.0 / (2.0 * beta * a2);
            return std::make_unique<GaussianSampler>(mean, variance);
        }
    }
    auto density = [v, lam, beta](double x) { return std::exp(-beta * v(x, lam)); };
    return std::make_unique<InverseCdfSampler>(density, cfg);
}

// ---------------------------------------------------------------------------

namespace {

// 1D integrals of the separable Example-2 Gibbs factor
double y3_factor(const Example2Params& p, const QuadratureConfig& cfg, double beta) {
    auto f = [&](double y3) {
        const double d = std::abs(y3) - p.l_eq;
        return std::exp(-beta * d * d / (2.0 * p.eps));
    };
    double max_val = 0.0;
    for (int i = 0; i < cfg.n_nodes; ++i) {
        const double y = cfg.lo + (cfg.hi - cfg.lo) * i / (cfg.n_nodes - 1);
        max_val = std::max(max_val, f(y));
    }
    check_boundary_decay(f, cfg.lo, cfg.hi, max_val, "q_of_theta(y3)");
    return integrate_1d(f, cfg);
}

std::function<double(double)> r_integrand(const Example2Params& p, double theta, double beta) {
    return [p, theta, beta](double r) {
        const double dr = r - p.bond_target(theta);
        const double vv = dr * dr / (2.0 * p.eps) + p.v3(theta);
        return std::exp(-beta * vv) * r;  // co-area Jacobian
    };
}

}  // namespace

double OracleRc::q_of_theta(double theta) const {
    if (!(theta > 0.0) || !(theta < M_PI))
        throw ConfigError("q_of_theta: theta outside the right-half-plane branch");
    auto fr = r_integrand(params, theta, params.beta);
    double max_val = 0.0;
    for (int i = 0; i < cfg.r.n_nodes; ++i) {
        const double r = cfg.r.lo + (cfg.r.hi - cfg.r.lo) * i / (cfg.r.n_nodes - 1);
        max_val = std::max(max_val, fr(r));
    }
    check_boundary_decay(fr, cfg.r.lo, cfg.r.hi, max_val, "q_of_theta(r)");
    return integrate_1d(fr, cfg.r) * y3_factor(params, cfg.y3, params.beta);
}

double OracleRc::free_energy(double theta) const { return -std::log(q_of_theta(theta)) / params.beta; }

double OracleRc::delta_f(double theta1, double theta0) const {
    return free_energy(theta1) - free_energy(theta0);
}

double OracleRc::level_mean(double theta, const std::function<double(double, double)>& g) const {
    // generic tensor-product quadrature over the (r, y3) level-set density
    const double beta = params.beta;
    const auto rfac = r_integrand(params, theta, beta);
    auto inner = [&](double r) {
        auto f = [&](double y3) {
            const double d3 = std::abs(y3) - params.l_eq;
            return g(r, y3) * std::exp(-beta * d3 * d3 / (2.0 * params.eps));
        };
        return integrate_1d(f, cfg.y3) * rfac(r);
    };
    const double num = integrate_1d(inner, cfg.r);
    const double den = integrate_1d(rfac, cfg.r) * y3_factor(params, cfg.y3, beta);
    return num / den;
}

double OracleRc::mean_force(double theta) const {
    const Example2Potential pot{params};
    return level_mean(theta, [&](double r, double) { return pot.dV_dtheta(r, theta); });
}

RcLevelDensity::RcLevelDensity(const Example2Params& params, double theta,
                               const Quadrature2DConfig& cfg)
    : p_(params), theta_(theta) {
    const double beta = p_.beta;
    r_marginal_ = std::make_unique<InverseCdfSampler>(r_integrand(p_, theta, beta), cfg.r);
    y3_marginal_ = std::make_unique<InverseCdfSampler>(
        [this, beta](double y3) {
            const double d = std::abs(y3) - p_.l_eq;
            return std::exp(-beta * d * d / (2.0 * p_.eps));
        },
        cfg.y3);
    norm_ = r_marginal_->normalization() * y3_marginal_->normalization();
}

double RcLevelDensity::density(double r, double y3) const {
    const Example2Potential pot{p_};
    return std::exp(-p_.beta * pot.eval_polar(r, theta_, y3)) * r / norm_;
}

double RcLevelDensity::sample_r(double u) const { return r_marginal_->sample_u(u); }
double RcLevelDensity::sample_y3(double u) const { return y3_marginal_->sample_u(u); }

Eigen::Vector3d RcLevelDensity::sample_state(NoiseStream& ns) const {
    const double r = sample_r(ns.uniform());
    const double y3 = sample_y3(ns.uniform());
    return {r * std::cos(theta_), r * std::sin(theta_), y3};
}

}  // namespace nefep
