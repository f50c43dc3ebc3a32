#pragma once

#include "nefep/common.hpp"
#include "nefep/model.hpp"
#include "nefep/rng.hpp"

#include <functional>
#include <memory>

namespace nefep {

// ---------------------------------------------------------------------------
// composite 1D quadrature
// ---------------------------------------------------------------------------

struct QuadratureConfig {
    double lo = -5.0;
    double hi = 5.0;
    int n_nodes = 20001;  // Simpson needs an odd count
    enum class Rule { Trapezoid, Simpson } rule = Rule::Simpson;

    void validate() const;
};

double integrate_1d(const std::function<double(double)>& f, const QuadratureConfig& cfg);

// ---------------------------------------------------------------------------
// alchemical oracle: Z(lambda), F(lambda) and equilibrium expectations for a
// 1D potential.  The boundary-decay precondition (integrand below 1e-12 of
// its max at the domain ends) is enforced; failing it raises a
// domain-too-small error instead of returning a silently truncated value.
// ---------------------------------------------------------------------------

struct Oracle1D {
    std::function<double(double, double)> v;  // V(x, lambda)
    double beta = 5.0;
    QuadratureConfig cfg;

    double z_of_lambda(double lam) const;                   // int exp(-beta V) dx
    double free_energy(double lam) const;                   // -log(Z)/beta
    double delta_f(double lam1, double lam0) const;
    // E_{mu_lambda}[g] for a scalar observable g(x)
    double equilibrium_mean(double lam, const std::function<double(double)>& g) const;
};

Oracle1D example1_oracle(double beta = 5.0);

// ---------------------------------------------------------------------------
// 1D equilibrium samplers
// ---------------------------------------------------------------------------

class Sampler1D {
  public:
    virtual ~Sampler1D() = default;
    virtual double sample(NoiseStream& ns) const = 0;
    virtual double log_density(double x) const = 0;
};

class GaussianSampler final : public Sampler1D {
  public:
    GaussianSampler(double mean, double variance);
    double sample(NoiseStream& ns) const override;
    double log_density(double x) const override;
    double mean() const { return mean_; }

  private:
    double mean_, sd_, log_norm_;
};

// inverse-CDF sampler on the quadrature grid of an unnormalized density
class InverseCdfSampler final : public Sampler1D {
  public:
    InverseCdfSampler(std::function<double(double)> unnormalized_density,
                      const QuadratureConfig& cfg);
    double sample(NoiseStream& ns) const override;       // consumes one uniform
    double sample_u(double u) const;                     // deterministic map
    double log_density(double x) const override;
    double normalization() const { return norm_; }
    // trapezoid mass of the normalized density over its own grid (== 1 up
    // to round-off, by construction)
    double normalized_mass() const;
    const std::vector<double>& grid() const { return x_; }

  private:
    std::vector<double> x_, cdf_, logpdf_;
    double norm_ = 0.0;
};

// mu_lambda sampler for a 1D model; detects exactly-quadratic potentials and
// returns the closed-form Gaussian sampler in that case
std::unique_ptr<Sampler1D> equilibrium_sampler_1d(const std::function<double(double, double)>& v,
                                                  double lam, double beta,
                                                  const QuadratureConfig& cfg);

// ---------------------------------------------------------------------------
// Example-2 reaction-coordinate oracle.  The co-area integral over the level
// set theta = const reduces, in the polar parametrization
// (y1, y2) = r (cos t, sin t), to
//
//   Q(theta) = int int exp(-beta V(r cos, r sin, y3)) r dr dy3,
//
// and mu_theta has density proportional to exp(-beta V) r over (r, y3).
// ---------------------------------------------------------------------------

struct Quadrature2DConfig {
    // default r-domain is wider than the bond range so the 1e-12 boundary
    // decay holds for every kappa/theta used in the experiments
    QuadratureConfig r{2.0, 9.0, 1001, QuadratureConfig::Rule::Simpson};
    QuadratureConfig y3{3.0, 7.0, 1001, QuadratureConfig::Rule::Simpson};
};

struct OracleRc {
    Example2Params params;
    Quadrature2DConfig cfg;

    double q_of_theta(double theta) const;
    double free_energy(double theta) const;  // -log(Q)/beta
    double delta_f(double theta1, double theta0) const;
    // E_{mu_theta}[g(r, y3)]
    double level_mean(double theta, const std::function<double(double, double)>& g) const;
    // mean of the work-rate integrand dV/dtheta on the level set (Appendix-B
    // mean force; the divergence term vanishes identically for this xi)
    double mean_force(double theta) const;
};

// normalized density of mu_theta over the (r, y3) parametrization, with an
// exact two-stage inverse-CDF sampler
class RcLevelDensity {
  public:
    RcLevelDensity(const Example2Params& params, double theta, const Quadrature2DConfig& cfg);

    double normalization() const { return norm_; }  // equals Q(theta) by construction
    double density(double r, double y3) const;      // normalized
    // draws (r, y3) and maps to y = (r cos theta, r sin theta, y3)
    Eigen::Vector3d sample_state(NoiseStream& ns) const;
    double sample_r(double u) const;
    double sample_y3(double u) const;
    double theta() const { return theta_; }

  private:
    Example2Params p_;
    double theta_, norm_;
    // V is additively separable in ((r,theta), y3), so the level density
    // factorizes into independent r- and y3-marginals
    std::unique_ptr<InverseCdfSampler> r_marginal_, y3_marginal_;
};

}  // namespace nefep
