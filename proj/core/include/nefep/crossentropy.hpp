#pragma once

#include "nefep/estimators.hpp"
#include "nefep/model.hpp"
#include "nefep/oracle.hpp"
#include "nefep/sde.hpp"

#include <span>

namespace nefep {

// ---------------------------------------------------------------------------
// cross-entropy linear system  A omega* = R  with
//   A_{ll'} = E[ e^{-beta W} int phi_l . phi_l' ds ]
//   R_l    = E[ e^{-beta W} int phi_l . sigma^{-1}(dx - b ds) ]
// where the stochastic integral is evaluated as  c dt + noise_coef dW  from
// the simulating measure's recorded increments (exact for the discrete
// chain); biased ensembles are reweighted by exp(log_weight).
// ---------------------------------------------------------------------------

struct CESystem {
    Mat A;
    Vec R;
    std::size_t n_samples = 0;
    double condition_estimate = std::numeric_limits<double>::infinity();

    // A must be symmetric and PSD up to sampling noise
    void validate(double tol_scale = 1e-8) const;
};

struct SolveResult {
    Vec omega;
    double ridge = 0.0;
    double condition = 0.0;
};

// ridge < 0 selects the default 1e-8 * trace(A)/k
SolveResult solve_system(const CESystem& sys, double ridge = -1.0);

// ---------------------------------------------------------------------------
// assembly
// ---------------------------------------------------------------------------

// per-step record of a scalar-state trajectory in recording mode
struct CeStep1D {
    double x;
    double t;
    double dt;
    double dw;  // increment actually drawn (~ N(0, dt))
    double c;   // simulating control drift at (x, t); 0 for unbiased pilots
};

struct RecordedTrajectory1D {
    std::vector<CeStep1D> steps;
    double work = 0.0;
    double log_weight = 0.0;  // log(dP/dP_sim)
    bool diverged = false;
};

// streaming assembler; feed per-step data then close each trajectory
template <class Basis>
class CEAssembler1D {
  public:
    CEAssembler1D(const Basis& basis, int k, double beta, double noise_coef)
        : basis_(&basis), beta_(beta), noise_coef_(noise_coef), S_(k, k), G_(k), A_(Mat::Zero(k, k)),
          R_(Vec::Zero(k)) {
        begin_trajectory();
    }

    void begin_trajectory() {
        S_.setZero();
        G_.setZero();
    }
    void on_step(double x, double t, double dt, double dw, double c) {
        idx_.clear();
        val_.clear();
        basis_->for_each_nonzero(x, t, [&](int l, double phi) {
            idx_.push_back(l);
            val_.push_back(phi);
        });
        const double incr = c * dt + noise_coef_ * dw;
        for (std::size_t a = 0; a < idx_.size(); ++a) {
            G_[idx_[a]] += val_[a] * incr;
            for (std::size_t b = 0; b < idx_.size(); ++b)
                S_(idx_[a], idx_[b]) += val_[a] * val_[b] * dt;
        }
    }
    void end_trajectory(double work, double log_weight) {
        const double u = std::exp(-beta_ * work + log_weight);
        A_ += u * S_;
        R_ += u * G_;
        ++n_;
        begin_trajectory();
    }
    void merge(const CEAssembler1D& other) {
        A_ += other.A_;
        R_ += other.R_;
        n_ += other.n_;
    }

    CESystem finalize() const;

  private:
    const Basis* basis_;
    double beta_, noise_coef_;
    Mat S_;
    Vec G_;
    Mat A_;
    Vec R_;
    std::size_t n_ = 0;
    std::vector<int> idx_;
    std::vector<double> val_;
};

namespace detail {
CESystem finalize_ce(const Mat& A_acc, const Vec& R_acc, std::size_t n, int k);
}

template <class Basis>
CESystem CEAssembler1D<Basis>::finalize() const {
    return detail::finalize_ce(A_, R_, n_, static_cast<int>(R_.size()));
}

// spec-level assembly from recorded trajectories (tests, small ensembles)
template <class Basis>
CESystem assemble_system(std::span<const RecordedTrajectory1D> samples, const Basis& basis, int k,
                         double beta, double noise_coef) {
    CEAssembler1D<Basis> acc(basis, k, beta, noise_coef);
    for (const auto& traj : samples) {
        if (traj.diverged) continue;
        for (const auto& s : traj.steps) acc.on_step(s.x, s.t, s.dt, s.dw, s.c);
        acc.end_trajectory(traj.work, traj.log_weight);
    }
    return acc.finalize();
}

// ---------------------------------------------------------------------------
// iterated CE pilot (simulate -> assemble -> solve), Example-1 style models
// ---------------------------------------------------------------------------

struct CeRound {
    double beta;          // round temperature; final round at the target beta
    std::size_t n_pilot;  // trajectories simulated this round
};

struct CePilotReport {
    Vec omega;
    std::vector<CESystem> systems;    // one per round
    std::vector<double> omega_norms;  // max-norm per round
};

// observer adapter plugging a CEAssembler1D into the integrator step hook
template <class Basis>
struct CeRecordingObserver {
    CEAssembler1D<Basis>* acc;
    void on_step(double x, double t, double dt, double dw, double c) { acc->on_step(x, t, dt, dw, c); }
};

// Repeats pilot-simulate / assemble / solve over the round schedule.  Each
// round simulates under the previous round's coefficients (Girsanov
// reweighting makes the assembly unbiased for that round's reference
// measure) and a coefficient max-norm growth beyond 10x between rounds is
// reported as divergence of the iteration.
template <class Model, class Protocol, class Basis>
CePilotReport iterate_ce(const Model& model, const Protocol& protocol, const Basis& basis, int k,
                         const Sampler1D& initial, const std::vector<CeRound>& rounds, double dt,
                         std::uint64_t seed, double ridge = -1.0, int threads = 0) {
    if (rounds.empty()) throw ConfigError("iterate_ce: empty round schedule");
    if (k < 1) throw ConfigError("iterate_ce: basis must have k >= 1 functions");

    CePilotReport rep;
    Vec omega = Vec::Zero(k);
    std::uint64_t round_id = 0;
    for (const auto& round : rounds) {
        const double beta = round.beta;
        if (!(beta > 0.0)) throw ConfigError("iterate_ce: beta must be positive");
        const IntegratorConfig cfg = make_config(dt, protocol.horizon(), seed);
        const double noise_coef = std::sqrt(2.0 / beta);
        const bool biased = omega.lpNorm<Eigen::Infinity>() > 0.0;

        using Acc = CEAssembler1D<Basis>;
        auto make_ctx = [&]() { return Acc(basis, k, beta, noise_coef); };
        auto per_traj = [&](NoiseStream& ns, std::size_t, Acc& acc) {
            const double x0 = initial.sample(ns);
            CeRecordingObserver<Basis> obs{&acc};
            TrajectoryResult r;
            if (biased) {
                BasisControl1D<Basis> control{&basis, omega};
                r = simulate_alchemical(model, protocol, beta, control, x0, cfg, ns, {}, obs);
            } else {
                r = simulate_alchemical(model, protocol, beta, NoControl{}, x0, cfg, ns, {}, obs);
            }
            if (r.diverged) {
                acc.begin_trajectory();  // drop the partial records
                return true;
            }
            acc.end_trajectory(r.work, r.log_weight);
            return false;
        };
        Acc total(basis, k, beta, noise_coef);
        auto merge = [&](const Acc& c) { total.merge(c); };
        EnsembleOptions opts;
        opts.threads = threads;
        run_ensemble_reduce<Acc>(round.n_pilot, seed + 0x51a5ULL, 1000 + round_id, make_ctx,
                                 per_traj, merge, opts);

        CESystem sys = total.finalize();
        SolveResult sol = solve_system(sys, ridge);
        const double prev_norm = omega.lpNorm<Eigen::Infinity>();
        const double new_norm = sol.omega.lpNorm<Eigen::Infinity>();
        if (round_id > 0 && prev_norm > 0.0 && new_norm > 10.0 * prev_norm)
            throw NumericsError("iterate_ce: coefficient norm grew more than 10x between rounds");
        omega = sol.omega;
        rep.systems.push_back(std::move(sys));
        rep.omega_norms.push_back(new_norm);
        ++round_id;
    }
    rep.omega = omega;
    return rep;
}

// type-erased control field (serialization and plug-in surface)
struct ControlField {
    AnsatzBasis basis;
    Vec omega;

    void eval(const Vec& x, double t, Vec& out) const {
        Vec phi(basis.dim_n);
        out = Vec::Zero(basis.dim_n);
        for (int l = 0; l < basis.size_k; ++l) {
            basis.phi(l, x, t, phi);
            out += omega[l] * phi;
        }
    }
};

}  // namespace nefep
