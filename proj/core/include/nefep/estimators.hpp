#pragma once

#include "nefep/common.hpp"
#include "nefep/sde.hpp"

#include <span>

namespace nefep {

// ---------------------------------------------------------------------------
// work histogram
// ---------------------------------------------------------------------------

struct HistogramSpec {
    double lo = -5.0;
    double hi = 5.0;
    double bin_width = 0.05;  // energy units

    int n_bins() const { return static_cast<int>(std::ceil((hi - lo) / bin_width - 1e-12)); }
};

struct Histogram {
    HistogramSpec spec;
    std::vector<double> counts;     // per bin, in index order
    std::size_t n_in_range = 0;
    std::size_t n_out_of_range = 0;

    explicit Histogram(const HistogramSpec& s = {}) : spec(s), counts(s.n_bins(), 0.0) {}
    void add(double w);
    void merge(const Histogram& other);
    double bin_left(int b) const { return spec.lo + b * spec.bin_width; }
    double bin_right(int b) const { return spec.lo + (b + 1) * spec.bin_width; }
    // densities normalized so the in-range mass integrates to one
    std::vector<double> densities() const;
};

// ---------------------------------------------------------------------------
// Jarzynski estimator reports
// ---------------------------------------------------------------------------

struct EstimatorReport {
    double estimate_I = 0.0;   // mean of exp(-beta W + log_weight)
    double dF = 0.0;           // -log(estimate_I)/beta, exactly
    double n_effective = 0.0;  // ESS of the normalized likelihood ratios
    std::vector<double> per_run_I;
    std::vector<double> per_run_dF;
    double sd_I = std::numeric_limits<double>::quiet_NaN();   // across runs
    double sd_dF = std::numeric_limits<double>::quiet_NaN();  // across runs
    double mean_work = 0.0;
    Histogram work_histogram;
    std::size_t n_samples = 0;   // non-diverged samples absorbed
    std::size_t n_diverged = 0;

    double mean_dF_across_runs() const { return mean_of(per_run_dF); }
    double mean_I_across_runs() const { return mean_of(per_run_I); }
};

// Single-ensemble Jarzynski estimate: I = (1/N) sum exp(-beta W_i + logw_i),
// evaluated through a max-shifted exponential sum; diverged samples are
// skipped (they were already counted by the ensemble runner).
EstimatorReport jarzynski_estimate(std::span<const TrajectoryResult> samples, double beta,
                                   const HistogramSpec& hist = {});

// Pools independent runs: per-run values are concatenated, across-run sample
// SDs use the unbiased (n-1) estimator, histograms are merged.
EstimatorReport combine_runs(const std::vector<EstimatorReport>& runs, double beta);

// mean work and normalized work densities
std::pair<double, Histogram> work_statistics(std::span<const TrajectoryResult> samples,
                                             const HistogramSpec& hist);

// ---------------------------------------------------------------------------
// free-energy profile along the protocol
// ---------------------------------------------------------------------------

struct WorkCurve {
    std::vector<double> coordinate;  // lambda(t) or theta(t) at the grid times
    std::vector<double> dF;
    std::vector<double> dF_sd;  // across runs; NaN for a single run
    std::vector<std::vector<double>> per_run_dF;  // [grid][run]
};

// dF(lambda(t_g)) from work/log-weight checkpoints recorded at grid times.
// The first grid point of a protocol started at t=0 is exactly 0 by
// definition of the free-energy difference.
WorkCurve df_curve(std::span<const TrajectoryResult> samples, double beta,
                   const std::vector<double>& grid_times,
                   const std::vector<double>& grid_coordinates);

WorkCurve combine_curves(const std::vector<WorkCurve>& runs);

// ---------------------------------------------------------------------------
// thermodynamic integration
// ---------------------------------------------------------------------------

// Trapezoid quadrature of a mean-force profile s -> E_{mu(s)}[work rate].
// The callable already contains the protocol rate factor.
double ti_estimate(const std::function<double(double)>& mean_force_at,
                   const std::vector<double>& s_grid);

std::vector<double> uniform_grid(double lo, double hi, int n);

// ---------------------------------------------------------------------------
// Crooks fluctuation diagnostic
// ---------------------------------------------------------------------------

struct CrooksBin {
    double w_lo = 0.0, w_hi = 0.0;
    std::size_t n_forward = 0;  // forward samples with W in the bin
    std::size_t n_reverse = 0;  // reverse samples with -W^R in the bin
    bool defined = false;
    double ratio = std::numeric_limits<double>::quiet_NaN();
    double se = std::numeric_limits<double>::quiet_NaN();  // delta-method std error
    double expected = 0.0;                                 // exp(-beta dF_ref)
    double deviation = std::numeric_limits<double>::quiet_NaN();  // (ratio-expected)/se
};

// Per-bin ratios  E_fwd[e^{-beta W} 1_b(W)] / E_rev[1_b(-W^R)]  against
// exp(-beta dF_ref); sample log-weights are honored so importance-sampled
// ensembles can be diagnosed too.
std::vector<CrooksBin> crooks_diagnostic(std::span<const TrajectoryResult> forward,
                                         std::span<const TrajectoryResult> reverse, double beta,
                                         double dF_ref, const HistogramSpec& bins);

}  // namespace nefep
