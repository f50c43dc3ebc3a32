#include "nefep/estimators.hpp"

#include <algorithm>

namespace nefep {

void Histogram::add(double w) {
    if (w < spec.lo || w >= spec.hi) {
        ++n_out_of_range;
        return;
    }
    int b = static_cast<int>((w - spec.lo) / spec.bin_width);
    if (b >= static_cast<int>(counts.size())) b = static_cast<int>(counts.size()) - 1;
    counts[b] += 1.0;
    ++n_in_range;
}

void Histogram::merge(const Histogram& other) {
    if (other.counts.size() != counts.size()) throw ConfigError("histogram merge: bin mismatch");
    for (std::size_t i = 0; i < counts.size(); ++i) counts[i] += other.counts[i];
    n_in_range += other.n_in_range;
    n_out_of_range += other.n_out_of_range;
}

std::vector<double> Histogram::densities() const {
    std::vector<double> d(counts.size(), 0.0);
    if (n_in_range == 0) return d;
    const double norm = static_cast<double>(n_in_range) * spec.bin_width;
    for (std::size_t i = 0; i < counts.size(); ++i) d[i] = counts[i] / norm;
    return d;
}

EstimatorReport jarzynski_estimate(std::span<const TrajectoryResult> samples, double beta,
                                   const HistogramSpec& hist) {
    EstimatorReport rep;
    rep.work_histogram = Histogram(hist);

    LogSumExp lse;        // exponents -beta W + logw
    LogSumExp lse_w;      // likelihood ratios alone, for the ESS
    LogSumExp lse_w2;
    KahanSum work_sum;
    std::size_t n = 0;
    for (const auto& s : samples) {
        if (s.diverged) {
            ++rep.n_diverged;
            continue;
        }
        if (!std::isfinite(s.log_weight) || !std::isfinite(s.work))
            throw NumericsError("jarzynski_estimate: non-finite sample fields");
        lse.add(-beta * s.work + s.log_weight);
        lse_w.add(s.log_weight);
        lse_w2.add(2.0 * s.log_weight);
        work_sum.add(s.work);
        rep.work_histogram.add(s.work);
        ++n;
    }
    if (n == 0) throw NumericsError("jarzynski_estimate: empty ensemble (all samples diverged)");

    const double log_I = lse.log_mean();
    rep.estimate_I = std::exp(log_I);
    rep.dF = -log_I / beta;  // matches -log(estimate_I)/beta exactly
    rep.n_effective = std::exp(2.0 * lse_w.log_sum() - lse_w2.log_sum());
    rep.mean_work = work_sum.value() / static_cast<double>(n);
    rep.per_run_I = {rep.estimate_I};
    rep.per_run_dF = {rep.dF};
    rep.n_samples = n;
    return rep;
}

EstimatorReport combine_runs(const std::vector<EstimatorReport>& runs, double beta) {
    if (runs.empty()) throw ConfigError("combine_runs: no runs");
    EstimatorReport rep;
    rep.work_histogram = runs.front().work_histogram;
    KahanSum work, ess;
    for (std::size_t r = 0; r < runs.size(); ++r) {
        const auto& run = runs[r];
        rep.per_run_I.insert(rep.per_run_I.end(), run.per_run_I.begin(), run.per_run_I.end());
        rep.per_run_dF.insert(rep.per_run_dF.end(), run.per_run_dF.begin(), run.per_run_dF.end());
        work.add(run.mean_work * static_cast<double>(run.n_samples));
        ess.add(run.n_effective);
        rep.n_samples += run.n_samples;
        rep.n_diverged += run.n_diverged;
        if (r > 0) rep.work_histogram.merge(run.work_histogram);
    }
    rep.estimate_I = mean_of(rep.per_run_I);
    rep.dF = -std::log(rep.estimate_I) / beta;
    rep.n_effective = ess.value();
    rep.mean_work = work.value() / static_cast<double>(rep.n_samples);
    rep.sd_I = sample_sd(rep.per_run_I);
    rep.sd_dF = sample_sd(rep.per_run_dF);
    return rep;
}

std::pair<double, Histogram> work_statistics(std::span<const TrajectoryResult> samples,
                                             const HistogramSpec& hist) {
    if (samples.empty()) throw ConfigError("work_statistics: no samples");
    Histogram h(hist);
    KahanSum sum;
    std::size_t n = 0;
    for (const auto& s : samples) {
        if (s.diverged) continue;
        h.add(s.work);
        sum.add(s.work);
        ++n;
    }
    if (n == 0) throw NumericsError("work_statistics: all samples diverged");
    return {sum.value() / static_cast<double>(n), h};
}

WorkCurve df_curve(std::span<const TrajectoryResult> samples, double beta,
                   const std::vector<double>& grid_times,
                   const std::vector<double>& grid_coordinates) {
    if (grid_times.size() != grid_coordinates.size())
        throw ConfigError("df_curve: grid size mismatch");
    const std::size_t g = grid_times.size();
    WorkCurve curve;
    curve.coordinate = grid_coordinates;
    curve.dF.assign(g, 0.0);
    curve.dF_sd.assign(g, std::numeric_limits<double>::quiet_NaN());
    curve.per_run_dF.assign(g, {});

    std::vector<LogSumExp> lse(g);
    std::size_t n = 0;
    for (const auto& s : samples) {
        if (s.diverged) continue;
        if (s.checkpoint_work.size() != g)
            throw ConfigError("df_curve: checkpoints were not recorded at the grid times");
        for (std::size_t k = 0; k < g; ++k)
            lse[k].add(-beta * s.checkpoint_work[k] + s.checkpoint_log_weight[k]);
        ++n;
    }
    if (n == 0) throw NumericsError("df_curve: empty ensemble (all samples diverged)");
    for (std::size_t k = 0; k < g; ++k) {
        // dF vanishes identically at the protocol start
        const double v = (grid_times[k] <= 1e-12) ? 0.0 : -lse[k].log_mean() / beta;
        curve.dF[k] = v;
        curve.per_run_dF[k] = {v};
    }
    return curve;
}

WorkCurve combine_curves(const std::vector<WorkCurve>& runs) {
    if (runs.empty()) throw ConfigError("combine_curves: no runs");
    WorkCurve out = runs.front();
    for (std::size_t r = 1; r < runs.size(); ++r) {
        if (runs[r].coordinate.size() != out.coordinate.size())
            throw ConfigError("combine_curves: grid mismatch");
        for (std::size_t k = 0; k < out.coordinate.size(); ++k)
            out.per_run_dF[k].insert(out.per_run_dF[k].end(), runs[r].per_run_dF[k].begin(),
                                     runs[r].per_run_dF[k].end());
    }
    for (std::size_t k = 0; k < out.coordinate.size(); ++k) {
        out.dF[k] = mean_of(out.per_run_dF[k]);
        out.dF_sd[k] = sample_sd(out.per_run_dF[k]);
    }
    return out;
}

double ti_estimate(const std::function<double(double)>& mean_force_at,
                   const std::vector<double>& s_grid) {
    if (s_grid.size() < 2) throw ConfigError("ti_estimate: need at least two grid points");
    KahanSum acc;
    double prev = mean_force_at(s_grid.front());
    for (std::size_t i = 1; i < s_grid.size(); ++i) {
        const double cur = mean_force_at(s_grid[i]);
        acc.add(0.5 * (prev + cur) * (s_grid[i] - s_grid[i - 1]));
        prev = cur;
    }
    return acc.value();
}

std::vector<double> uniform_grid(double lo, double hi, int n) {
    if (n < 2) throw ConfigError("uniform_grid: need n >= 2");
    std::vector<double> g(n);
    for (int i = 0; i < n; ++i) g[i] = lo + (hi - lo) * i / (n - 1);
    g.back() = hi;
    return g;
}

std::vector<CrooksBin> crooks_diagnostic(std::span<const TrajectoryResult> forward,
                                         std::span<const TrajectoryResult> reverse, double beta,
                                         double dF_ref, const HistogramSpec& bins) {
    if (forward.empty() || reverse.empty())
        throw ConfigError("crooks_diagnostic: both ensembles must be non-empty");
    const int nb = bins.n_bins();
    std::vector<CrooksBin> out(nb);
    // per-bin first and second moments of the two observables
    std::vector<KahanSum> num(nb), num2(nb), den(nb), den2(nb);
    std::size_t nf = 0, nr = 0;

    auto bin_of = [&bins, nb](double w) -> int {
        if (w < bins.lo || w >= bins.hi) return -1;
        const int b = static_cast<int>((w - bins.lo) / bins.bin_width);
        return b >= nb ? nb - 1 : b;
    };
    for (const auto& s : forward) {
        if (s.diverged) continue;
        ++nf;
        const int b = bin_of(s.work);
        if (b < 0) continue;
        const double v = std::exp(-beta * s.work + s.log_weight);
        num[b].add(v);
        num2[b].add(v * v);
        ++out[b].n_forward;
    }
    for (const auto& s : reverse) {
        if (s.diverged) continue;
        ++nr;
        const int b = bin_of(-s.work);
        if (b < 0) continue;
        const double v = std::exp(s.log_weight);
        den[b].add(v);
        den2[b].add(v * v);
        ++out[b].n_reverse;
    }
    if (nf == 0 || nr == 0) throw NumericsError("crooks_diagnostic: all samples diverged");

    const double expected = std::exp(-beta * dF_ref);
    for (int b = 0; b < nb; ++b) {
        auto& cb = out[b];
        cb.w_lo = bins.lo + b * bins.bin_width;
        cb.w_hi = cb.w_lo + bins.bin_width;
        cb.expected = expected;
        if (cb.n_forward == 0 || cb.n_reverse == 0) continue;  // flagged undefined
        const double mf = num[b].value() / static_cast<double>(nf);
        const double mr = den[b].value() / static_cast<double>(nr);
        if (mr <= 0.0 || mf <= 0.0) continue;
        cb.defined = true;
        cb.ratio = mf / mr;
        const double var_f =
            std::max(0.0, num2[b].value() / static_cast<double>(nf) - mf * mf) /
            static_cast<double>(nf);
        const double var_r =
            std::max(0.0, den2[b].value() / static_cast<double>(nr) - mr * mr) /
            static_cast<double>(nr);
        cb.se = cb.ratio * std::sqrt(var_f / (mf * mf) + var_r / (mr * mr));
        cb.deviation = cb.se > 0.0 ? (cb.ratio - expected) / cb.se
                                   : std::numeric_limits<double>::infinity();
    }
    return out;
}

}  // namespace nefep
