#include "nefep/sde.hpp"

#include <atomic>
#include <cmath>
#include <cstdlib>
#include <mutex>
#include <string>
#include <thread>

namespace nefep {

void IntegratorConfig::validate() const {
    if (!(dt > 0.0)) throw ConfigError("integrator: dt must be positive");
    if (n_steps < 1) throw ConfigError("integrator: n_steps must be >= 1");
    if (!(horizon_T > 0.0)) throw ConfigError("integrator: horizon must be positive");
    // steps must tile [0, T]: the last step may be short but never negative
    if (static_cast<double>(n_steps - 1) * dt >= horizon_T + 1e-12)
        throw ConfigError("integrator: n_steps * dt overshoots the horizon");
    if (static_cast<double>(n_steps) * dt < horizon_T - 1e-9 * horizon_T)
        throw ConfigError("integrator: n_steps * dt does not reach the horizon");
}

IntegratorConfig make_config(double dt, double T, std::uint64_t seed) {
    if (!(dt > 0.0) || !(T > 0.0)) throw ConfigError("make_config: dt and T must be positive");
    IntegratorConfig cfg;
    cfg.dt = dt;
    cfg.horizon_T = T;
    cfg.seed = seed;
    const double ratio = T / dt;
    const long rounded = std::lround(ratio);
    if (rounded >= 1 && std::abs(static_cast<double>(rounded) * dt - T) <= 1e-12 * std::max(1.0, T)) {
        cfg.n_steps = rounded;  // exact tiling: n_steps * dt == T
    } else {
        cfg.n_steps = static_cast<long>(std::ceil(ratio - 1e-12));  // short final step
    }
    cfg.validate();
    return cfg;
}

int resolve_threads(int requested) {
    if (requested > 0) return requested;
    if (const char* env = std::getenv("NEFEP_THREADS")) {
        const int n = std::atoi(env);
        if (n > 0) return n;
    }
    const unsigned hw = std::thread::hardware_concurrency();
    return hw == 0 ? 1 : static_cast<int>(hw);
}

namespace detail {

void parallel_blocks(std::size_t n_blocks, int threads,
                     const std::function<void(std::size_t)>& block_fn) {
    const int n_threads = std::min<int>(threads, static_cast<int>(n_blocks));
    if (n_threads <= 1) {
        for (std::size_t b = 0; b < n_blocks; ++b) block_fn(b);
        return;
    }
    std::atomic<std::size_t> next{0};
    auto worker = [&]() {
        for (;;) {
            const std::size_t b = next.fetch_add(1);
            if (b >= n_blocks) break;
            block_fn(b);
        }
    };
    std::vector<std::thread> pool;
    pool.reserve(n_threads);
    for (int t = 0; t < n_threads; ++t) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
}

}  // namespace detail

Ensemble run_ensemble(std::size_t n_traj, std::uint64_t seed, std::uint64_t run_index,
                      const TrajectoryFn& make_trajectory, const EnsembleOptions& opts) {
    if (n_traj == 0) throw ConfigError("run_ensemble: empty ensemble");
    Ensemble out;
    out.results.resize(n_traj);

    const std::size_t block = detail::kEnsembleBlock;
    const std::size_t n_blocks = (n_traj + block - 1) / block;
    std::atomic<std::size_t> diverged{0};
    std::string first_error;
    std::mutex err_mutex;

    detail::parallel_blocks(n_blocks, resolve_threads(opts.threads), [&](std::size_t b) {
        std::size_t local_diverged = 0;
        const std::size_t lo = b * block;
        const std::size_t hi = std::min(lo + block, n_traj);
        for (std::size_t i = lo; i < hi; ++i) {
            NoiseStream ns(seed, run_index, i);
            try {
                out.results[i] = make_trajectory(ns, i);
            } catch (const std::exception& e) {
                out.results[i].diverged = true;
                std::lock_guard<std::mutex> lock(err_mutex);
                if (first_error.empty()) first_error = e.what();
            }
            if (out.results[i].diverged) ++local_diverged;
        }
        diverged.fetch_add(local_diverged);
    });

    out.n_diverged = diverged.load();
    if (opts.allow_divergence_failure &&
        static_cast<double>(out.n_diverged) > opts.max_diverged_frac * static_cast<double>(n_traj))
        throw NumericsError("run_ensemble: " + std::to_string(out.n_diverged) + "/" +
                            std::to_string(n_traj) + " trajectories diverged" +
                            (first_error.empty() ? "" : " (first error: " + first_error + ")"));
    return out;
}

}  // namespace nefep
