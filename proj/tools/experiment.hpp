#pragma once

#include "nefep/common.hpp"

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace nefep::tools {

struct ExperimentConfig {
    std::string example = "ex1";   // ex1 | ex2
    std::string method = "stdmc";  // stdmc | is-ce | is-optimal | ti | crooks
    double beta = 5.0;
    std::size_t n_traj = 500000;
    double dt = 0.0;  // 0: per-example default (5e-4 ex1, 1e-4 ex2)
    int n_runs = 10;
    std::uint64_t seed = 1;
    double tau = 1.0;     // ex2 time-scale factor
    double kappa = 0.3;   // ex2 potential parameter
    std::string ansatz = "none";  // linear | gaussian | none
    std::string initial = "mu0";  // mu0 | mubar0 | mu0star
    std::string output_dir = "out";
    std::size_t n_pilot = 100000;  // ce pipeline pilot size per round
    int threads = 0;               // 0: NEFEP_THREADS or hardware
    int curve_points = 51;
    double hist_lo = -5.0, hist_hi = 5.0, hist_bin = 0.05;
    int ti_grid = 0;        // 0: 100 (ex1) / 50 (ex2)
    std::size_t ti_samples = 200000;  // per grid point, ex2 mean-force time average steps

    double effective_dt() const { return dt > 0.0 ? dt : (example == "ex2" ? 1e-4 : 5e-4); }
    void validate() const;
};

// flat key=value configuration; '#' starts a comment
ExperimentConfig parse_config(const std::map<std::string, std::string>& kv);
std::map<std::string, std::string> read_config_file(const std::filesystem::path& path);
void apply_override(std::map<std::string, std::string>& kv, const std::string& assignment);
std::map<std::string, std::string> echo_config(const ExperimentConfig& cfg);

// Written artifact set of one invocation; files already created are removed
// when a later stage fails so no partial set survives.
struct ArtifactSet {
    std::filesystem::path dir;
    std::vector<std::string> files;
};

ArtifactSet run_experiment(const ExperimentConfig& cfg);
ArtifactSet run_pipeline_ce(const ExperimentConfig& cfg);
ArtifactSet run_reference(const ExperimentConfig& cfg);

}  // namespace nefep::tools
