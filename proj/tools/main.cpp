#include "experiment.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <map>
#include <string>
#include <vector>

namespace {

// exit codes: 0 success, 2 config error, 3 numerical failure, 4 I/O error
constexpr int kOk = 0;
constexpr int kConfigError = 2;
constexpr int kNumericalError = 3;
constexpr int kIoError = 4;

struct CommonArgs {
    std::string config_file;
    std::vector<std::string> overrides;
    std::string output_dir;
};

void add_common(CLI::App* cmd, CommonArgs& args) {
    cmd->add_option("-c,--config", args.config_file, "flat key=value configuration file");
    cmd->add_option("-s,--set", args.overrides, "override a key, e.g. --set n_traj=1e5")
        ->take_all();
    cmd->add_option("-o,--output", args.output_dir, "output directory (overrides output_dir)");
}

nefep::tools::ExperimentConfig build_config(const CommonArgs& args) {
    std::map<std::string, std::string> kv;
    if (!args.config_file.empty()) kv = nefep::tools::read_config_file(args.config_file);
    for (const auto& a : args.overrides) nefep::tools::apply_override(kv, a);
    if (!args.output_dir.empty()) kv["output_dir"] = args.output_dir;
    return nefep::tools::parse_config(kv);
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"nefep: nonequilibrium free-energy estimation experiments"};
    app.require_subcommand(1);

    CommonArgs run_args, ce_args, ref_args;
    auto* run_cmd =
        app.add_subcommand("run", "simulate an estimator ensemble and write its artifact set");
    add_common(run_cmd, run_args);
    auto* ce_cmd = app.add_subcommand(
        "ce", "cross-entropy pilot, coefficient solve, then a production importance-sampling run");
    add_common(ce_cmd, ce_args);
    auto* ref_cmd = app.add_subcommand(
        "reference", "quadrature oracle curves and the grid-solver reference artifacts");
    add_common(ref_cmd, ref_args);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? kOk : kConfigError;
    }

    try {
        nefep::tools::ArtifactSet artifacts;
        if (run_cmd->parsed()) {
            artifacts = nefep::tools::run_experiment(build_config(run_args));
        } else if (ce_cmd->parsed()) {
            artifacts = nefep::tools::run_pipeline_ce(build_config(ce_args));
        } else {
            artifacts = nefep::tools::run_reference(build_config(ref_args));
        }
        for (const auto& f : artifacts.files)
            std::printf("wrote %s\n", (artifacts.dir / f).c_str());
        return kOk;
    } catch (const nefep::ConfigError& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return kConfigError;
    } catch (const nefep::IoError& e) {
        std::fprintf(stderr, "io error: %s\n", e.what());
        return kIoError;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "numerical failure: %s\n", e.what());
        return kNumericalError;
    }
}
