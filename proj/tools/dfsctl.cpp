// dfsctl: run dark-state preparation experiments from JSON configs.
//
//   dfsctl simulate --config run.json [--output-dir out] [--jobs 4] [--dt 1e-4]
//   dfsctl adiabaticity-scan --config scan.json
//   dfsctl bloch-map --config map.json
//   dfsctl optimize-q --config scan.json --jobs 4
//   dfsctl reproduce-figure 8 --jobs 4
//
// Exit codes: 0 ok, 2 invalid config, 3 integration failure, 4 unknown figure.

#include <cstdlib>
#include <exception>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "dfs/experiments.hpp"

namespace ex = dfs::experiments;

namespace {

constexpr const char* kOutputDirEnv = "DFS_OUTPUT_DIR";

std::string default_output_dir() {
    const char* env = std::getenv(kOutputDirEnv);
    return env && *env ? env : "dfs-output";
}

int code(ex::ExitCode c) { return static_cast<int>(c); }

void print_outcomes(const std::vector<ex::RunOutcome>& outcomes) {
    for (const auto& o : outcomes) {
        std::cout << o.run;
        for (const char* key : {"final_fidelity", "final_purity", "q_best_over_N", "best_final_fidelity", "max_xi",
                                "max_overlap"})
            if (o.summary.contains(key)) std::cout << ' ' << key << '=' << o.summary[key].dump();
        std::cout << '\n';
    }
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Dark-state preparation experiments in the collective Dicke manifold"};
    app.require_subcommand(1);

    std::string config_path;
    std::string output_dir = default_output_dir();
    unsigned jobs = 1;
    std::optional<double> dt;
    int figure = 0;

    auto add_common = [&](CLI::App* sub, bool needs_config) {
        if (needs_config) sub->add_option("--config", config_path, "JSON run config")->required()->check(CLI::ExistingFile);
        sub->add_option("--output-dir", output_dir,
                        std::string("Output directory (default: $") + kOutputDirEnv + " or ./dfs-output)");
        sub->add_option("--jobs", jobs, "Concurrent trajectories")->check(CLI::PositiveNumber);
        sub->add_option("--dt", dt, "Override the integrator step (units of 1/Gc)");
    };

    auto* simulate = app.add_subcommand("simulate", "Integrate trajectories and write fidelity/purity CSVs");
    auto* scan = app.add_subcommand("adiabaticity-scan", "Tabulate xi_k over a grid of mu");
    auto* bloch = app.add_subcommand("bloch-map", "Coherent-state overlap map of a dark state");
    auto* optimize = app.add_subcommand("optimize-q", "Scan the quench strength q for the best final fidelity");
    auto* reproduce = app.add_subcommand("reproduce-figure", "Regenerate a figure's full dataset");
    for (auto* sub : {simulate, scan, bloch, optimize}) add_common(sub, true);
    add_common(reproduce, false);
    reproduce->add_option("figure", figure, "Figure id (3-8)")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : code(ex::ExitCode::ConfigInvalid);
    }

    ex::Context ctx;
    ctx.output_dir = output_dir;
    ctx.jobs = jobs;
    ctx.dt_override = dt;

    try {
        std::vector<ex::RunOutcome> outcomes;
        if (reproduce->parsed()) {
            outcomes = ex::cmd_reproduce_figure(figure, ctx);
        } else {
            const auto config = ex::load_config_file(config_path);
            if (simulate->parsed()) outcomes = ex::cmd_simulate(config, ctx);
            else if (scan->parsed()) outcomes = ex::cmd_adiabaticity_scan(config, ctx);
            else if (bloch->parsed()) outcomes = ex::cmd_bloch_map(config, ctx);
            else outcomes = ex::cmd_optimize_q(config, ctx);
        }
        print_outcomes(outcomes);
        return code(ex::ExitCode::Ok);
    } catch (const ex::UnknownFigure& e) {
        std::cerr << "error: " << e.what() << '\n';
        return code(ex::ExitCode::UnknownFigure);
    } catch (const ex::ConfigError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return code(ex::ExitCode::ConfigInvalid);
    } catch (const dfs::IntegrationDiverged& e) {
        std::cerr << "error: integration failed: " << e.what() << '\n';
        return code(ex::ExitCode::IntegrationFailure);
    } catch (const std::filesystem::filesystem_error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return code(ex::ExitCode::Failure);
    } catch (const std::invalid_argument& e) {
        // Preconditions of the numerical routines that the config parser does not pre-check.
        std::cerr << "error: " << e.what() << '\n';
        return code(ex::ExitCode::ConfigInvalid);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return code(ex::ExitCode::IntegrationFailure);
    }
}
