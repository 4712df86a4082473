#include "techdiff/errors.hpp"
#include "techdiff/pipeline.hpp"

#include <CLI11.hpp>

#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

namespace fs = std::filesystem;
using namespace techdiff;

namespace {

struct Options {
    std::string config;
    std::string out;
    std::string data;
    std::optional<std::uint64_t> seed;
    std::optional<double> epsilon;
    std::optional<int> bootstrap_reps;
    std::optional<std::size_t> dense_cap;
};

void add_common(CLI::App* cmd, Options& o, bool takes_data) {
    cmd->add_option("--config", o.config, "JSON run config (a config_echo.json works)")->check(CLI::ExistingFile);
    cmd->add_option("--out", o.out, "output directory")->required();
    cmd->add_option("--seed", o.seed, "root seed for generation and bootstrap");
    cmd->add_option("--epsilon", o.epsilon, "spillover boundary threshold and mixing-time accuracy");
    cmd->add_option("--bootstrap-reps", o.bootstrap_reps, "bootstrap replicates");
    cmd->add_option("--dense-cap", o.dense_cap, "largest network solved densely when Lanczos fails");
    if (takes_data)
        cmd->add_option("--data", o.data, "dataset directory; generated from the config when omitted")
            ->check(CLI::ExistingDirectory);
}

RunConfig resolve(const Options& o) {
    RunConfig cfg = o.config.empty() ? RunConfig{} : load_run_config(o.config);
    if (o.seed)
        cfg.seed = *o.seed;
    if (o.epsilon)
        cfg.epsilon = *o.epsilon;
    if (o.bootstrap_reps)
        cfg.bootstrap.replicates = *o.bootstrap_reps;
    if (o.dense_cap)
        cfg.spectral.dense_cap = *o.dense_cap;
    cfg.resolve();
    return cfg;
}

std::optional<fs::path> data_dir(const Options& o) {
    if (o.data.empty())
        return std::nullopt;
    return fs::path(o.data);
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Spatial and network technology diffusion: simulation and estimation"};
    app.require_subcommand(1);
    Options o;
    auto* simulate = app.add_subcommand("simulate", "generate a synthetic dataset");
    add_common(simulate, o, false);
    auto* replicate = app.add_subcommand("replicate", "run every estimation stage and write the report bundle");
    add_common(replicate, o, true);
    auto* spectral = app.add_subcommand("spectral", "lambda2 series and mixing times");
    add_common(spectral, o, true);
    auto* decay = app.add_subcommand("fit-decay", "distance-decay fits");
    add_common(decay, o, true);
    auto* event = app.add_subcommand("event-study", "difference-in-differences, pre-trends, placebos");
    add_common(event, o, true);

    CLI11_PARSE(app, argc, argv);

    try {
        const RunConfig cfg = resolve(o);
        const fs::path out(o.out);
        if (simulate->parsed())
            cmd_simulate(cfg, out);
        else if (replicate->parsed())
            cmd_replicate(cfg, data_dir(o), out);
        else if (spectral->parsed())
            cmd_spectral(cfg, data_dir(o), out);
        else if (decay->parsed())
            cmd_fit_decay(cfg, data_dir(o), out);
        else if (event->parsed())
            cmd_event_study(cfg, data_dir(o), out);
    } catch (const InferenceError& e) {
        std::cerr << "error: " << e.what() << '\n';
        for (const auto& line : e.failure_log)
            std::cerr << "  " << line << '\n';
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
