#include <cstdlib>
#include <iostream>

#include <CLI11.hpp>

#include "slfv/config.hpp"
#include "slfv/experiments.hpp"
#include "slfv/io.hpp"

namespace {

std::filesystem::path default_out_dir(const std::string& flag_value) {
    if (!flag_value.empty()) return flag_value;
    if (const char* env = std::getenv("SLFV_OUT_DIR")) return env;
    return ".";
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Event-driven SLFV simulator and limiting-equation solvers"};
    app.require_subcommand(1);

    std::string config_path, out_flag, log_path;
    std::uint64_t seed = 0;
    bool seed_set = false;
    int threads = 1;

    auto* run = app.add_subcommand("run", "Run an experiment described by a config file");
    run->add_option("config", config_path, "Config file")->required();
    run->add_option("--seed", seed, "Seed override (required for stochastic kinds)")
        ->each([&](const std::string&) { seed_set = true; });
    run->add_option("--out", out_flag, "Output directory (default: SLFV_OUT_DIR or .)");
    run->add_option("--threads", threads, "Worker threads for replicate ensembles");

    auto* replay = app.add_subcommand("replay", "Re-apply a recorded event log");
    replay->add_option("log", log_path, "Event log file")->required();
    replay->add_option("--out", out_flag, "Output directory");

    auto* check = app.add_subcommand("check", "Validate a config file and exit");
    check->add_option("config", config_path, "Config file")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (run->parsed()) {
            slfv::ExperimentConfig cfg = slfv::parse_config(slfv::read_text_file(config_path));
            slfv::RunOptions opts;
            opts.out_dir = default_out_dir(out_flag);
            opts.threads = threads;
            if (seed_set) opts.seed = seed;
            slfv::RunManifest manifest = slfv::run_experiment(cfg, opts);
            std::cout << "run complete: " << manifest.kind << " (seed " << manifest.seed << ", "
                      << manifest.artifacts.size() << " artifacts, "
                      << manifest.wall_seconds << " s)\n";
            for (const auto& w : manifest.warnings) std::cout << "warning: " << w << "\n";
        } else if (replay->parsed()) {
            auto out = slfv::replay_run(log_path, default_out_dir(out_flag));
            std::cout << "replayed final field written to " << out.string() << "\n";
        } else if (check->parsed()) {
            slfv::parse_config(slfv::read_text_file(config_path));
            std::cout << "config ok\n";
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
