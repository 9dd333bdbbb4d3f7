#pragma once

#include <filesystem>
#include <optional>

#include "slfv/config.hpp"
#include "slfv/io.hpp"

namespace slfv {

inline constexpr const char* kCodeVersion = "slfv 0.1.0";

struct RunOptions {
    std::filesystem::path out_dir = ".";
    std::optional<std::uint64_t> seed;  // overrides the config seed
    int threads = 1;
};

// Dispatches the experiment, writes its artifacts (CSV tables, field
// snapshots, plot series) under out_dir and returns the finalized manifest.
// Identical config + seed produce bitwise-identical artifacts.
RunManifest run_experiment(const ExperimentConfig& cfg, const RunOptions& opts);

// Rebuilds a run from an event log (the config text is embedded in the log)
// and writes the replayed final field. Returns the snapshot path.
std::filesystem::path replay_run(const std::filesystem::path& log_path,
                                 const std::filesystem::path& out_dir);

}  // namespace slfv
