#pragma once

// Orchestration behind the command-line subcommands. Relative paths inside a
// config resolve against `base_dir` (the config file's directory).

#include <filesystem>
#include <vector>

#include "whmc/io.hpp"

namespace whmc::experiment {

using io::json;
namespace fs = std::filesystem;

// Writes every instance listed in the spec; refuses to overwrite unless force.
json cmd_generate(const json& spec, const fs::path& base_dir, bool force);

// Runs the configured sampler for n_chains chains. A run manifest is itself a
// valid input and replays each chain for its recorded iteration count.
json cmd_run(const json& config, const fs::path& base_dir, bool force);

// Offline mode search against an instance and an optional library.
json cmd_modesearch(const json& config, const fs::path& base_dir, bool force);

// REM curves for trace CSVs against a reference (reference JSON or a gmm
// instance, whose exact mean is used).
json cmd_rem(const std::vector<fs::path>& traces, const fs::path& reference, double threshold,
             const fs::path& output_csv, bool force);

// Reference mean from a reference JSON or a gmm instance JSON.
Vector load_reference(const fs::path& path);

}  // namespace whmc::experiment
