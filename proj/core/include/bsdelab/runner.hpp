#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace bsdelab {

/// One CLI invocation. Commands: verify-functions, solve, estimate,
/// uniqueness, report. Exit contract: 0 all checks pass, 1 any check fails
/// or a run aborts, 2 config error.
struct RunConfig {
    std::string command;
    std::optional<std::string> config_path;
    std::vector<std::pair<std::string, std::string>> overrides;
    std::filesystem::path output_dir = "out";
    std::optional<std::uint64_t> seed;
    bool check_only = false;        // verify the manifest of a previous run
    bool negative_controls = false; // inject faulty variants that must FAIL
};

int run_command(const RunConfig& config);

/// Recompute artifact hashes in dir and compare with its manifest.
/// Returns 0 on byte-identical artifacts, 1 otherwise.
int verify_manifest(const std::filesystem::path& dir);

} // namespace bsdelab
