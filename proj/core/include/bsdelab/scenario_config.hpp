#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "bsdelab/generators.hpp"
#include "bsdelab/path_ensemble.hpp"
#include "bsdelab/special_functions.hpp"
#include "bsdelab/terminal.hpp"

namespace bsdelab {

/// Scenario file schema ("key = value" lines, '#' comments, dotted keys for
/// the generator/terminal sections; unknown keys are rejected):
///
///   horizon      = 1.0
///   n_steps      = 50
///   dim          = 1
///   n_paths      = 100000
///   seed         = 42
///   shard_count  = 16
///   generator.name  = abs_z
///   generator.beta  = 0.0
///   generator.gamma = 0.5
///   terminal.name   = critical
///   terminal.params = 1.0          # space/comma separated reals
struct ScenarioConfig {
    double horizon = 1.0;
    int n_steps = 50;
    int dim = 1;
    int n_paths = 10000;
    std::uint64_t seed = 1;
    int shard_count = 1;

    struct Generator {
        std::string name = "zero";
        double beta = 0.5;
        double gamma = 0.5;
    } generator;

    struct Terminal {
        std::string name = "brownian";
        std::vector<double> params;
    } terminal;

    static ScenarioConfig parse(const std::string& text);
    void set(const std::string& key, const std::string& value); // one override
    void validate() const;

    /// Deterministic serialization; basis of the config hash.
    std::string canonical_text() const;
    std::string hash_hex() const;
};

/// Materialized scenario: grid, paths, generator, terminal samples.
struct Scenario {
    ScenarioConfig config;
    TimeGrid grid;
    EnsemblePtr ensemble;
    GeneratorSpec generator;
    TerminalSpec terminal;
    CriticalParams params;
    std::vector<double> xi;
};

Scenario build_scenario(const ScenarioConfig& config);

} // namespace bsdelab
