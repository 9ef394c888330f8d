#include "bsdelab/scenario_config.hpp"

#include <charconv>
#include <sstream>

#include "bsdelab/errors.hpp"
#include "bsdelab/hashing.hpp"
#include "bsdelab/io_util.hpp"

namespace bsdelab {

namespace {

std::string trim(std::string_view s) {
    const auto begin = s.find_first_not_of(" \t\r\n");
    if (begin == std::string_view::npos) return {};
    const auto end = s.find_last_not_of(" \t\r\n");
    return std::string(s.substr(begin, end - begin + 1));
}

double parse_double(const std::string& key, const std::string& value) {
    try {
        std::size_t pos = 0;
        const double v = std::stod(value, &pos);
        if (pos != value.size()) throw std::invalid_argument("trailing characters");
        return v;
    } catch (const std::exception&) {
        throw ConfigError("config: bad real for '" + key + "': " + value);
    }
}

long long parse_int(const std::string& key, const std::string& value) {
    try {
        std::size_t pos = 0;
        const long long v = std::stoll(value, &pos);
        if (pos != value.size()) throw std::invalid_argument("trailing characters");
        return v;
    } catch (const std::exception&) {
        throw ConfigError("config: bad integer for '" + key + "': " + value);
    }
}

std::vector<double> parse_real_list(const std::string& key, const std::string& value) {
    std::vector<double> out;
    std::string item;
    std::istringstream ss(value);
    while (std::getline(ss, item, ',')) {
        std::istringstream inner(item);
        std::string token;
        while (inner >> token) out.push_back(parse_double(key, token));
    }
    return out;
}

} // namespace

void ScenarioConfig::set(const std::string& key, const std::string& value) {
    if (key == "horizon") horizon = parse_double(key, value);
    else if (key == "n_steps") n_steps = static_cast<int>(parse_int(key, value));
    else if (key == "dim") dim = static_cast<int>(parse_int(key, value));
    else if (key == "n_paths") n_paths = static_cast<int>(parse_int(key, value));
    else if (key == "seed") seed = static_cast<std::uint64_t>(parse_int(key, value));
    else if (key == "shard_count") shard_count = static_cast<int>(parse_int(key, value));
    else if (key == "generator.name") generator.name = value;
    else if (key == "generator.beta") generator.beta = parse_double(key, value);
    else if (key == "generator.gamma") generator.gamma = parse_double(key, value);
    else if (key == "terminal.name") terminal.name = value;
    else if (key == "terminal.params") terminal.params = parse_real_list(key, value);
    else throw ConfigError("config: unknown key '" + key + "'");
}

ScenarioConfig ScenarioConfig::parse(const std::string& text) {
    ScenarioConfig config;
    std::istringstream stream(text);
    std::string line;
    int line_no = 0;
    while (std::getline(stream, line)) {
        ++line_no;
        const auto hash_pos = line.find('#');
        if (hash_pos != std::string::npos) line.erase(hash_pos);
        const std::string stripped = trim(line);
        if (stripped.empty()) continue;
        const auto eq = stripped.find('=');
        if (eq == std::string::npos)
            throw ConfigError("config line " + std::to_string(line_no) + ": expected key = value");
        const std::string key = trim(stripped.substr(0, eq));
        const std::string value = trim(stripped.substr(eq + 1));
        if (key.empty() || value.empty())
            throw ConfigError("config line " + std::to_string(line_no) + ": empty key or value");
        config.set(key, value);
    }
    return config;
}

void ScenarioConfig::validate() const {
    if (!(horizon > 0.0)) throw ConfigError("config: horizon must be > 0");
    if (n_steps < 1) throw ConfigError("config: n_steps must be >= 1");
    if (dim < 1) throw ConfigError("config: dim must be >= 1");
    if (n_paths < 1) throw ConfigError("config: n_paths must be >= 1");
    if (shard_count < 1) throw ConfigError("config: shard_count must be >= 1");
    if (!(generator.gamma > 0.0)) throw ConfigError("config: generator.gamma must be > 0");
    if (!(generator.beta >= 0.0)) throw ConfigError("config: generator.beta must be >= 0");
}

std::string ScenarioConfig::canonical_text() const {
    std::string out;
    out += "dim = " + std::to_string(dim) + "\n";
    out += "generator.beta = " + format_double(generator.beta) + "\n";
    out += "generator.gamma = " + format_double(generator.gamma) + "\n";
    out += "generator.name = " + generator.name + "\n";
    out += "horizon = " + format_double(horizon) + "\n";
    out += "n_paths = " + std::to_string(n_paths) + "\n";
    out += "n_steps = " + std::to_string(n_steps) + "\n";
    out += "seed = " + std::to_string(seed) + "\n";
    out += "shard_count = " + std::to_string(shard_count) + "\n";
    out += "terminal.name = " + terminal.name + "\n";
    out += "terminal.params =";
    for (const double p : terminal.params) out += " " + format_double(p);
    out += "\n";
    return out;
}

std::string ScenarioConfig::hash_hex() const { return to_hex(fnv1a64(canonical_text())); }

Scenario build_scenario(const ScenarioConfig& config) {
    config.validate();
    Scenario scenario;
    scenario.config = config;
    scenario.grid = TimeGrid::uniform(config.horizon, config.n_steps);
    scenario.generator =
        builtin_generator(config.generator.name, config.generator.beta, config.generator.gamma);
    scenario.terminal = builtin_terminal(config.terminal.name, config.terminal.params, scenario.grid);
    scenario.params = CriticalParams{.gamma = config.generator.gamma,
                                     .beta = config.generator.beta,
                                     .horizon = config.horizon};
    scenario.ensemble =
        simulate_brownian(scenario.grid, config.dim, config.n_paths, config.seed, config.shard_count);
    scenario.xi = eval_terminal(scenario.terminal, *scenario.ensemble);
    return scenario;
}

} // namespace bsdelab
