#pragma once

#include <stdexcept>
#include <string>

namespace bsdelab {

/// Invalid configuration input (bad file, unknown key, out-of-range value).
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Failure inside a backward solve; carries the offending step when known.
class SolverError : public std::runtime_error {
public:
    explicit SolverError(const std::string& msg, int step = -1)
        : std::runtime_error(step >= 0 ? msg + " (step " + std::to_string(step) + ")" : msg),
          step_(step) {}

    int step() const noexcept { return step_; }

private:
    int step_;
};

/// Requested allocation exceeds the configured in-memory budget.
class ResourceError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

} // namespace bsdelab
