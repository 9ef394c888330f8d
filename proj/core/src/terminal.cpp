#include "bsdelab/terminal.hpp"

#include <cmath>
#include <stdexcept>

#include "bsdelab/errors.hpp"
#include "bsdelab/io_util.hpp"

namespace bsdelab {

std::string IntegrabilityTag::to_string() const {
    switch (kind) {
        case Kind::Bounded: return "bounded";
        case Kind::Lp: return "Lp(" + format_double(param) + ")";
        case Kind::Critical: return "critical(" + format_double(param) + ")";
    }
    return "?";
}

TerminalSpec constant_terminal(double c) {
    return {.name = "constant",
            .evaluate = [c](std::span<const double>) { return c; },
            .integrability = {IntegrabilityTag::Kind::Bounded, std::fabs(c)},
            .expected_mean = c};
}

TerminalSpec brownian_terminal() {
    return {.name = "brownian",
            .evaluate = [](std::span<const double> b) { return b.empty() ? 0.0 : b[0]; },
            .integrability = {IntegrabilityTag::Kind::Lp, 2.0},
            .expected_mean = 0.0};
}

TerminalSpec critical_terminal_family(double epsilon, const TimeGrid& grid) {
    if (!(epsilon > 0.0))
        throw std::domain_error("critical_terminal_family: epsilon must be > 0 "
                                "(psi-integrability fails at eps <= 0)");
    const double horizon = grid.horizon();
    const double denom = 2.0 * horizon * (1.0 + epsilon);
    return {.name = "critical",
            .evaluate =
                [denom](std::span<const double> b) {
                    const double x = b.empty() ? 0.0 : b[0];
                    return std::exp(x * x / denom);
                },
            .integrability = {IntegrabilityTag::Kind::Critical, epsilon},
            .expected_mean = std::sqrt((1.0 + epsilon) / epsilon)};
}

TerminalSpec builtin_terminal(const std::string& name, std::span<const double> params,
                              const TimeGrid& grid) {
    if (name == "constant") {
        if (params.size() != 1) throw ConfigError("terminal constant expects one parameter c");
        return constant_terminal(params[0]);
    }
    if (name == "brownian") {
        if (!params.empty()) throw ConfigError("terminal brownian takes no parameters");
        return brownian_terminal();
    }
    if (name == "critical") {
        if (params.size() != 1)
            throw ConfigError("terminal critical expects one parameter epsilon");
        return critical_terminal_family(params[0], grid);
    }
    throw ConfigError("unknown terminal: " + name);
}

std::vector<double> eval_terminal(const TerminalSpec& spec, const PathEnsemble& ensemble) {
    const int n = ensemble.grid().n_steps();
    std::vector<double> out(static_cast<std::size_t>(ensemble.n_paths()));
    for (int i = 0; i < ensemble.n_paths(); ++i) {
        const double value = spec.evaluate(ensemble.state_vector(i, n));
        if (!std::isfinite(value)) {
            throw SolverError("terminal '" + spec.name + "' produced a non-finite value at path " +
                              std::to_string(i));
        }
        out[static_cast<std::size_t>(i)] = value;
    }
    return out;
}

} // namespace bsdelab
