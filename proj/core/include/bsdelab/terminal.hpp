#pragma once

#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "bsdelab/path_ensemble.hpp"

namespace bsdelab {

/// Integrability class a terminal family claims.
struct IntegrabilityTag {
    enum class Kind { Bounded, Lp, Critical } kind = Kind::Bounded;
    double param = 0.0; // p for Lp, epsilon for Critical

    std::string to_string() const;
};

/// Terminal value xi as a function of the terminal Brownian state.
struct TerminalSpec {
    std::string name;
    std::function<double(std::span<const double> terminal_state)> evaluate;
    IntegrabilityTag integrability;
    /// Closed-form E[xi] when known (set by the critical family).
    std::optional<double> expected_mean;
};

/// xi = c (bounded).
TerminalSpec constant_terminal(double c);

/// xi = first component of B_T (in L^p for every p).
TerminalSpec brownian_terminal();

/// Critical-regime family xi_eps = exp(B_T(1)^2 / (2 T (1+eps))):
/// psi(xi_eps, mu) is integrable for every mu >= 0 while xi_eps is in L^p
/// only for p < 1+eps. Also carries E[xi_eps] = sqrt((1+eps)/eps).
/// Throws std::domain_error for eps <= 0.
TerminalSpec critical_terminal_family(double epsilon, const TimeGrid& grid);

/// Lookup used by scenario configs: constant(c), brownian, critical(eps).
TerminalSpec builtin_terminal(const std::string& name, std::span<const double> params,
                              const TimeGrid& grid);

/// xi per path; throws SolverError naming the first offending path if a
/// value comes out non-finite.
std::vector<double> eval_terminal(const TerminalSpec& spec, const PathEnsemble& ensemble);

} // namespace bsdelab
