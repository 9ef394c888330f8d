#pragma once

#include <span>
#include <vector>

#include "bsdelab/generators.hpp"
#include "bsdelab/regression.hpp"
#include "bsdelab/report.hpp"
#include "bsdelab/solver.hpp"
#include "bsdelab/special_functions.hpp"
#include "bsdelab/terminal.hpp"

namespace bsdelab {

/// Bounded coefficients (u, v) of the linearized difference equation
/// g(t,Y1,Z1) - g(t,Y2,Z2) = u dY + v . dZ, with |u| <= beta, |v| <= gamma
/// for Lipschitz generators. Difference quotients below the relative guard
/// eta = 1e-12 (1 + |.|) are set to 0.
struct LinearizedCoeffs {
    std::vector<double> u; // M x N
    std::vector<double> v; // M x N x d
    double max_residual = 0.0;

    double u_at(int i, int k, int n_steps) const {
        return u[static_cast<std::size_t>(i) * static_cast<std::size_t>(n_steps) +
                 static_cast<std::size_t>(k)];
    }
    double v_at(int i, int k, int c, int n_steps, int dim) const {
        return v[(static_cast<std::size_t>(i) * static_cast<std::size_t>(n_steps) +
                  static_cast<std::size_t>(k)) *
                     static_cast<std::size_t>(dim) +
                 static_cast<std::size_t>(c)];
    }
};

LinearizedCoeffs linearize(const GeneratorSpec& gen, const SolutionField& field1,
                           const SolutionField& field2);

struct Interval {
    double left = 0.0;
    double right = 0.0;
};

/// Geometric partition right_0 = T, left_k = (3/4)^{k+1} T, generated while
/// left >= cutoff; the tail [0, left_last] is handled by the continuity
/// extension. Adjacent intervals share endpoints bit-exactly.
struct SubintervalCascade {
    std::vector<Interval> intervals;
    int depth = 0;
    double cutoff = 0.0;
};

SubintervalCascade subinterval_cascade(double horizon, double cutoff);

/// Monte Carlo check of E[exp(lambda |int_t^T q dB|^2)] against the analytic
/// bound for |q| <= gamma. q is an M x N x d process sampled on the grid
/// (entries before t_index are ignored). Warns when the estimator's relative
/// standard error exceeds 50% (heavy tail).
VerificationReport girsanov_moment_check(std::span<const double> q, const PathEnsemble& ensemble,
                                         int t_index, double lambda,
                                         const CriticalParams& params);

/// Convenience overload for a constant scalar q across components.
VerificationReport girsanov_moment_check_constant(double q_value, const PathEnsemble& ensemble,
                                                  int t_index, double lambda,
                                                  const CriticalParams& params);

/// Localized majorant audit on one interval [left, right] (right acts as the
/// local horizon): builds hitting times sigma_n of |dY| + int |dZ|^2 at a
/// ladder of levels, evaluates the exponential majorant of |dY_t| and its
/// split into the square-exponential and psi pieces, and reports whether the
/// majorant decays along the ladder. The interval must satisfy
/// left >= 3 (right - left), otherwise the square-exponential moment bound
/// does not apply (config error).
VerificationReport delta_bound_audit(const LinearizedCoeffs& coeffs, const SolutionField& field1,
                                     const SolutionField& field2, Interval interval,
                                     const CriticalParams& params, double n_level);

enum class SolveMethod { BackwardEuler, Picard };

struct SolverRoute {
    SolveMethod method = SolveMethod::BackwardEuler;
    RegressionConfig reg;
    int max_iter = 64;
    double tol = 1e-10;
};

SolutionField solve_route(const GeneratorSpec& gen, std::span<const double> xi,
                          EnsemblePtr ensemble, const SolverRoute& route);

/// Max over grid times inside each cascade interval of mean |Y^a - Y^b|.
std::vector<double> discrepancy_by_interval(const SolutionField& a, const SolutionField& b,
                                            const SubintervalCascade& cascade);

/// Solves the same scenario along two distinct numerical routes and checks
/// the per-interval discrepancy against tolerance across the cascade; the
/// [0, cutoff] tail is bounded through the drift-Lipschitz extension from
/// the smallest resolved time.
VerificationReport uniqueness_experiment(const GeneratorSpec& gen, const TerminalSpec& terminal,
                                         EnsemblePtr ensemble, const SolverRoute& route_a,
                                         const SolverRoute& route_b, double cutoff,
                                         double tolerance);

} // namespace bsdelab
