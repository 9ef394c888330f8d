#pragma once

#include <cstddef>

namespace bsdelab {

/// Structural constants of the problem: gamma (z-growth/Lipschitz constant),
/// beta (y constant) and the horizon T. gamma == 0 is admitted so the
/// analytic edge cases of the constants K and C can be evaluated; the
/// phi-family operations require gamma > 0 and scenario validation enforces
/// gamma > 0 for generators.
struct CriticalParams {
    double gamma = 1.0;
    double beta = 0.0;
    double horizon = 1.0;

    void validate() const; // throws std::domain_error when violated
};

/// Evaluation point of the test function phi(s, x; t): anchor time t in
/// (0, T], evaluation time s in [t, T], state x >= 0.
struct PhiPoint {
    double t = 0.0;
    double s = 0.0;
    double x = 0.0;
};

/// phi and its three partial derivatives at one point. All four entries are
/// strictly positive on the valid domain (gamma > 0).
struct PhiJet {
    double value = 0.0;
    double d_s = 0.0;
    double d_x = 0.0;
    double d_xx = 0.0;
};

/// psi(x, mu) = x * exp(mu * sqrt(2*log(1+x))) for x, mu >= 0.
double psi(double x, double mu);

/// log(psi(x, mu)); -inf at x == 0. Keeps tail scenarios inside double range.
double log_psi(double x, double mu);

/// Accumulated rate integral_t^s k_r dr with k_r = (gamma/2)(gamma + sqrt(2/r)),
/// in closed form: gamma^2 (s-t)/2 + gamma*sqrt(2)*(sqrt(s) - sqrt(t)).
double k_accumulated(double t, double s, const CriticalParams& params);

/// phi(s, x; t) = (x+e) exp(gamma*sqrt(2 s log(x+e)) + k_accumulated(t, s))
/// and its partials d_s, d_x, d_xx. Requires gamma > 0 and a valid point.
PhiJet phi_jet(const PhiPoint& p, const CriticalParams& params);

namespace detail {
/// phi_jet with the accumulated rate scaled by k_scale. k_scale != 1 breaks
/// the differential inequality; used only by negative-control checks.
PhiJet phi_jet_scaled(const PhiPoint& p, const CriticalParams& params, double k_scale);
} // namespace detail

/// -(gamma^2/2) phi_x^2/phi_xx + phi_s, assembled from phi_jet. Nonnegative
/// on the whole domain.
double hjb_residual(const PhiPoint& p, const CriticalParams& params);

/// -gamma phi_x |z| + (1/2) phi_xx |z|^2 + phi_s; bounded below by
/// hjb_residual (quadratic in |z| minimized at |z| = gamma phi_x / phi_xx).
double drift_residual(const PhiPoint& p, double z_norm, const CriticalParams& params);

/// Sandwich constant K = K(gamma, T):
///   psi(x, gamma sqrt(s)) <= phi(s, x; t) <= K psi(x, gamma sqrt(s)) + K.
/// Computed as max(sup_{x>=1} H1(x), H2) over a log-spaced grid on [1, 1e12]
/// joined with the analytic x -> inf limit exp(gamma^2 T/2 + gamma sqrt(2T)).
double growth_constant_K(const CriticalParams& params);

/// A concrete admissible constant for the a priori bound
///   psi(|Y_t|, gamma sqrt(t)) <= C E[psi(|xi| + int |g0|, gamma sqrt(T)) | F_t] + C,
/// traced through the proof:
///   C = K * max(psi(e^{beta T}, gamma sqrt(T)), 1) * max(psi(2, gamma sqrt(T))/2, 1).
/// Nondecreasing in each of beta, gamma, T.
double apriori_constant_C(const CriticalParams& params);

/// exp(x^2/(2 mu^2)) + exp(2 mu^2) psi(y, mu) - exp(x) y, which is >= 0 for
/// every real x, y >= 0, mu > 0. Values beyond double range saturate at
/// sign(gap) * huge rather than overflowing.
double young_gap(double x, double y, double mu);

/// Exponential-moment bound 1/sqrt(1 - 2 lambda gamma^2 (T-t)) for
/// E[exp(lambda |int_t^T q dB|^2)] with |q| <= gamma. Requires
/// 0 <= lambda < 1/(2 gamma^2 (T-t)).
double exp_moment_bound(double lambda, double t, const CriticalParams& params);

} // namespace bsdelab
