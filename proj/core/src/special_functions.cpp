#include "bsdelab/special_functions.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>
#include <string>

namespace bsdelab {

namespace {

constexpr double kEulerE = std::numbers::e;
constexpr double kLogSpaceThreshold = 700.0; // exp() overflows near 709.8

void require(bool cond, const char* msg) {
    if (!cond) throw std::domain_error(msg);
}

} // namespace

void CriticalParams::validate() const {
    require(std::isfinite(gamma) && gamma >= 0.0, "CriticalParams: gamma must be >= 0");
    require(std::isfinite(beta) && beta >= 0.0, "CriticalParams: beta must be >= 0");
    require(std::isfinite(horizon) && horizon > 0.0, "CriticalParams: horizon must be > 0");
}

double psi(double x, double mu) {
    require(x >= 0.0, "psi: x must be >= 0");
    require(mu >= 0.0, "psi: mu must be >= 0");
    if (x == 0.0) return 0.0;
    const double exponent = mu * std::sqrt(2.0 * std::log1p(x));
    if (std::log(x) + exponent > kLogSpaceThreshold) {
        return std::numeric_limits<double>::max();
    }
    return x * std::exp(exponent);
}

double log_psi(double x, double mu) {
    require(x >= 0.0, "log_psi: x must be >= 0");
    require(mu >= 0.0, "log_psi: mu must be >= 0");
    if (x == 0.0) return -std::numeric_limits<double>::infinity();
    return std::log(x) + mu * std::sqrt(2.0 * std::log1p(x));
}

double k_accumulated(double t, double s, const CriticalParams& params) {
    params.validate();
    require(t > 0.0, "k_accumulated: t must be > 0");
    require(s >= t, "k_accumulated: need s >= t");
    const double g = params.gamma;
    return 0.5 * g * g * (s - t) + g * std::numbers::sqrt2 * (std::sqrt(s) - std::sqrt(t));
}

namespace detail {

PhiJet phi_jet_scaled(const PhiPoint& p, const CriticalParams& params, double k_scale) {
    params.validate();
    require(params.gamma > 0.0, "phi_jet: gamma must be > 0");
    require(p.t > 0.0 && p.t <= p.s, "phi_jet: need 0 < t <= s");
    require(p.s <= params.horizon, "phi_jet: need s <= horizon");
    require(p.x >= 0.0, "phi_jet: need x >= 0");

    const double g = params.gamma;
    const double sqrt_s = std::sqrt(p.s);
    const double xe = p.x + kEulerE;
    const double v = std::sqrt(2.0 * std::log(xe)); // >= sqrt(2) since log(x+e) >= 1
    const double w = g * sqrt_s;

    const double exponent = w * v + k_scale * k_accumulated(p.t, p.s, params);
    if (std::log(xe) + exponent > kLogSpaceThreshold) {
        throw std::domain_error("phi_jet: phi exceeds double range at x=" + std::to_string(p.x));
    }
    const double value = xe * std::exp(exponent);

    PhiJet jet;
    jet.value = value;
    jet.d_x = value * (w + v) / (xe * v);
    jet.d_xx = value * w * (v * v + w * v - 1.0) / (xe * xe * v * v * v);
    // d_s = value * (g v / (2 sqrt(s)) + k_scale * k_s), k_s = (g/2)(g + sqrt(2/s))
    jet.d_s = value * (0.5 * g * v / sqrt_s +
                       k_scale * 0.5 * g * (g + std::numbers::sqrt2 / sqrt_s));
    return jet;
}

} // namespace detail

PhiJet phi_jet(const PhiPoint& p, const CriticalParams& params) {
    return detail::phi_jet_scaled(p, params, 1.0);
}

double hjb_residual(const PhiPoint& p, const CriticalParams& params) {
    const PhiJet jet = phi_jet(p, params);
    const double g = params.gamma;
    return -0.5 * g * g * jet.d_x * jet.d_x / jet.d_xx + jet.d_s;
}

double drift_residual(const PhiPoint& p, double z_norm, const CriticalParams& params) {
    require(z_norm >= 0.0, "drift_residual: z_norm must be >= 0");
    const PhiJet jet = phi_jet(p, params);
    const double g = params.gamma;
    return -g * jet.d_x * z_norm + 0.5 * jet.d_xx * z_norm * z_norm + jet.d_s;
}

namespace {

// H1(x): ratio bound phi/(psi+1) on x >= 1, from the K construction.
double sandwich_h1(double x, double gamma, double horizon) {
    const double sqrt_T = std::sqrt(horizon);
    const double diff = std::sqrt(2.0 * std::log(x + kEulerE)) - std::sqrt(2.0 * std::log1p(x));
    return (x + kEulerE) / x *
           std::exp(gamma * sqrt_T * diff + 0.5 * gamma * gamma * horizon +
                    gamma * std::sqrt(2.0 * horizon));
}

double sandwich_h2(double gamma, double horizon) {
    return (kEulerE + 1.0) *
           std::exp(gamma * std::sqrt(2.0 * horizon * std::log1p(kEulerE)) +
                    0.5 * gamma * gamma * horizon + gamma * std::sqrt(2.0 * horizon));
}

} // namespace

double growth_constant_K(const CriticalParams& params) {
    params.validate();
    const double gamma = params.gamma;
    const double T = params.horizon;

    // sup over [1, 1e12] on a log grid, joined with the analytic x->inf limit.
    constexpr int kGridPoints = 10000;
    const double log_lo = 0.0;
    const double log_hi = 12.0 * std::numbers::ln10;
    double sup_h1 = std::exp(0.5 * gamma * gamma * T + gamma * std::sqrt(2.0 * T));
    for (int i = 0; i < kGridPoints; ++i) {
        const double x = std::exp(log_lo + (log_hi - log_lo) * i / (kGridPoints - 1));
        sup_h1 = std::max(sup_h1, sandwich_h1(x, gamma, T));
    }
    return std::max(sup_h1, sandwich_h2(gamma, T));
}

double apriori_constant_C(const CriticalParams& params) {
    params.validate();
    const double mu = params.gamma * std::sqrt(params.horizon);
    const double k = growth_constant_K(params);
    const double barrier = psi(std::exp(params.beta * params.horizon), mu);
    const double split = 0.5 * psi(2.0, mu);
    return k * std::max(barrier, 1.0) * std::max(split, 1.0);
}

double young_gap(double x, double y, double mu) {
    require(y >= 0.0, "young_gap: y must be >= 0");
    require(mu > 0.0, "young_gap: mu must be > 0");
    require(std::isfinite(x), "young_gap: x must be finite");

    const double a = x * x / (2.0 * mu * mu);
    const double b = (y > 0.0) ? 2.0 * mu * mu + log_psi(y, mu)
                               : -std::numeric_limits<double>::infinity();
    const double c = (y > 0.0) ? x + std::log(y)
                               : -std::numeric_limits<double>::infinity();

    const double m = std::max({a, b, c});
    if (m <= kLogSpaceThreshold) {
        const double term_b = (y > 0.0) ? std::exp(2.0 * mu * mu) * psi(y, mu) : 0.0;
        return std::exp(a) + term_b - std::exp(x) * y;
    }
    // Saturated evaluation: correct sign, magnitude capped at exp(700).
    const double scaled = std::exp(a - m) + std::exp(b - m) - std::exp(c - m);
    return scaled * std::exp(std::min(m, kLogSpaceThreshold));
}

double exp_moment_bound(double lambda, double t, const CriticalParams& params) {
    params.validate();
    require(lambda >= 0.0, "exp_moment_bound: lambda must be >= 0");
    require(t >= 0.0 && t <= params.horizon, "exp_moment_bound: t must lie in [0, T]");
    const double q = 2.0 * lambda * params.gamma * params.gamma * (params.horizon - t);
    require(q < 1.0, "exp_moment_bound: lambda >= 1/(2 gamma^2 (T-t)); bound does not apply");
    return 1.0 / std::sqrt(1.0 - q);
}

} // namespace bsdelab
