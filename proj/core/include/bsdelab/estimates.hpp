#pragma once

#include <span>
#include <vector>

#include "bsdelab/generators.hpp"
#include "bsdelab/regression.hpp"
#include "bsdelab/report.hpp"
#include "bsdelab/solver.hpp"
#include "bsdelab/special_functions.hpp"

namespace bsdelab {

/// Ybar_k = e^{beta t_k} |Y_k| + sum_{j<k} e^{beta t_j} |g(t_j,0,0)| dt_j
/// (left-endpoint quadrature). Dominates |Y| pointwise.
struct BarField {
    std::vector<double> ybar; // M x (N+1)
    std::string zbar_meta;    // records the sign convention for Zbar

    double at(int i, int k, int n_steps) const {
        return ybar[static_cast<std::size_t>(i) * (static_cast<std::size_t>(n_steps) + 1) +
                    static_cast<std::size_t>(k)];
    }
};

BarField bar_transform(const SolutionField& field, const GeneratorSpec& gen);

/// Per-path grid index of the first time the discrete quadratic-variation
/// integral of phi_x(r, Ybar_r; t_anchor) |Zbar_r| reaches n_level, else N.
struct StoppingField {
    std::vector<int> tau;
    int anchor_index = 0;
};

StoppingField localization_times(const SolutionField& field, const BarField& bar,
                                 int anchor_index, double n_level,
                                 const CriticalParams& params);

/// Discrete submartingale check of V_k = phi(t_k, Ybar_k; t_anchor):
/// per step the regression estimate of E[V_{k+1} | B_{t_k}] must not fall
/// below V_k beyond 3 fitted-value standard errors. violation_rate counts the
/// per-path excursions beyond that band; the check passes when the rate stays
/// under pass_rate. worst_margin reports the worst per-step mean drift in
/// standard-error units as a diagnostic.
VerificationReport supermartingale_test(const SolutionField& field, const GeneratorSpec& gen,
                                        int anchor_index, const CriticalParams& params,
                                        const RegressionConfig& reg, double pass_rate = 0.02,
                                        RegressionPlanPtr plan = {});

/// Per-path comparison of psi(|Y_k|, gamma sqrt(t_k)) against
/// C * E[psi(|xi| + sum |g0| dt, gamma sqrt(T)) | B_{t_k}] + C with C from
/// apriori_constant_C; reports the violation rate beyond the 3-SE band and
/// the empirical tightness ratio.
VerificationReport check_apriori_bound(const SolutionField& field, const GeneratorSpec& gen,
                                       std::span<const double> xi, const CriticalParams& params,
                                       const RegressionConfig& reg, double pass_rate = 0.01,
                                       RegressionPlanPtr plan = {});

/// Uniform-integrability surrogate over a finite stopping-time family
/// (every deterministic grid time plus |Y| level-hitting times at the
/// 50/75/90/99% quantiles of the running maximum): the decay curve
/// c -> sup_tau E[psi(|Y_tau|, gamma sqrt(t_tau)) 1{psi > c}] must decrease
/// and end below pass_fraction of its c = 0 value.
VerificationReport class_d_diagnostic(const SolutionField& field, const CriticalParams& params,
                                      std::span<const double> thresholds,
                                      double pass_fraction = 0.5);

} // namespace bsdelab
