#pragma once

#include <memory>
#include <optional>
#include <span>
#include <vector>

#include "bsdelab/path_ensemble.hpp"

namespace bsdelab {

/// Conditional-expectation estimator settings: polynomial basis in the
/// current Brownian state, optional ridge weight and optional post-regression
/// truncation of fitted values.
struct RegressionConfig {
    int basis_degree = 2;
    double ridge = 0.0;
    std::optional<double> clip;

    void validate() const;
};

/// Least-squares projection onto polynomials of the state at one grid step.
/// The design factorization depends only on (states, config), so it is built
/// once and reused across targets; accumulation order is fixed, so results
/// are deterministic.
class StepRegression {
public:
    /// states: M x d row-major slice of B_{t_k}.
    StepRegression(std::span<const double> states, int n_paths, int dim,
                   const RegressionConfig& config, int step_index);

    struct FitStats {
        double residual_std = 0.0; // sqrt(SSR / (M - p))
        double se_fit = 0.0;       // residual_std * sqrt(p / M)
    };

    /// Project target onto the basis; fitted values written per path.
    FitStats apply(std::span<const double> target, std::span<double> fitted) const;

    int basis_size() const { return static_cast<int>(exponents_.size()); }
    int active_columns() const { return static_cast<int>(kept_.size()); }

private:
    void basis_row(const double* state, double* row) const;

    std::span<const double> states_;
    int n_paths_ = 0;
    int dim_ = 1;
    int step_index_ = 0;
    std::optional<double> clip_;

    std::vector<std::vector<int>> exponents_; // per basis column, per dimension
    std::vector<double> col_mean_;
    std::vector<double> col_scale_;
    std::vector<int> kept_; // columns with nonzero variance (plus intercept)
    std::vector<double> chol_; // lower Cholesky factor of the normal matrix
};

/// Per-step regressions over a whole ensemble, shared by every solve that
/// uses the same (ensemble, config).
class RegressionPlan {
public:
    RegressionPlan(EnsemblePtr ensemble, RegressionConfig config);

    const StepRegression& at_step(int k) const { return *steps_.at(static_cast<std::size_t>(k)); }
    const RegressionConfig& config() const { return config_; }
    const EnsemblePtr& ensemble() const { return ensemble_; }

private:
    EnsemblePtr ensemble_;
    RegressionConfig config_;
    std::vector<double> step_states_; // N x M x d compact per-step state copies
    std::vector<std::unique_ptr<StepRegression>> steps_;
};

using RegressionPlanPtr = std::shared_ptr<const RegressionPlan>;

} // namespace bsdelab
