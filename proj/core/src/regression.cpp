#include "bsdelab/regression.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <stdexcept>

#include "bsdelab/errors.hpp"

namespace bsdelab {

namespace {

// Graded enumeration of d-dimensional exponent tuples with total degree <= q.
std::vector<std::vector<int>> enumerate_exponents(int dim, int degree) {
    std::vector<std::vector<int>> out;
    std::vector<int> current(static_cast<std::size_t>(dim), 0);
    for (int total = 0; total <= degree; ++total) {
        // lexicographic walk over tuples with fixed total degree
        std::function<void(int, int)> rec = [&](int pos, int remaining) {
            if (pos == dim - 1) {
                current[static_cast<std::size_t>(pos)] = remaining;
                out.push_back(current);
                return;
            }
            for (int e = remaining; e >= 0; --e) {
                current[static_cast<std::size_t>(pos)] = e;
                rec(pos + 1, remaining - e);
            }
        };
        rec(0, total);
    }
    return out;
}

// Dense lower-triangular Cholesky; returns false when not positive definite.
bool cholesky(std::vector<double>& a, int n) {
    for (int j = 0; j < n; ++j) {
        double diag = a[static_cast<std::size_t>(j) * n + j];
        for (int k = 0; k < j; ++k) {
            const double l = a[static_cast<std::size_t>(j) * n + k];
            diag -= l * l;
        }
        if (!(diag > 0.0) || !std::isfinite(diag)) return false;
        const double root = std::sqrt(diag);
        a[static_cast<std::size_t>(j) * n + j] = root;
        for (int i = j + 1; i < n; ++i) {
            double v = a[static_cast<std::size_t>(i) * n + j];
            for (int k = 0; k < j; ++k) {
                v -= a[static_cast<std::size_t>(i) * n + k] * a[static_cast<std::size_t>(j) * n + k];
            }
            a[static_cast<std::size_t>(i) * n + j] = v / root;
        }
    }
    return true;
}

void cholesky_solve(const std::vector<double>& l, int n, std::vector<double>& x) {
    for (int i = 0; i < n; ++i) {
        double v = x[static_cast<std::size_t>(i)];
        for (int k = 0; k < i; ++k) v -= l[static_cast<std::size_t>(i) * n + k] * x[static_cast<std::size_t>(k)];
        x[static_cast<std::size_t>(i)] = v / l[static_cast<std::size_t>(i) * n + i];
    }
    for (int i = n - 1; i >= 0; --i) {
        double v = x[static_cast<std::size_t>(i)];
        for (int k = i + 1; k < n; ++k) v -= l[static_cast<std::size_t>(k) * n + i] * x[static_cast<std::size_t>(k)];
        x[static_cast<std::size_t>(i)] = v / l[static_cast<std::size_t>(i) * n + i];
    }
}

} // namespace

void RegressionConfig::validate() const {
    if (basis_degree < 0) throw ConfigError("RegressionConfig: basis_degree must be >= 0");
    if (!(ridge >= 0.0)) throw ConfigError("RegressionConfig: ridge must be >= 0");
    if (clip && !(*clip > 0.0)) throw ConfigError("RegressionConfig: clip must be > 0");
}

StepRegression::StepRegression(std::span<const double> states, int n_paths, int dim,
                               const RegressionConfig& config, int step_index)
    : states_(states), n_paths_(n_paths), dim_(dim), step_index_(step_index),
      clip_(config.clip), exponents_(enumerate_exponents(dim, config.basis_degree)) {
    config.validate();
    const int p = basis_size();

    // Column moments (long double accumulators, fixed path order).
    std::vector<long double> sum(static_cast<std::size_t>(p), 0.0L);
    std::vector<long double> sum_sq(static_cast<std::size_t>(p), 0.0L);
    std::vector<double> row(static_cast<std::size_t>(p));
    for (int i = 0; i < n_paths_; ++i) {
        basis_row(states_.data() + static_cast<std::size_t>(i) * dim_, row.data());
        for (int j = 0; j < p; ++j) {
            sum[static_cast<std::size_t>(j)] += row[static_cast<std::size_t>(j)];
            sum_sq[static_cast<std::size_t>(j)] +=
                static_cast<long double>(row[static_cast<std::size_t>(j)]) * row[static_cast<std::size_t>(j)];
        }
    }
    col_mean_.assign(static_cast<std::size_t>(p), 0.0);
    col_scale_.assign(static_cast<std::size_t>(p), 1.0);
    kept_.clear();
    kept_.push_back(0); // intercept always kept
    for (int j = 1; j < p; ++j) {
        const double mean = static_cast<double>(sum[static_cast<std::size_t>(j)] / n_paths_);
        const double var = std::max(
            0.0, static_cast<double>(sum_sq[static_cast<std::size_t>(j)] / n_paths_) - mean * mean);
        const double sd = std::sqrt(var);
        col_mean_[static_cast<std::size_t>(j)] = mean;
        if (sd > 1e-12 * (1.0 + std::fabs(mean))) {
            col_scale_[static_cast<std::size_t>(j)] = sd;
            kept_.push_back(j);
        }
    }

    // Normal matrix over standardized kept columns.
    const int q = active_columns();
    std::vector<long double> normal(static_cast<std::size_t>(q) * q, 0.0L);
    std::vector<double> std_row(static_cast<std::size_t>(q));
    for (int i = 0; i < n_paths_; ++i) {
        basis_row(states_.data() + static_cast<std::size_t>(i) * dim_, row.data());
        for (int a = 0; a < q; ++a) {
            const int j = kept_[static_cast<std::size_t>(a)];
            std_row[static_cast<std::size_t>(a)] =
                (row[static_cast<std::size_t>(j)] - col_mean_[static_cast<std::size_t>(j)]) /
                col_scale_[static_cast<std::size_t>(j)];
        }
        for (int a = 0; a < q; ++a) {
            for (int b = 0; b <= a; ++b) {
                normal[static_cast<std::size_t>(a) * q + b] +=
                    static_cast<long double>(std_row[static_cast<std::size_t>(a)]) *
                    std_row[static_cast<std::size_t>(b)];
            }
        }
    }

    chol_.assign(static_cast<std::size_t>(q) * q, 0.0);
    for (int a = 0; a < q; ++a) {
        for (int b = 0; b <= a; ++b) {
            double v = static_cast<double>(normal[static_cast<std::size_t>(a) * q + b]);
            if (a == b && a > 0) v += config.ridge * n_paths_;
            chol_[static_cast<std::size_t>(a) * q + b] = v;
            chol_[static_cast<std::size_t>(b) * q + a] = v;
        }
    }
    if (!cholesky(chol_, q)) {
        throw SolverError("regression: singular normal equations", step_index_);
    }
}

void StepRegression::basis_row(const double* state, double* row) const {
    const int p = basis_size();
    // per-dimension power tables keep this cheap for small degrees
    double powers[8][16];
    int max_e = 0;
    for (const auto& e : exponents_)
        for (int c = 0; c < dim_; ++c) max_e = std::max(max_e, e[static_cast<std::size_t>(c)]);
    for (int c = 0; c < dim_ && c < 8; ++c) {
        powers[c][0] = 1.0;
        for (int e = 1; e <= max_e && e < 16; ++e) powers[c][e] = powers[c][e - 1] * state[c];
    }
    for (int j = 0; j < p; ++j) {
        double v = 1.0;
        const auto& exps = exponents_[static_cast<std::size_t>(j)];
        for (int c = 0; c < dim_; ++c) {
            const int e = exps[static_cast<std::size_t>(c)];
            v *= (c < 8 && e < 16) ? powers[c][e] : std::pow(state[c], e);
        }
        row[static_cast<std::size_t>(j)] = v;
    }
}

StepRegression::FitStats StepRegression::apply(std::span<const double> target,
                                               std::span<double> fitted) const {
    if (static_cast<int>(target.size()) != n_paths_ ||
        static_cast<int>(fitted.size()) != n_paths_) {
        throw SolverError("regression: target/fitted size mismatch", step_index_);
    }
    const int p = basis_size();
    const int q = active_columns();

    std::vector<long double> rhs_acc(static_cast<std::size_t>(q), 0.0L);
    std::vector<double> row(static_cast<std::size_t>(p));
    std::vector<double> std_row(static_cast<std::size_t>(q));
    for (int i = 0; i < n_paths_; ++i) {
        basis_row(states_.data() + static_cast<std::size_t>(i) * dim_, row.data());
        const double y = target[static_cast<std::size_t>(i)];
        for (int a = 0; a < q; ++a) {
            const int j = kept_[static_cast<std::size_t>(a)];
            std_row[static_cast<std::size_t>(a)] =
                (row[static_cast<std::size_t>(j)] - col_mean_[static_cast<std::size_t>(j)]) /
                col_scale_[static_cast<std::size_t>(j)];
            rhs_acc[static_cast<std::size_t>(a)] +=
                static_cast<long double>(std_row[static_cast<std::size_t>(a)]) * y;
        }
    }
    std::vector<double> coeff(static_cast<std::size_t>(q));
    for (int a = 0; a < q; ++a) coeff[static_cast<std::size_t>(a)] = static_cast<double>(rhs_acc[static_cast<std::size_t>(a)]);
    cholesky_solve(chol_, q, coeff);

    long double ssr = 0.0L;
    for (int i = 0; i < n_paths_; ++i) {
        basis_row(states_.data() + static_cast<std::size_t>(i) * dim_, row.data());
        double v = 0.0;
        for (int a = 0; a < q; ++a) {
            const int j = kept_[static_cast<std::size_t>(a)];
            v += coeff[static_cast<std::size_t>(a)] *
                 (row[static_cast<std::size_t>(j)] - col_mean_[static_cast<std::size_t>(j)]) /
                 col_scale_[static_cast<std::size_t>(j)];
        }
        if (!std::isfinite(v)) throw SolverError("regression: non-finite fitted value", step_index_);
        if (clip_) v = std::clamp(v, -*clip_, *clip_);
        const double r = target[static_cast<std::size_t>(i)] - v;
        ssr += static_cast<long double>(r) * r;
        fitted[static_cast<std::size_t>(i)] = v;
    }

    FitStats stats;
    const int dof = std::max(1, n_paths_ - q);
    stats.residual_std = std::sqrt(static_cast<double>(ssr) / dof);
    stats.se_fit = stats.residual_std * std::sqrt(static_cast<double>(q) / n_paths_);
    return stats;
}

RegressionPlan::RegressionPlan(EnsemblePtr ensemble, RegressionConfig config)
    : ensemble_(std::move(ensemble)), config_(config) {
    config_.validate();
    if (!ensemble_) throw std::invalid_argument("RegressionPlan: null ensemble");
    const int n = ensemble_->grid().n_steps();
    const int d = ensemble_->dim();
    const int m = ensemble_->n_paths();

    // States come (path, step, dim)-major; regressions want contiguous M x d
    // slices per step, so copy once up front.
    step_states_.assign(static_cast<std::size_t>(n) * m * d, 0.0);
    steps_.reserve(static_cast<std::size_t>(n));
    for (int k = 0; k < n; ++k) {
        double* dst = step_states_.data() + static_cast<std::size_t>(k) * m * d;
        for (int i = 0; i < m; ++i) {
            const auto src = ensemble_->state_vector(i, k);
            for (int c = 0; c < d; ++c)
                dst[static_cast<std::size_t>(i) * d + c] = src[static_cast<std::size_t>(c)];
        }
        steps_.push_back(std::make_unique<StepRegression>(
            std::span<const double>(dst, static_cast<std::size_t>(m) * d), m, d, config_, k));
    }
}

} // namespace bsdelab
