#include "bsdelab/uniqueness.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "bsdelab/errors.hpp"
#include "bsdelab/hashing.hpp"
#include "bsdelab/io_util.hpp"

namespace bsdelab {

namespace {

void require_shared_ensemble(const SolutionField& a, const SolutionField& b, const char* who) {
    if (!a.ensemble || !b.ensemble || a.ensemble.get() != b.ensemble.get())
        throw ConfigError(std::string(who) + ": fields must share one ensemble");
}

} // namespace

LinearizedCoeffs linearize(const GeneratorSpec& gen, const SolutionField& field1,
                           const SolutionField& field2) {
    require_shared_ensemble(field1, field2, "linearize");
    if (!gen.has_tag(GeneratorTag::H2) && !gen.has_tag(GeneratorTag::Monotone))
        throw ConfigError("linearize: generator must carry tag H2 or monotone");

    const int n = field1.grid.n_steps();
    const int m = field1.n_paths();
    const int d = field1.dim;

    LinearizedCoeffs out;
    out.u.assign(static_cast<std::size_t>(m) * static_cast<std::size_t>(n), 0.0);
    out.v.assign(static_cast<std::size_t>(m) * static_cast<std::size_t>(n) *
                     static_cast<std::size_t>(d),
                 0.0);

    std::vector<double> w_prev(static_cast<std::size_t>(d));
    std::vector<double> w_cur(static_cast<std::size_t>(d));

    for (int i = 0; i < m; ++i) {
        for (int k = 0; k < n; ++k) {
            const double t_k = field1.grid.time(k);
            const double y1 = field1.y_at(i, k);
            const double y2 = field2.y_at(i, k);
            const auto z1 = field1.z_vector(i, k);
            const auto z2 = field2.z_vector(i, k);

            const double eta_y = 1e-12 * (1.0 + std::fabs(y1) + std::fabs(y2));
            double u = 0.0;
            if (std::fabs(y1 - y2) > eta_y) {
                u = (gen(t_k, y1, z1) - gen(t_k, y2, z1)) / (y1 - y2);
            }
            out.u[static_cast<std::size_t>(i) * static_cast<std::size_t>(n) +
                  static_cast<std::size_t>(k)] = u;

            // telescoping coordinate sweep z2 -> z1 at frozen y2
            for (int c = 0; c < d; ++c) w_prev[static_cast<std::size_t>(c)] = z2[static_cast<std::size_t>(c)];
            for (int c = 0; c < d; ++c) {
                w_cur = w_prev;
                w_cur[static_cast<std::size_t>(c)] = z1[static_cast<std::size_t>(c)];
                const double dz = z1[static_cast<std::size_t>(c)] - z2[static_cast<std::size_t>(c)];
                const double eta_z = 1e-12 * (1.0 + std::fabs(z1[static_cast<std::size_t>(c)]) +
                                              std::fabs(z2[static_cast<std::size_t>(c)]));
                double vc = 0.0;
                if (std::fabs(dz) > eta_z) {
                    vc = (gen(t_k, y2, w_cur) - gen(t_k, y2, w_prev)) / dz;
                }
                out.v[(static_cast<std::size_t>(i) * static_cast<std::size_t>(n) +
                       static_cast<std::size_t>(k)) *
                          static_cast<std::size_t>(d) +
                      static_cast<std::size_t>(c)] = vc;
                w_prev = w_cur;
            }

            // residual of the reconstructed difference
            double recon = u * (y1 - y2);
            for (int c = 0; c < d; ++c) {
                recon += out.v[(static_cast<std::size_t>(i) * static_cast<std::size_t>(n) +
                                static_cast<std::size_t>(k)) *
                                   static_cast<std::size_t>(d) +
                               static_cast<std::size_t>(c)] *
                         (z1[static_cast<std::size_t>(c)] - z2[static_cast<std::size_t>(c)]);
            }
            const double truth = gen(t_k, y1, z1) - gen(t_k, y2, z2);
            out.max_residual = std::max(out.max_residual, std::fabs(truth - recon));
        }
    }
    return out;
}

SubintervalCascade subinterval_cascade(double horizon, double cutoff) {
    if (!(horizon > 0.0)) throw ConfigError("subinterval_cascade: horizon must be > 0");
    if (!(cutoff > 0.0 && cutoff < horizon))
        throw ConfigError("subinterval_cascade: cutoff must lie in (0, horizon)");

    SubintervalCascade cascade;
    cascade.cutoff = cutoff;
    double right = horizon;
    double left = 0.75 * horizon;
    while (left >= cutoff) {
        cascade.intervals.push_back({left, right});
        right = left;       // adjacent intervals share the endpoint bit-exactly
        left = 0.75 * left; // (3/4)^{k+1} T via exact-by-construction products
    }
    if (cascade.intervals.empty()) cascade.intervals.push_back({left, right});
    cascade.depth = static_cast<int>(cascade.intervals.size());
    return cascade;
}

namespace {

VerificationReport girsanov_impl(std::span<const double> q, const PathEnsemble& ensemble,
                                 int t_index, double lambda, const CriticalParams& params,
                                 const std::vector<int>* stop_index) {
    const int n = ensemble.grid().n_steps();
    const int m = ensemble.n_paths();
    const int d = ensemble.dim();
    if (t_index < 0 || t_index > n)
        throw ConfigError("girsanov_moment_check: t_index out of range");
    if (static_cast<std::size_t>(m) * static_cast<std::size_t>(n) * static_cast<std::size_t>(d) !=
        q.size())
        throw ConfigError("girsanov_moment_check: q must be M x N x d");
    params.validate();

    const double t = ensemble.grid().time(t_index);
    const double bound = exp_moment_bound(lambda, t, params); // throws if inadmissible

    long double acc = 0.0L, acc_sq = 0.0L;
    for (int i = 0; i < m; ++i) {
        const int hi = stop_index ? (*stop_index)[static_cast<std::size_t>(i)] : n;
        double integral = 0.0;
        for (int k = t_index; k < hi; ++k) {
            for (int c = 0; c < d; ++c) {
                integral += q[(static_cast<std::size_t>(i) * static_cast<std::size_t>(n) +
                               static_cast<std::size_t>(k)) *
                                  static_cast<std::size_t>(d) +
                              static_cast<std::size_t>(c)] *
                            ensemble.increment(i, k, c);
            }
        }
        const double w = std::exp(lambda * integral * integral);
        acc += w;
        acc_sq += static_cast<long double>(w) * w;
    }
    const double mean = static_cast<double>(acc / m);
    const double var = std::max(0.0, static_cast<double>(acc_sq / m) - mean * mean);
    const double se = std::sqrt(var / m);
    const double rel_se = mean > 0.0 ? se / mean : 0.0;

    VerificationReport report;
    report.check_name = "girsanov_moment";
    report.scenario_hash = to_hex(fnv1a64("girsanov"));
    report.seed = ensemble.seed();
    report.noise_band = 3.0 * se;
    report.worst_margin = bound * (1.0 + 3.0 * rel_se) - mean;
    report.pass = mean <= bound * (1.0 + 3.0 * rel_se);
    report.violation_rate = report.pass ? 0.0 : 1.0;
    report.details.push_back({{"estimate", mean},
                              {"bound", bound},
                              {"lambda", lambda},
                              {"t", t},
                              {"relative_se", rel_se}});
    if (rel_se > 0.5) {
        report.details.push_back(
            {{"warning", "heavy-tail variance: relative standard error above 50%"}});
    }
    return report;
}

} // namespace

VerificationReport girsanov_moment_check(std::span<const double> q, const PathEnsemble& ensemble,
                                         int t_index, double lambda,
                                         const CriticalParams& params) {
    return girsanov_impl(q, ensemble, t_index, lambda, params, nullptr);
}

VerificationReport girsanov_moment_check_constant(double q_value, const PathEnsemble& ensemble,
                                                  int t_index, double lambda,
                                                  const CriticalParams& params) {
    if (std::fabs(q_value) > params.gamma + 1e-12)
        throw ConfigError("girsanov_moment_check_constant: |q| must be <= gamma");
    const std::size_t size = static_cast<std::size_t>(ensemble.n_paths()) *
                             static_cast<std::size_t>(ensemble.grid().n_steps()) *
                             static_cast<std::size_t>(ensemble.dim());
    // constant in the first component only, so |q| = |q_value| for any d
    std::vector<double> q(size, 0.0);
    const int d = ensemble.dim();
    for (std::size_t idx = 0; idx < size; idx += static_cast<std::size_t>(d)) q[idx] = q_value;
    return girsanov_impl(q, ensemble, t_index, lambda, params, nullptr);
}

VerificationReport delta_bound_audit(const LinearizedCoeffs& coeffs, const SolutionField& field1,
                                     const SolutionField& field2, Interval interval,
                                     const CriticalParams& params, double n_level) {
    require_shared_ensemble(field1, field2, "delta_bound_audit");
    params.validate();
    if (!(params.gamma > 0.0)) throw ConfigError("delta_bound_audit: gamma must be > 0");
    if (!(n_level > 0.0)) throw ConfigError("delta_bound_audit: n_level must be > 0");
    if (!(interval.left > 0.0) || !(interval.right > interval.left))
        throw ConfigError("delta_bound_audit: need 0 < left < right");
    // Admissibility of the square-exponential moment with rate 1/(gamma^2 t)
    // at t = left over the local horizon right: 2 (right-left)/left <= 2/3.
    if (interval.left + 1e-12 < 3.0 * (interval.right - interval.left))
        throw ConfigError("delta_bound_audit: interval violates left >= 3 (right - left)");

    const TimeGrid& grid = field1.grid;
    const int n = grid.n_steps();
    const int m = field1.n_paths();
    const int d = field1.dim;
    const PathEnsemble& ensemble = *field1.ensemble;

    // grid-snapped interval: anchor at the first grid time >= left, local
    // horizon at the last grid time <= right
    int ia = n, ib = 0;
    for (int k = 0; k <= n; ++k) {
        if (grid.time(k) >= interval.left - 1e-12) {
            ia = k;
            break;
        }
    }
    for (int k = n; k >= 0; --k) {
        if (grid.time(k) <= interval.right + 1e-12) {
            ib = k;
            break;
        }
    }
    if (ia >= ib) throw ConfigError("delta_bound_audit: interval contains fewer than two grid times");
    const double t_anchor = grid.time(ia) > 0.0 ? grid.time(ia) : grid.time(ia + 1);

    const double gamma = params.gamma;
    const double mu_t = gamma * std::sqrt(t_anchor);
    const double lambda_sq = 1.0 / (gamma * gamma * t_anchor);

    VerificationReport report;
    report.check_name = "delta_bound_audit";
    report.scenario_hash = to_hex(fnv1a64(field1.meta.generator));
    report.seed = field1.meta.seed;
    report.noise_band = 3.0;
    report.details.push_back({{"interval_left", interval.left},
                              {"interval_right", interval.right},
                              {"anchor_time", t_anchor},
                              {"local_horizon", grid.time(ib)},
                              {"anchor_convention",
                               "lambda re-derived per interval with the interval's right "
                               "endpoint as the local horizon"}});

    const double levels[4] = {n_level, 2.0 * n_level, 4.0 * n_level, 8.0 * n_level};
    std::vector<double> majorants;
    double worst_split_margin = std::numeric_limits<double>::infinity();
    bool square_term_ok = true;

    for (const double level : levels) {
        // sigma per path: first grid time where |dY| + int |dZ|^2 reaches level
        std::vector<int> sigma(static_cast<std::size_t>(m), ib);
        for (int i = 0; i < m; ++i) {
            double qv = 0.0;
            for (int k = ia; k <= ib; ++k) {
                const double dy = std::fabs(field1.y_at(i, k) - field2.y_at(i, k));
                if (dy + qv >= level) {
                    sigma[static_cast<std::size_t>(i)] = k;
                    break;
                }
                if (k == ib) break;
                double dz_sq = 0.0;
                for (int c = 0; c < d; ++c) {
                    const double dz = field1.z_at(i, k, c) - field2.z_at(i, k, c);
                    dz_sq += dz * dz;
                }
                qv += dz_sq * grid.dt(k);
            }
        }

        long double majorant_acc = 0.0L;
        long double sq_acc = 0.0L, sq_acc_sq = 0.0L;
        for (int i = 0; i < m; ++i) {
            const int stop = sigma[static_cast<std::size_t>(i)];
            double s_integral = 0.0;
            for (int k = ia; k < stop; ++k) {
                for (int c = 0; c < d; ++c) {
                    s_integral += coeffs.v_at(i, k, c, n, d) * ensemble.increment(i, k, c);
                }
            }
            const double dy_stop = std::fabs(field1.y_at(i, stop) - field2.y_at(i, stop));
            const double lhs = std::exp(s_integral) * dy_stop;
            majorant_acc += lhs;

            // pathwise split: lhs <= exp(S^2/(2 gamma^2 t)) + e^{2 gamma^2 t} psi(|dY|, gamma sqrt t)
            const double split_a = std::exp(0.5 * lambda_sq * s_integral * s_integral);
            const double split_b = std::exp(2.0 * gamma * gamma * t_anchor) * psi(dy_stop, mu_t);
            worst_split_margin = std::min(worst_split_margin, split_a + split_b - lhs);

            const double sq = std::exp(lambda_sq * s_integral * s_integral);
            sq_acc += sq;
            sq_acc_sq += static_cast<long double>(sq) * sq;
        }
        const double majorant =
            std::exp(params.beta * params.horizon) * static_cast<double>(majorant_acc / m);
        majorants.push_back(majorant);

        // Square-exponential term against the analytic moment bound.
        const double sq_mean = static_cast<double>(sq_acc / m);
        const double sq_var =
            std::max(0.0, static_cast<double>(sq_acc_sq / m) - sq_mean * sq_mean);
        const double sq_rel_se = sq_mean > 0.0 ? std::sqrt(sq_var / m) / sq_mean : 0.0;
        const double local_gap = grid.time(ib) - t_anchor;
        const double q_arg = 2.0 * lambda_sq * gamma * gamma * local_gap;
        const double sq_bound = q_arg < 1.0 ? 1.0 / std::sqrt(1.0 - q_arg)
                                            : std::numeric_limits<double>::infinity();
        if (sq_mean > sq_bound * (1.0 + 3.0 * sq_rel_se)) square_term_ok = false;
        report.details.push_back({{"level", level},
                                  {"majorant", majorant},
                                  {"square_term_estimate", sq_mean},
                                  {"square_term_bound", sq_bound}});
    }

    bool decaying = true;
    for (std::size_t i = 1; i < majorants.size(); ++i) {
        if (majorants[i] > majorants[i - 1] * 1.5 + 1e-12) decaying = false;
    }

    report.worst_margin = worst_split_margin;
    report.pass = worst_split_margin >= -1e-9 && square_term_ok;
    report.violation_rate = report.pass ? 0.0 : 1.0;
    report.details.push_back({{"majorants", majorants}, {"decaying", decaying}});
    return report;
}

SolutionField solve_route(const GeneratorSpec& gen, std::span<const double> xi,
                          EnsemblePtr ensemble, const SolverRoute& route) {
    if (route.method == SolveMethod::BackwardEuler) {
        return solve_backward_euler(gen, xi, ensemble, route.reg);
    }
    return picard_solve(gen, xi, ensemble, route.reg, route.max_iter, route.tol).field;
}

std::vector<double> discrepancy_by_interval(const SolutionField& a, const SolutionField& b,
                                            const SubintervalCascade& cascade) {
    require_shared_ensemble(a, b, "discrepancy_by_interval");
    const TimeGrid& grid = a.grid;
    const int n = grid.n_steps();
    const int m = a.n_paths();

    std::vector<double> mean_abs(static_cast<std::size_t>(n) + 1, 0.0);
    for (int k = 0; k <= n; ++k) {
        long double acc = 0.0L;
        for (int i = 0; i < m; ++i) acc += std::fabs(a.y_at(i, k) - b.y_at(i, k));
        mean_abs[static_cast<std::size_t>(k)] = static_cast<double>(acc / m);
    }

    std::vector<double> out;
    out.reserve(cascade.intervals.size());
    for (const auto& interval : cascade.intervals) {
        double sup = 0.0;
        for (int k = 0; k <= n; ++k) {
            const double t = grid.time(k);
            if (t >= interval.left - 1e-12 && t <= interval.right + 1e-12)
                sup = std::max(sup, mean_abs[static_cast<std::size_t>(k)]);
        }
        out.push_back(sup);
    }
    return out;
}

VerificationReport uniqueness_experiment(const GeneratorSpec& gen, const TerminalSpec& terminal,
                                         EnsemblePtr ensemble, const SolverRoute& route_a,
                                         const SolverRoute& route_b, double cutoff,
                                         double tolerance) {
    if (!ensemble) throw ConfigError("uniqueness_experiment: null ensemble");
    if (!gen.has_tag(GeneratorTag::H2) && !gen.has_tag(GeneratorTag::Monotone))
        throw ConfigError("uniqueness_experiment: generator must carry tag H2 or monotone");
    if (route_a.method == route_b.method &&
        route_a.reg.basis_degree == route_b.reg.basis_degree &&
        route_a.reg.ridge == route_b.reg.ridge)
        throw ConfigError("uniqueness_experiment: the two solver routes must differ");
    if (!(tolerance > 0.0)) throw ConfigError("uniqueness_experiment: tolerance must be > 0");

    const auto xi = eval_terminal(terminal, *ensemble);
    SolutionField field_a = solve_route(gen, xi, ensemble, route_a);
    SolutionField field_b = solve_route(gen, xi, ensemble, route_b);
    field_a.meta.terminal = terminal.name;
    field_b.meta.terminal = terminal.name;

    const SubintervalCascade cascade = subinterval_cascade(ensemble->grid().horizon(), cutoff);
    const auto discrepancies = discrepancy_by_interval(field_a, field_b, cascade);

    // Tail below the smallest resolved left endpoint: bounded by the value
    // there plus the drift-Lipschitz allowance from both solutions.
    const TimeGrid& grid = ensemble->grid();
    const int n = grid.n_steps();
    const int m = ensemble->n_paths();
    const double left_last = cascade.intervals.back().left;

    auto drift_scale = [&](const SolutionField& f) {
        double worst = 0.0;
        std::vector<double> z_row(static_cast<std::size_t>(f.dim));
        for (int k = 0; k < n; ++k) {
            if (grid.time(k) > left_last) break;
            long double acc = 0.0L;
            for (int i = 0; i < m; ++i) {
                for (int c = 0; c < f.dim; ++c) z_row[static_cast<std::size_t>(c)] = f.z_at(i, k, c);
                acc += std::fabs(gen(grid.time(k), f.y_at(i, k), z_row));
            }
            worst = std::max(worst, static_cast<double>(acc / m));
        }
        return worst;
    };

    double disc_at_left = 0.0, tail_sup = 0.0;
    {
        long double acc = 0.0L;
        int k_left = grid.index_at(left_last);
        if (grid.time(k_left) < left_last - 1e-12) ++k_left;
        k_left = std::min(k_left, n);
        for (int i = 0; i < m; ++i)
            acc += std::fabs(field_a.y_at(i, k_left) - field_b.y_at(i, k_left));
        disc_at_left = static_cast<double>(acc / m);
        for (int k = 0; k <= n && grid.time(k) <= left_last + 1e-12; ++k) {
            long double a2 = 0.0L;
            for (int i = 0; i < m; ++i) a2 += std::fabs(field_a.y_at(i, k) - field_b.y_at(i, k));
            tail_sup = std::max(tail_sup, static_cast<double>(a2 / m));
        }
    }
    const double tail_model = disc_at_left + (drift_scale(field_a) + drift_scale(field_b)) * left_last;

    VerificationReport report;
    report.check_name = "uniqueness/" + gen.name + "/" + terminal.name;
    report.scenario_hash = to_hex(fnv1a64(gen.name + "|" + terminal.name));
    report.seed = ensemble->seed();
    report.noise_band = tolerance;

    bool pass = true;
    double worst = -std::numeric_limits<double>::infinity();
    nlohmann::json intervals = nlohmann::json::array();
    for (std::size_t j = 0; j < cascade.intervals.size(); ++j) {
        const bool ok = discrepancies[j] <= tolerance;
        pass = pass && ok;
        worst = std::max(worst, discrepancies[j]);
        intervals.push_back({{"index", j},
                             {"left", cascade.intervals[j].left},
                             {"right", cascade.intervals[j].right},
                             {"sup_mean_abs_dY", discrepancies[j]},
                             {"pass", ok}});
    }
    const bool tail_ok = tail_sup <= std::max(tolerance, tail_model);
    pass = pass && tail_ok;

    report.pass = pass;
    report.worst_margin = tolerance - worst;
    report.violation_rate = pass ? 0.0 : 1.0;
    report.details.push_back({{"intervals", intervals},
                              {"cascade_depth", cascade.depth},
                              {"cutoff", cutoff},
                              {"tail_sup", tail_sup},
                              {"tail_model_bound", tail_model},
                              {"tail_pass", tail_ok},
                              {"route_a", route_a.method == SolveMethod::BackwardEuler
                                              ? "backward_euler"
                                              : "picard"},
                              {"route_b", route_b.method == SolveMethod::BackwardEuler
                                              ? "backward_euler"
                                              : "picard"}});
    return report;
}

} // namespace bsdelab
