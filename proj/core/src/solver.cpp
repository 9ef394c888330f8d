#include "bsdelab/solver.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>

#include "bsdelab/errors.hpp"
#include "bsdelab/io_util.hpp"
#include "json.hpp"

namespace bsdelab {

double SolutionField::mean_y(int k) const {
    const int m = n_paths();
    long double acc = 0.0L;
    for (int i = 0; i < m; ++i) acc += y_at(i, k);
    return static_cast<double>(acc / m);
}

double SolutionField::noise_scale() const {
    double worst = 0.0;
    for (double s : step_se_fit) worst = std::max(worst, s);
    return worst;
}

std::vector<double> truncate_terminal(std::span<const double> xi, int n, int p) {
    if (n < 1 || p < 1) throw std::invalid_argument("truncate_terminal: n, p must be >= 1");
    std::vector<double> out(xi.size());
    const double cap_pos = static_cast<double>(n);
    const double cap_neg = static_cast<double>(p);
    for (std::size_t i = 0; i < xi.size(); ++i) {
        const double plus = std::min(std::max(xi[i], 0.0), cap_pos);
        const double minus = std::min(std::max(-xi[i], 0.0), cap_neg);
        out[i] = plus - minus;
    }
    return out;
}

GeneratorSpec truncate_generator(const GeneratorSpec& spec, int n, int p) {
    if (n < 1 || p < 1) throw std::invalid_argument("truncate_generator: n, p must be >= 1");
    GeneratorSpec out = spec;
    out.name = spec.name + "#trunc(" + std::to_string(n) + "," + std::to_string(p) + ")";
    const double cap_pos = static_cast<double>(n);
    const double cap_neg = static_cast<double>(p);
    auto inner = spec.evaluate;
    out.evaluate = [inner, cap_pos, cap_neg](double t, double y, std::span<const double> z) {
        const double g0 = inner(t, 0.0, std::span<const double>{});
        const double g0_trunc = std::min(std::max(g0, 0.0), cap_pos) -
                                std::min(std::max(-g0, 0.0), cap_neg);
        return inner(t, y, z) - g0 + g0_trunc;
    };
    return out;
}

namespace {

struct BackwardWorkspace {
    std::vector<double> next_y;
    std::vector<double> fitted_cond; // E_k[Y_{k+1}]
    std::vector<double> fitted_zc;   // per-component Z fit
    std::vector<double> target;
};

// One backward pass. When frozen_* are non-null the generator is evaluated
// on those fields (Picard inner solve) instead of the current recursion.
SolutionField backward_pass(const GeneratorSpec& gen, std::span<const double> xi,
                            const EnsemblePtr& ensemble, const RegressionConfig& reg,
                            const SolveOptions& options, const RegressionPlan& plan,
                            const SolutionField* frozen) {
    const TimeGrid& grid = ensemble->grid();
    const int n = grid.n_steps();
    const int m = ensemble->n_paths();
    const int d = ensemble->dim();
    if (static_cast<int>(xi.size()) != m)
        throw SolverError("solve: xi size does not match the ensemble path count");

    SolutionField field;
    field.grid = grid;
    field.ensemble = ensemble;
    field.dim = d;
    field.y.assign(static_cast<std::size_t>(m) * (static_cast<std::size_t>(n) + 1), 0.0);
    field.z.assign(static_cast<std::size_t>(m) * static_cast<std::size_t>(n) *
                       static_cast<std::size_t>(d),
                   0.0);
    field.meta.generator = gen.name;
    field.meta.basis_degree = reg.basis_degree;
    field.meta.ridge = reg.ridge;
    field.meta.seed = ensemble->seed();
    field.step_residual_std.assign(static_cast<std::size_t>(n), 0.0);
    field.step_se_fit.assign(static_cast<std::size_t>(n), 0.0);

    for (int i = 0; i < m; ++i) {
        if (!std::isfinite(xi[static_cast<std::size_t>(i)]))
            throw SolverError("solve: non-finite terminal value at path " + std::to_string(i));
        field.y_at(i, n) = xi[static_cast<std::size_t>(i)];
    }

    BackwardWorkspace ws;
    ws.next_y.resize(static_cast<std::size_t>(m));
    ws.fitted_cond.resize(static_cast<std::size_t>(m));
    ws.fitted_zc.resize(static_cast<std::size_t>(m));
    ws.target.resize(static_cast<std::size_t>(m));

    std::vector<double> z_row(static_cast<std::size_t>(d));

    for (int k = n - 1; k >= 0; --k) {
        const StepRegression& sr = plan.at_step(k);
        const double dt = grid.dt(k);
        const double t_k = grid.time(k);
        for (int i = 0; i < m; ++i) ws.next_y[static_cast<std::size_t>(i)] = field.y_at(i, k + 1);

        const auto stats = sr.apply(ws.next_y, ws.fitted_cond);
        field.step_residual_std[static_cast<std::size_t>(k)] = stats.residual_std;
        field.step_se_fit[static_cast<std::size_t>(k)] = stats.se_fit;

        // Z_k = E_k[Y_{k+1} dB_k] / dt componentwise, in the martingale-
        // increment form: centering Y_{k+1} by its own projection leaves the
        // conditional expectation unchanged (E[dB | F_k] = 0) and removes
        // the variance carried by the predictable part.
        for (int c = 0; c < d; ++c) {
            for (int i = 0; i < m; ++i) {
                ws.target[static_cast<std::size_t>(i)] =
                    (ws.next_y[static_cast<std::size_t>(i)] -
                     ws.fitted_cond[static_cast<std::size_t>(i)]) *
                    ensemble->increment(i, k, c);
            }
            sr.apply(ws.target, ws.fitted_zc);
            for (int i = 0; i < m; ++i)
                field.z_at(i, k, c) = ws.fitted_zc[static_cast<std::size_t>(i)] / dt;
        }

        for (int i = 0; i < m; ++i) {
            const double cond = ws.fitted_cond[static_cast<std::size_t>(i)];
            double g_value;
            if (frozen) {
                for (int c = 0; c < d; ++c) z_row[static_cast<std::size_t>(c)] = frozen->z_at(i, k, c);
                g_value = gen(t_k, frozen->y_at(i, k), z_row);
            } else {
                for (int c = 0; c < d; ++c) z_row[static_cast<std::size_t>(c)] = field.z_at(i, k, c);
                double y_arg = cond;
                g_value = gen(t_k, y_arg, z_row);
                for (int it = 0; it < options.implicit_fixed_point_iters; ++it) {
                    y_arg = cond + g_value * dt;
                    g_value = gen(t_k, y_arg, z_row);
                }
            }
            const double y_new = cond + g_value * dt;
            if (!std::isfinite(y_new)) {
                throw SolverError("solve: non-finite Y at path " + std::to_string(i), k);
            }
            field.y_at(i, k) = y_new;
        }
    }
    return field;
}

RegressionPlanPtr plan_for(const EnsemblePtr& ensemble, const RegressionConfig& reg,
                           const SolveOptions& options) {
    if (options.plan) {
        if (options.plan->ensemble().get() != ensemble.get())
            throw SolverError("solve: supplied regression plan was built on another ensemble");
        return options.plan;
    }
    return std::make_shared<const RegressionPlan>(ensemble, reg);
}

} // namespace

SolutionField solve_backward_euler(const GeneratorSpec& gen, std::span<const double> xi,
                                   EnsemblePtr ensemble, const RegressionConfig& reg,
                                   const SolveOptions& options) {
    if (!ensemble) throw std::invalid_argument("solve_backward_euler: null ensemble");
    reg.validate();
    const auto plan = plan_for(ensemble, reg, options);
    return backward_pass(gen, xi, ensemble, reg, options, *plan, nullptr);
}

PicardResult picard_solve(const GeneratorSpec& gen, std::span<const double> xi,
                          EnsemblePtr ensemble, const RegressionConfig& reg, int max_iter,
                          double tol, const SolveOptions& options) {
    if (!ensemble) throw std::invalid_argument("picard_solve: null ensemble");
    if (max_iter < 1) throw std::invalid_argument("picard_solve: max_iter must be >= 1");
    if (!(tol > 0.0)) throw std::invalid_argument("picard_solve: tol must be > 0");
    reg.validate();
    const auto plan = plan_for(ensemble, reg, options);

    GeneratorSpec zero_gen = gen;
    zero_gen.name = gen.name + "#picard-init";
    zero_gen.evaluate = [](double, double, std::span<const double>) { return 0.0; };
    SolutionField current =
        backward_pass(zero_gen, xi, ensemble, reg, options, *plan, nullptr);

    const int n = ensemble->grid().n_steps();
    const int m = ensemble->n_paths();

    PicardResult result;
    for (int iter = 1; iter <= max_iter; ++iter) {
        SolutionField next = backward_pass(gen, xi, ensemble, reg, options, *plan, &current);
        double change = 0.0;
        for (int k = 0; k <= n; ++k) {
            long double acc = 0.0L;
            for (int i = 0; i < m; ++i) acc += std::fabs(next.y_at(i, k) - current.y_at(i, k));
            change = std::max(change, static_cast<double>(acc / m));
        }
        current = std::move(next);
        result.iterations = iter;
        result.last_change = change;
        if (change <= tol) {
            current.meta.generator = gen.name;
            result.field = std::move(current);
            return result;
        }
    }
    throw SolverError("picard_solve: no convergence after " + std::to_string(max_iter) +
                      " iterations; last sup-change " + format_double(result.last_change));
}

namespace {

std::vector<int> geometric_ladder(int level_max) {
    std::vector<int> out;
    for (int v = 1; v < level_max; v *= 2) out.push_back(v);
    out.push_back(level_max);
    return out;
}

} // namespace

MonotoneSweep monotone_approximation(const GeneratorSpec& gen, std::span<const double> xi,
                                     EnsemblePtr ensemble, const RegressionConfig& reg,
                                     int n_max, int p_max,
                                     const MonotoneMemberVisitor& visitor) {
    if (!ensemble) throw std::invalid_argument("monotone_approximation: null ensemble");
    if (n_max < 1 || p_max < 1)
        throw std::invalid_argument("monotone_approximation: n_max, p_max must be >= 1");
    reg.validate();

    MonotoneSweep sweep;
    sweep.n_levels = geometric_ladder(n_max);
    sweep.p_levels = geometric_ladder(p_max);
    sweep.ordering_note =
        "checked: Y0 nondecreasing in the positive cap n at fixed p, "
        "nonincreasing in the negative cap p at fixed n";

    const auto plan = std::make_shared<const RegressionPlan>(ensemble, reg);
    const int n_steps = ensemble->grid().n_steps();
    const int m = ensemble->n_paths();
    const std::size_t field_size =
        static_cast<std::size_t>(m) * (static_cast<std::size_t>(n_steps) + 1);

    // Cross-p ordering uses a fixed path subsample to keep the sweep from
    // retaining one field per n level at full size.
    const int sample_paths = std::min(m, 4096);
    sweep.sampled_paths = sample_paths;
    const std::size_t sample_size =
        static_cast<std::size_t>(sample_paths) * (static_cast<std::size_t>(n_steps) + 1);

    std::vector<double> limit;                // min over p of per-p sup
    std::vector<double> sup_n(field_size);    // running max over n at fixed p
    std::vector<double> prev_n_field;         // previous n member (full), same p
    std::vector<std::vector<double>> prev_p_samples(sweep.n_levels.size());
    std::vector<double> cur_samples(sample_size);

    long violations = 0;
    long comparisons = 0;
    double band_scale = 0.0;

    SolveOptions options;
    options.plan = plan;

    for (std::size_t pi = 0; pi < sweep.p_levels.size(); ++pi) {
        const int p_level = sweep.p_levels[pi];
        bool first_n_in_p = true;
        prev_n_field.clear();

        for (std::size_t ni = 0; ni < sweep.n_levels.size(); ++ni) {
            const int n_level = sweep.n_levels[ni];
            MonotoneMemberSummary summary{n_level, p_level, 0.0, false};
            try {
                const auto xi_np = truncate_terminal(xi, n_level, p_level);
                const auto gen_np = truncate_generator(gen, n_level, p_level);
                SolutionField field =
                    solve_backward_euler(gen_np, xi_np, ensemble, reg, options);
                field.meta.truncation = std::make_pair(n_level, p_level);

                summary.solved = true;
                summary.y0 = field.mean_y(0);

                const double band = 3.0 * field.noise_scale();
                band_scale = std::max(band_scale, band);

                // ordering in n at fixed p (full field, consecutive levels)
                if (!first_n_in_p) {
                    for (std::size_t idx = 0; idx < field_size; ++idx) {
                        ++comparisons;
                        if (prev_n_field[idx] > field.y[idx] + band) ++violations;
                    }
                }
                // ordering in p at fixed n (subsample, consecutive p levels)
                for (int i = 0; i < sample_paths; ++i) {
                    for (int k = 0; k <= n_steps; ++k) {
                        cur_samples[static_cast<std::size_t>(i) *
                                        (static_cast<std::size_t>(n_steps) + 1) +
                                    static_cast<std::size_t>(k)] = field.y_at(i, k);
                    }
                }
                if (pi > 0 && !prev_p_samples[ni].empty()) {
                    for (std::size_t idx = 0; idx < sample_size; ++idx) {
                        ++comparisons;
                        if (cur_samples[idx] > prev_p_samples[ni][idx] + band) ++violations;
                    }
                }
                prev_p_samples[ni] = cur_samples;

                // running sup over n
                if (first_n_in_p) {
                    sup_n = field.y;
                } else {
                    for (std::size_t idx = 0; idx < field_size; ++idx)
                        sup_n[idx] = std::max(sup_n[idx], field.y[idx]);
                }
                prev_n_field = field.y;
                first_n_in_p = false;

                if (visitor) visitor(n_level, p_level, field);
            } catch (const SolverError& err) {
                sweep.member_errors.push_back("(n=" + std::to_string(n_level) +
                                              ",p=" + std::to_string(p_level) + "): " +
                                              err.what());
            }
            sweep.members.push_back(summary);
        }

        if (!first_n_in_p) { // at least one n member solved for this p
            if (limit.empty()) {
                limit = sup_n;
            } else {
                for (std::size_t idx = 0; idx < field_size; ++idx)
                    limit[idx] = std::min(limit[idx], sup_n[idx]);
            }
        }
    }

    sweep.limit = std::move(limit);
    sweep.noise_band = band_scale;
    sweep.ordering_violation_rate =
        comparisons == 0 ? 0.0 : static_cast<double>(violations) / static_cast<double>(comparisons);
    return sweep;
}

void export_solution_csv(const SolutionField& field, const std::filesystem::path& path) {
    const auto parent = path.parent_path();
    if (!parent.empty()) std::filesystem::create_directories(parent);
    const std::filesystem::path tmp = path.string() + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw std::runtime_error("cannot open for writing: " + tmp.string());
        out << "step_index,time,path_id,y";
        for (int c = 1; c <= field.dim; ++c) out << ",z_" << c;
        out << "\r\n";
        const int n = field.grid.n_steps();
        const int m = field.n_paths();
        std::string line;
        for (int k = 0; k <= n; ++k) {
            const std::string time_str = format_double(field.grid.time(k));
            for (int i = 0; i < m; ++i) {
                line.clear();
                line += std::to_string(k);
                line += ',';
                line += time_str;
                line += ',';
                line += std::to_string(i);
                line += ',';
                line += format_double(field.y_at(i, k));
                for (int c = 0; c < field.dim; ++c) {
                    line += ',';
                    if (k < n) line += format_double(field.z_at(i, k, c));
                }
                line += "\r\n";
                out << line;
            }
        }
        if (!out) throw std::runtime_error("short write: " + tmp.string());
    }
    std::filesystem::rename(tmp, path);
}

void export_solution_meta(const SolutionField& field, const std::filesystem::path& path,
                          const std::string& config_hash) {
    nlohmann::json j{{"config_hash", config_hash},
                     {"seed", field.meta.seed},
                     {"generator", field.meta.generator},
                     {"terminal", field.meta.terminal},
                     {"basis_degree", field.meta.basis_degree},
                     {"ridge", field.meta.ridge},
                     {"n_paths", field.n_paths()},
                     {"n_steps", field.grid.n_steps()},
                     {"horizon", field.grid.horizon()},
                     {"dim", field.dim}};
    if (field.meta.truncation) {
        j["truncation"] = {{"n", field.meta.truncation->first},
                           {"p", field.meta.truncation->second}};
    } else {
        j["truncation"] = nullptr;
    }
    atomic_write_file(path, j.dump(2) + "\n");
}

} // namespace bsdelab
