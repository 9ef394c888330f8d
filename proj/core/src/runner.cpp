#include "bsdelab/runner.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <limits>
#include <map>
#include <numbers>

#include "bsdelab/errors.hpp"
#include "bsdelab/estimates.hpp"
#include "bsdelab/hashing.hpp"
#include "bsdelab/io_util.hpp"
#include "bsdelab/rng.hpp"
#include "bsdelab/runner.hpp"
#include "bsdelab/scenario_config.hpp"
#include "bsdelab/solver.hpp"
#include "bsdelab/special_functions.hpp"
#include "bsdelab/uniqueness.hpp"
#include "json.hpp"

namespace bsdelab {

namespace {

namespace fs = std::filesystem;

/// Collects artifacts, hashes them, and removes partial output on abort.
class ArtifactWriter {
public:
    explicit ArtifactWriter(fs::path dir) : dir_(std::move(dir)) {
        fs::create_directories(dir_);
    }

    void write(const std::string& relpath, const std::string& contents) {
        const fs::path full = dir_ / relpath;
        atomic_write_file(full, contents);
        entries_[relpath] = to_hex(fnv1a64(contents));
    }

    void write_report(const VerificationReport& report, const std::string& relpath) {
        write(relpath, report.to_string());
    }

    void write_solution_csv(const SolutionField& field, const std::string& relpath) {
        const fs::path full = dir_ / relpath;
        export_solution_csv(field, full);
        entries_[relpath] = to_hex(fnv1a64_file(full.string()));
    }

    void finalize_manifest(const std::string& command, const std::string& config_hash,
                           std::uint64_t seed) {
        nlohmann::json artifacts = nlohmann::json::array();
        for (const auto& [path, hash] : entries_) {
            artifacts.push_back({{"path", path}, {"fnv1a64", hash}});
        }
        nlohmann::json manifest{{"command", command},
                                {"config_hash", config_hash},
                                {"seed", seed},
                                {"artifacts", artifacts}};
        atomic_write_file(dir_ / "manifest.json", manifest.dump(2) + "\n");
    }

    void abort_cleanup() noexcept {
        std::error_code ec;
        for (const auto& [path, hash] : entries_) fs::remove(dir_ / path, ec);
        fs::remove(dir_ / "manifest.json", ec);
    }

private:
    fs::path dir_;
    std::map<std::string, std::string> entries_; // relpath -> hash, sorted
};

std::vector<double> log_spaced_states(double lo_exp, double hi_exp, int count) {
    std::vector<double> out;
    out.reserve(static_cast<std::size_t>(count) + 1);
    out.push_back(0.0);
    for (int i = 0; i < count; ++i) {
        out.push_back(std::pow(10.0, lo_exp + (hi_exp - lo_exp) * i / (count - 1)));
    }
    return out;
}

// ---- verify-functions checks -------------------------------------------

VerificationReport hjb_sweep_report(double horizon, double k_scale, std::uint64_t seed) {
    VerificationReport report;
    report.check_name = k_scale == 1.0 ? "hjb_residual_sweep" : "hjb_residual_negative_control";
    report.scenario_hash = to_hex(fnv1a64("hjb_sweep"));
    report.seed = seed;
    report.noise_band = 1e-10;

    const double anchors[] = {0.01, 0.5, horizon};
    const double gammas[] = {0.5, 1.0, 3.0};
    const auto xs = log_spaced_states(-4.0, 8.0, 99); // plus x = 0
    constexpr int kSValues = 100;

    double worst = std::numeric_limits<double>::infinity();
    double worst_x = 0, worst_s = 0, worst_gamma = 0, worst_anchor = 0;
    long violations = 0;
    long total = 0;

    for (const double gamma : gammas) {
        const CriticalParams params{.gamma = gamma, .beta = 0.0, .horizon = horizon};
        for (const double anchor : anchors) {
            for (int si = 0; si < kSValues; ++si) {
                const double s = anchor + (horizon - anchor) * si / (kSValues - 1);
                for (const double x : xs) {
                    const PhiJet jet =
                        detail::phi_jet_scaled({.t = anchor, .s = s, .x = x}, params, k_scale);
                    const double residual =
                        -0.5 * gamma * gamma * jet.d_x * jet.d_x / jet.d_xx + jet.d_s;
                    ++total;
                    if (residual < -1e-10) ++violations;
                    if (residual < worst) {
                        worst = residual;
                        worst_x = x;
                        worst_s = s;
                        worst_gamma = gamma;
                        worst_anchor = anchor;
                    }
                }
            }
        }
    }

    report.worst_margin = worst;
    report.violation_rate = static_cast<double>(violations) / static_cast<double>(total);
    report.pass = worst >= -1e-10;
    report.details.push_back({{"k_scale", k_scale},
                              {"points", total},
                              {"worst_at", {{"x", worst_x}, {"s", worst_s},
                                            {"gamma", worst_gamma}, {"anchor", worst_anchor}}}});
    return report;
}

VerificationReport drift_residual_report(double horizon, std::uint64_t seed) {
    VerificationReport report;
    report.check_name = "drift_residual_random";
    report.scenario_hash = to_hex(fnv1a64("drift_residual"));
    report.seed = seed;
    report.noise_band = 1e-10;

    CounterRng rng(seed, fnv1a64("drift"));
    constexpr int kSamples = 100000;
    double worst = std::numeric_limits<double>::infinity();
    double worst_min_rel = 0.0;
    long violations = 0;

    for (int i = 0; i < kSamples; ++i) {
        const double gamma = rng.uniform(0.1, 3.0);
        const CriticalParams params{.gamma = gamma, .beta = 0.0, .horizon = horizon};
        const double t = rng.uniform(0.01, horizon);
        const double s = rng.uniform(t, horizon);
        const double x = std::exp(rng.uniform(-4.0, 6.0)) - 1e-4; // near 0 upward
        const PhiPoint point{.t = t, .s = s, .x = std::max(x, 0.0)};
        const double z = std::fabs(rng.cauchy(2.0));
        const double value = drift_residual(point, z, params);
        if (value < worst) worst = value;
        if (value < -1e-10) ++violations;

        // quadratic minimum over |z| must reproduce the envelope residual
        if (i % 100 == 0) {
            const PhiJet jet = phi_jet(point, params);
            const double z_star = gamma * jet.d_x / jet.d_xx;
            const double at_min = drift_residual(point, z_star, params);
            const double envelope = hjb_residual(point, params);
            const double rel = std::fabs(at_min - envelope) /
                               std::max({std::fabs(envelope), std::fabs(at_min), 1e-300});
            worst_min_rel = std::max(worst_min_rel, rel);
        }
    }

    report.worst_margin = worst;
    report.violation_rate = static_cast<double>(violations) / kSamples;
    report.pass = worst >= -1e-10 && worst_min_rel <= 1e-12;
    report.details.push_back({{"samples", kSamples},
                              {"worst_minimizer_relative_error", worst_min_rel}});
    return report;
}

VerificationReport sandwich_report(double horizon, std::uint64_t seed) {
    VerificationReport report;
    report.check_name = "sandwich_growth_K";
    report.scenario_hash = to_hex(fnv1a64("sandwich"));
    report.seed = seed;
    report.noise_band = 1e-12;

    const double gammas[] = {0.0, 0.5, 1.0, 3.0};
    const auto xs = log_spaced_states(-4.0, 8.0, 99);
    constexpr int kTimePairs = 10; // anchors x evaluation times

    double worst_norm = std::numeric_limits<double>::infinity();
    bool exact_at_zero = false;
    long total = 0;

    for (const double gamma : gammas) {
        const CriticalParams params{.gamma = gamma, .beta = 0.0, .horizon = horizon};
        const double k_const = growth_constant_K(params);
        if (gamma == 0.0) exact_at_zero = (k_const == 1.0 + std::numbers::e);
        for (int ti = 0; ti < kTimePairs; ++ti) {
            const double t = 0.01 + (horizon - 0.01) * ti / (kTimePairs - 1);
            for (int sj = 0; sj < kTimePairs; ++sj) {
                const double s = t + (horizon - t) * sj / (kTimePairs - 1);
                const double mu = gamma * std::sqrt(s);
                for (const double x : xs) {
                    double phi_value;
                    if (gamma > 0.0) {
                        phi_value = phi_jet({.t = t, .s = s, .x = x}, params).value;
                    } else {
                        phi_value = (x + std::numbers::e); // k and exponent vanish
                    }
                    const double psi_value = psi(x, mu);
                    const double upper = k_const * psi_value + k_const;
                    const double lower_margin = (phi_value - psi_value) / (1.0 + phi_value);
                    const double upper_margin = (upper - phi_value) / (1.0 + upper);
                    worst_norm = std::min({worst_norm, lower_margin, upper_margin});
                    total += 2;
                }
            }
        }
    }

    report.worst_margin = worst_norm;
    report.violation_rate = 0.0;
    report.pass = worst_norm >= -1e-12 && exact_at_zero;
    report.details.push_back({{"points", total}, {"K_exact_at_gamma_zero", exact_at_zero}});
    return report;
}

VerificationReport young_gap_report(std::uint64_t seed) {
    VerificationReport report;
    report.check_name = "young_gap_random";
    report.scenario_hash = to_hex(fnv1a64("young_gap"));
    report.seed = seed;
    report.noise_band = 0.0;

    CounterRng rng(seed, fnv1a64("young"));
    constexpr int kSamples = 1000000;
    double worst = std::numeric_limits<double>::infinity();
    long violations = 0;
    for (int i = 0; i < kSamples; ++i) {
        const double x = rng.uniform(-50.0, 50.0);
        const double y = rng.uniform01() * 1e6;
        const double mu = std::max(1e-6, rng.uniform01() * 5.0);
        const double gap = young_gap(x, y, mu);
        worst = std::min(worst, gap);
        if (gap < 0.0) ++violations;
    }
    report.worst_margin = worst;
    report.violation_rate = static_cast<double>(violations) / kSamples;
    report.pass = worst >= 0.0;
    report.details.push_back({{"samples", kSamples}});
    return report;
}

VerificationReport psi_properties_report(std::uint64_t seed) {
    VerificationReport report;
    report.check_name = "psi_properties";
    report.scenario_hash = to_hex(fnv1a64("psi"));
    report.seed = seed;
    report.noise_band = 0.0;

    CounterRng rng(seed, fnv1a64("psi_props"));
    constexpr int kSamples = 100000;
    double worst = std::numeric_limits<double>::infinity();
    long violations = 0;
    auto track = [&](double margin) {
        worst = std::min(worst, margin);
        if (margin < 0.0) ++violations;
    };

    for (int i = 0; i < kSamples; ++i) {
        const double mu = rng.uniform01() * 4.0;
        const double x1 = std::exp(rng.uniform(-6.0, 12.0));
        const double x2 = std::exp(rng.uniform(-6.0, 12.0));
        const double lo = std::min(x1, x2), hi = std::max(x1, x2);

        // strict monotonicity in x and monotone in mu
        if (lo < hi) track(psi(hi, mu) - psi(lo, mu));
        track(psi(lo, mu + 0.5) - psi(lo, mu));
        // midpoint convexity
        track(0.5 * (psi(x1, mu) + psi(x2, mu)) - psi(0.5 * (x1 + x2), mu));
        // submultiplicativity for c >= 1
        const double c = 1.0 + std::exp(rng.uniform(-4.0, 4.0));
        track(psi(c, mu) * psi(lo, mu) - psi(c * lo, mu));
        // subadditivity with the psi(2)/2 factor
        track(0.5 * psi(2.0, mu) * (psi(x1, mu) + psi(x2, mu)) - psi(x1 + x2, mu));
    }

    report.worst_margin = worst;
    report.violation_rate = static_cast<double>(violations) / (5.0 * kSamples);
    report.pass = violations == 0;
    report.details.push_back({{"samples", kSamples}});
    return report;
}

VerificationReport phi_fd_report(double horizon, std::uint64_t seed) {
    VerificationReport report;
    report.check_name = "phi_jet_finite_differences";
    report.scenario_hash = to_hex(fnv1a64("phi_fd"));
    report.seed = seed;
    report.noise_band = 1e-6;

    CounterRng rng(seed, fnv1a64("phi_fd"));
    constexpr int kSamples = 2000;
    constexpr double kStep = 1e-5;
    double worst_rel = 0.0;

    for (int i = 0; i < kSamples; ++i) {
        const double gamma = rng.uniform(0.2, 3.0);
        const CriticalParams params{.gamma = gamma, .beta = 0.0, .horizon = horizon};
        const double t = rng.uniform(0.05, horizon * 0.9);
        const double s = rng.uniform(t + 0.01, horizon);
        const double x = std::exp(rng.uniform(-3.0, 4.0));
        const PhiPoint point{.t = t, .s = s, .x = x};
        const PhiJet jet = phi_jet(point, params);

        auto value_at = [&](double ss, double xx) {
            return phi_jet({.t = t, .s = ss, .x = xx}, params).value;
        };
        auto slope_at = [&](double ss, double xx) {
            return phi_jet({.t = t, .s = ss, .x = xx}, params).d_x;
        };
        const double fd_x = (value_at(s, x + kStep) - value_at(s, x - kStep)) / (2.0 * kStep);
        // second derivative via the first difference of d_x; a second
        // difference of the value sits at the rounding floor at this step
        const double fd_xx = (slope_at(s, x + kStep) - slope_at(s, x - kStep)) / (2.0 * kStep);
        const double fd_s = (value_at(s + kStep, x) - value_at(s - kStep, x)) / (2.0 * kStep);

        worst_rel = std::max(worst_rel, std::fabs(fd_x - jet.d_x) / std::fabs(jet.d_x));
        worst_rel = std::max(worst_rel, std::fabs(fd_xx - jet.d_xx) / std::fabs(jet.d_xx));
        worst_rel = std::max(worst_rel, std::fabs(fd_s - jet.d_s) / std::fabs(jet.d_s));
    }

    report.worst_margin = 1e-6 - worst_rel;
    report.violation_rate = 0.0;
    report.pass = worst_rel <= 1e-6;
    report.details.push_back({{"samples", kSamples}, {"worst_relative_error", worst_rel}});
    return report;
}

VerificationReport constants_report(double horizon, std::uint64_t seed) {
    VerificationReport report;
    report.check_name = "constants_K_C_moment";
    report.scenario_hash = to_hex(fnv1a64("constants"));
    report.seed = seed;
    report.noise_band = 0.0;

    bool ok = true;
    nlohmann::json checks = nlohmann::json::array();
    auto add = [&](const std::string& name, bool value) {
        ok = ok && value;
        checks.push_back({{"name", name}, {"pass", value}});
    };

    const CriticalParams zero{.gamma = 0.0, .beta = 0.0, .horizon = horizon};
    add("K(gamma=0) == 1+e", growth_constant_K(zero) == 1.0 + std::numbers::e);
    add("C(beta=0,gamma=0) == 1+e", apriori_constant_C(zero) == 1.0 + std::numbers::e);

    const CriticalParams base{.gamma = 1.0, .beta = 0.0, .horizon = horizon};
    const CriticalParams more_beta{.gamma = 1.0, .beta = 1.0, .horizon = horizon};
    add("C nondecreasing in beta", apriori_constant_C(more_beta) >= apriori_constant_C(base));
    const CriticalParams more_gamma{.gamma = 2.0, .beta = 0.0, .horizon = horizon};
    add("C nondecreasing in gamma", apriori_constant_C(more_gamma) >= apriori_constant_C(base));
    const CriticalParams big{.gamma = 3.0, .beta = 2.0, .horizon = horizon};
    add("C finite at gamma=3, beta=2", std::isfinite(apriori_constant_C(big)));

    const CriticalParams unit{.gamma = 1.0, .beta = 0.0, .horizon = horizon};
    add("moment bound at lambda=0 is 1", exp_moment_bound(0.0, 0.5 * horizon, unit) == 1.0);
    add("moment bound at t=T is 1", exp_moment_bound(123.0, horizon, unit) == 1.0);

    bool sqrt3_ok = true;
    for (int i = 0; i <= 10; ++i) {
        const double t = 0.75 * horizon + 0.25 * horizon * i / 10.0;
        const CriticalParams p{.gamma = 0.7, .beta = 0.0, .horizon = horizon};
        const double lambda = 1.0 / (p.gamma * p.gamma * t);
        if (exp_moment_bound(lambda, t, p) > std::sqrt(3.0) + 1e-12) sqrt3_ok = false;
    }
    add("moment bound <= sqrt(3) on [3T/4, T] at lambda=1/(gamma^2 t)", sqrt3_ok);

    report.pass = ok;
    report.worst_margin = ok ? 0.0 : -1.0;
    report.details = checks;
    return report;
}

VerificationReport girsanov_mc_report(double horizon, std::uint64_t seed) {
    const CriticalParams params{.gamma = 0.5, .beta = 0.0, .horizon = horizon};
    const TimeGrid grid = TimeGrid::uniform(horizon, 32);
    const auto ensemble = simulate_brownian(grid, 1, 100000, seed, 4);

    // tight case: constant q = gamma, moderate lambda (finite variance)
    const int t_index = grid.n_steps() / 4;
    const double t = grid.time(t_index);
    const double lambda = 0.2 / (params.gamma * params.gamma * (horizon - t));
    VerificationReport tight =
        girsanov_moment_check_constant(params.gamma, *ensemble, t_index, lambda, params);

    // paper bound case: lambda = 1/(gamma^2 t) at t = 3T/4
    int idx34 = grid.index_at(0.75 * horizon);
    if (grid.time(idx34) < 0.75 * horizon) ++idx34;
    const double t34 = grid.time(idx34);
    const double lambda34 = 1.0 / (params.gamma * params.gamma * t34);
    VerificationReport paper_case =
        girsanov_moment_check_constant(params.gamma, *ensemble, idx34, lambda34, params);

    VerificationReport report;
    report.check_name = "girsanov_moment_mc";
    report.scenario_hash = to_hex(fnv1a64("girsanov_mc"));
    report.seed = seed;
    report.pass = tight.pass && paper_case.pass;
    report.worst_margin = std::min(tight.worst_margin, paper_case.worst_margin);
    report.violation_rate = 0.0;
    report.noise_band = 3.0;
    report.details.push_back({{"tight", tight.to_json()}, {"bound_sqrt3", paper_case.to_json()}});
    return report;
}

int run_verify_functions(const RunConfig& config) {
    if (!config.seed) throw ConfigError("verify-functions: --seed is required");
    const std::uint64_t seed = *config.seed;

    double horizon = 1.0;
    if (config.config_path) {
        ScenarioConfig sc = ScenarioConfig::parse(read_file(*config.config_path));
        for (const auto& [k, v] : config.overrides) sc.set(k, v);
        sc.validate();
        horizon = sc.horizon;
    } else if (!config.overrides.empty()) {
        throw ConfigError("verify-functions: --set requires --config");
    }

    ArtifactWriter writer(config.output_dir);
    bool all_pass = true;
    try {
        std::vector<VerificationReport> reports;
        reports.push_back(hjb_sweep_report(horizon, 1.0, seed));
        reports.push_back(drift_residual_report(horizon, seed));
        reports.push_back(sandwich_report(horizon, seed));
        reports.push_back(young_gap_report(seed));
        reports.push_back(psi_properties_report(seed));
        reports.push_back(phi_fd_report(horizon, seed));
        reports.push_back(constants_report(horizon, seed));
        reports.push_back(girsanov_mc_report(horizon, seed));
        if (config.negative_controls) {
            reports.push_back(hjb_sweep_report(horizon, 0.5, seed));
        }
        for (const auto& r : reports) {
            writer.write_report(r, "report_" + r.check_name + ".json");
            std::cout << (r.pass ? "[PASS] " : "[FAIL] ") << r.check_name
                      << " worst_margin=" << format_double(r.worst_margin) << "\n";
            all_pass = all_pass && r.pass;
        }
        writer.finalize_manifest("verify-functions", to_hex(fnv1a64("verify-functions")), seed);
    } catch (...) {
        writer.abort_cleanup();
        throw;
    }
    return all_pass ? 0 : 1;
}

// ---- scenario-driven commands ------------------------------------------

ScenarioConfig load_scenario_config(const RunConfig& config) {
    if (!config.config_path) throw ConfigError(config.command + ": --config is required");
    ScenarioConfig sc = ScenarioConfig::parse(read_file(*config.config_path));
    for (const auto& [k, v] : config.overrides) sc.set(k, v);
    if (config.seed) sc.seed = *config.seed;
    sc.validate();
    return sc;
}

int run_solve(const RunConfig& config) {
    const ScenarioConfig sc = load_scenario_config(config);
    const Scenario scenario = build_scenario(sc);

    const RegressionConfig reg{};
    SolutionField field = solve_backward_euler(scenario.generator, scenario.xi,
                                               scenario.ensemble, reg);
    field.meta.terminal = scenario.terminal.name;

    ArtifactWriter writer(config.output_dir);
    try {
        writer.write_solution_csv(field, "solution.csv");
        nlohmann::json meta{{"config_hash", sc.hash_hex()},
                            {"seed", sc.seed},
                            {"generator", field.meta.generator},
                            {"terminal", field.meta.terminal},
                            {"basis_degree", field.meta.basis_degree},
                            {"ridge", field.meta.ridge},
                            {"truncation", nullptr},
                            {"n_paths", field.n_paths()},
                            {"n_steps", field.grid.n_steps()},
                            {"horizon", field.grid.horizon()},
                            {"dim", field.dim},
                            {"y0_mean", field.mean_y(0)}};
        writer.write("solution.meta.json", meta.dump(2) + "\n");
        writer.finalize_manifest("solve", sc.hash_hex(), sc.seed);
    } catch (...) {
        writer.abort_cleanup();
        throw;
    }
    std::cout << "[PASS] solve y0_mean=" << format_double(field.mean_y(0)) << "\n";
    return 0;
}

int run_estimate(const RunConfig& config) {
    const ScenarioConfig sc = load_scenario_config(config);
    const Scenario scenario = build_scenario(sc);

    const RegressionConfig reg{};
    SolutionField field = solve_backward_euler(scenario.generator, scenario.xi,
                                               scenario.ensemble, reg);
    field.meta.terminal = scenario.terminal.name;
    const auto plan = std::make_shared<const RegressionPlan>(scenario.ensemble, reg);

    ArtifactWriter writer(config.output_dir);
    bool all_pass = true;
    try {
        std::vector<VerificationReport> reports;

        const int n = scenario.grid.n_steps();
        for (const int anchor : {std::max(1, n / 4), std::max(1, n / 2), std::max(1, 3 * n / 4)}) {
            if (scenario.generator.has_tag(GeneratorTag::H1) ||
                scenario.generator.has_tag(GeneratorTag::OneSided)) {
                VerificationReport r = supermartingale_test(field, scenario.generator, anchor,
                                                            scenario.params, reg, 0.02, plan);
                r.check_name += "/anchor" + std::to_string(anchor);
                reports.push_back(std::move(r));
            }
        }

        reports.push_back(check_apriori_bound(field, scenario.generator, scenario.xi,
                                              scenario.params, reg, 0.01, plan));

        // thresholds from the pooled psi quantiles (strictly increasing)
        {
            std::vector<double> pooled;
            pooled.reserve(1000);
            const int m = field.n_paths();
            const int stride = std::max(1, m / 250);
            for (int i = 0; i < m; i += stride) {
                for (int k = 0; k <= n; k += std::max(1, n / 4)) {
                    pooled.push_back(psi(std::fabs(field.y_at(i, k)),
                                         scenario.params.gamma *
                                             std::sqrt(scenario.grid.time(k))));
                }
            }
            std::sort(pooled.begin(), pooled.end());
            std::vector<double> thresholds;
            double last = 0.0;
            for (const double q : {0.5, 0.75, 0.9, 0.99}) {
                double v = pooled[static_cast<std::size_t>(q * (pooled.size() - 1))];
                v = std::max(v, last * (1.0 + 1e-9) + 1e-12);
                thresholds.push_back(v);
                last = v;
            }
            reports.push_back(class_d_diagnostic(field, scenario.params, thresholds));
        }

        if (config.negative_controls) {
            // understated gamma: run a 3x-aggressive driver at a realized Z
            // scale large enough that the drift deficit dominates phi_s, then
            // audit it against the understated constant
            GeneratorSpec hot = builtin_generator("abs_z", scenario.generator.beta,
                                                  3.0 * scenario.generator.gamma);
            hot.name = "abs_z#overdriven";
            std::vector<double> xi_hot(static_cast<std::size_t>(scenario.ensemble->n_paths()));
            const int last = scenario.grid.n_steps();
            for (int i = 0; i < scenario.ensemble->n_paths(); ++i)
                xi_hot[static_cast<std::size_t>(i)] = 30.0 * scenario.ensemble->state(i, last);
            SolutionField hot_field =
                solve_backward_euler(hot, xi_hot, scenario.ensemble, reg, {.plan = plan});
            hot_field.meta.terminal = "scaled_brownian";
            GeneratorSpec claimed = hot;
            claimed.gamma = scenario.generator.gamma;
            VerificationReport r = supermartingale_test(hot_field, claimed, std::max(1, n / 2),
                                                        scenario.params, reg, 0.02, plan);
            r.check_name = "supermartingale_negative_control";
            r.details.push_back({{"note", "overdriven |z| driver audited against an "
                                          "understated gamma; expected to FAIL"}});
            reports.push_back(std::move(r));
        }

        for (const auto& r : reports) {
            std::string file_name = "report_" + r.check_name + ".json";
            std::replace(file_name.begin(), file_name.end(), '/', '_');
            writer.write_report(r, file_name);
            std::cout << (r.pass ? "[PASS] " : "[FAIL] ") << r.check_name
                      << " violation_rate=" << format_double(r.violation_rate) << "\n";
            all_pass = all_pass && r.pass;
        }
        writer.finalize_manifest("estimate", sc.hash_hex(), sc.seed);
    } catch (...) {
        writer.abort_cleanup();
        throw;
    }
    return all_pass ? 0 : 1;
}

int run_uniqueness(const RunConfig& config) {
    const ScenarioConfig sc = load_scenario_config(config);
    const Scenario scenario = build_scenario(sc);
    if (!scenario.generator.has_tag(GeneratorTag::H2) &&
        !scenario.generator.has_tag(GeneratorTag::Monotone))
        throw ConfigError("uniqueness: scenario generator must carry tag H2 or monotone");

    const double horizon = scenario.grid.horizon();
    const double cutoff = horizon / 5.0; // (3/4)^5 T >= cutoff > (3/4)^6 T: depth 5
    const double tolerance = 5e-2;

    const SolverRoute route_a{SolveMethod::BackwardEuler, RegressionConfig{}, 64, 1e-10};
    const SolverRoute route_b{SolveMethod::Picard, RegressionConfig{}, 64, 1e-6};

    ArtifactWriter writer(config.output_dir);
    bool all_pass = true;
    try {
        VerificationReport experiment =
            uniqueness_experiment(scenario.generator, scenario.terminal, scenario.ensemble,
                                  route_a, route_b, cutoff, tolerance);
        all_pass = all_pass && experiment.pass;

        // discrepancy curve CSV
        {
            std::string csv = "interval_index,left,right,sup_mean_abs_dY,noise_model\r\n";
            const auto& intervals = experiment.details.at(0).at("intervals");
            for (const auto& row : intervals) {
                csv += std::to_string(row.at("index").get<int>()) + "," +
                       format_double(row.at("left").get<double>()) + "," +
                       format_double(row.at("right").get<double>()) + "," +
                       format_double(row.at("sup_mean_abs_dY").get<double>()) + "," +
                       format_double(tolerance) + "\r\n";
            }
            writer.write("discrepancy.csv", csv);
        }
        writer.write_report(experiment, "report_uniqueness.json");
        std::cout << (experiment.pass ? "[PASS] " : "[FAIL] ") << experiment.check_name << "\n";

        // Girsanov moment audit with the linearization coefficients
        {
            SolutionField fa = solve_route(scenario.generator, scenario.xi, scenario.ensemble,
                                           route_a);
            SolutionField fb = solve_route(scenario.generator, scenario.xi, scenario.ensemble,
                                           route_b);
            const LinearizedCoeffs coeffs = linearize(scenario.generator, fa, fb);
            int idx34 = scenario.grid.index_at(0.75 * horizon);
            if (scenario.grid.time(idx34) < 0.75 * horizon) ++idx34;
            const double t34 = scenario.grid.time(idx34);
            const double lambda = 1.0 / (scenario.params.gamma * scenario.params.gamma * t34);
            VerificationReport g = girsanov_moment_check(coeffs.v, *scenario.ensemble, idx34,
                                                         lambda, scenario.params);
            g.check_name = "girsanov_linearized_v";
            g.details.push_back({{"linearization_max_residual", coeffs.max_residual}});
            writer.write_report(g, "report_girsanov.json");
            std::cout << (g.pass ? "[PASS] " : "[FAIL] ") << g.check_name << "\n";
            all_pass = all_pass && g.pass;

            const SubintervalCascade cascade = subinterval_cascade(horizon, cutoff);
            VerificationReport audit = delta_bound_audit(coeffs, fa, fb, cascade.intervals[0],
                                                         scenario.params, 1.0);
            writer.write_report(audit, "report_delta_audit.json");
            std::cout << (audit.pass ? "[PASS] " : "[FAIL] ") << audit.check_name << "\n";
            all_pass = all_pass && audit.pass;
        }

        if (config.negative_controls) {
            // different terminal: discrepancy must blow past the tolerance
            TerminalSpec shifted = scenario.terminal;
            shifted.name = scenario.terminal.name + "#shifted";
            auto inner = scenario.terminal.evaluate;
            shifted.evaluate = [inner](std::span<const double> b) { return inner(b) + 2.0; };
            const auto xi_shifted = eval_terminal(shifted, *scenario.ensemble);
            SolutionField fa = solve_route(scenario.generator, scenario.xi, scenario.ensemble,
                                           route_a);
            SolutionField fb = solve_route(scenario.generator, xi_shifted, scenario.ensemble,
                                           route_a);
            const SubintervalCascade cascade = subinterval_cascade(horizon, cutoff);
            const auto disc = discrepancy_by_interval(fa, fb, cascade);
            VerificationReport control;
            control.check_name = "uniqueness_negative_control";
            control.scenario_hash = sc.hash_hex();
            control.seed = sc.seed;
            control.noise_band = tolerance;
            double max_disc = 0.0;
            for (const double v : disc) max_disc = std::max(max_disc, v);
            control.worst_margin = tolerance - max_disc; // negative: control detected
            control.pass = max_disc <= tolerance;        // expected to FAIL
            control.violation_rate = control.pass ? 0.0 : 1.0;
            control.details.push_back({{"max_discrepancy", max_disc},
                                       {"tolerance", tolerance},
                                       {"ratio_over_noise", max_disc / tolerance}});
            writer.write_report(control, "report_uniqueness_negative_control.json");
            std::cout << (control.pass ? "[PASS] " : "[FAIL] ") << control.check_name << "\n";
            all_pass = all_pass && control.pass;
        }

        writer.finalize_manifest("uniqueness", sc.hash_hex(), sc.seed);
    } catch (...) {
        writer.abort_cleanup();
        throw;
    }
    return all_pass ? 0 : 1;
}

int run_report(const RunConfig& config) {
    const fs::path dir = config.output_dir;
    if (!fs::exists(dir)) throw ConfigError("report: output dir does not exist: " + dir.string());
    bool all_pass = true;
    int count = 0;
    std::vector<fs::path> files;
    for (const auto& entry : fs::directory_iterator(dir)) {
        if (entry.path().extension() == ".json" && entry.path().filename() != "manifest.json" &&
            entry.path().filename().string().rfind("report_", 0) == 0) {
            files.push_back(entry.path());
        }
    }
    std::sort(files.begin(), files.end());
    for (const auto& file : files) {
        const auto j = nlohmann::json::parse(read_file(file));
        const VerificationReport r = VerificationReport::from_json(j);
        std::cout << (r.pass ? "[PASS] " : "[FAIL] ") << r.check_name
                  << " worst_margin=" << format_double(r.worst_margin)
                  << " violation_rate=" << format_double(r.violation_rate) << "\n";
        all_pass = all_pass && r.pass;
        ++count;
    }
    if (count == 0) throw ConfigError("report: no report_*.json files in " + dir.string());
    return all_pass ? 0 : 1;
}

} // namespace

int verify_manifest(const std::filesystem::path& dir) {
    const fs::path manifest_path = dir / "manifest.json";
    if (!fs::exists(manifest_path)) {
        std::cerr << "no manifest at " << manifest_path << "\n";
        return 1;
    }
    const auto manifest = nlohmann::json::parse(read_file(manifest_path));
    bool ok = true;
    for (const auto& artifact : manifest.at("artifacts")) {
        const std::string rel = artifact.at("path").get<std::string>();
        const std::string want = artifact.at("fnv1a64").get<std::string>();
        const fs::path full = dir / rel;
        if (!fs::exists(full)) {
            std::cerr << "missing artifact: " << rel << "\n";
            ok = false;
            continue;
        }
        const std::string got = to_hex(fnv1a64_file(full.string()));
        if (got != want) {
            std::cerr << "hash mismatch for " << rel << ": manifest " << want << ", file " << got
                      << "\n";
            ok = false;
        }
    }
    std::cout << (ok ? "[PASS] manifest check\n" : "[FAIL] manifest check\n");
    return ok ? 0 : 1;
}

int run_command(const RunConfig& config) {
    try {
        if (config.check_only) return verify_manifest(config.output_dir);
        if (config.command == "verify-functions") return run_verify_functions(config);
        if (config.command == "solve") return run_solve(config);
        if (config.command == "estimate") return run_estimate(config);
        if (config.command == "uniqueness") return run_uniqueness(config);
        if (config.command == "report") return run_report(config);
        throw ConfigError("unknown command: " + config.command);
    } catch (const ConfigError& err) {
        std::cerr << "config error: " << err.what() << "\n";
        return 2;
    } catch (const std::exception& err) {
        std::cerr << "error: " << err.what() << "\n";
        return 1;
    }
}

} // namespace bsdelab
