#include <array>
#include <cmath>
#include <vector>

#include "doctest.h"

#include "bsdelab/errors.hpp"
#include "bsdelab/uniqueness.hpp"

using namespace bsdelab;

namespace {

EnsemblePtr make_ensemble(int n_steps, int n_paths, std::uint64_t seed) {
    return simulate_brownian(TimeGrid::uniform(1.0, n_steps), 1, n_paths, seed, 4);
}

std::vector<double> brownian_xi(const PathEnsemble& ens) {
    std::vector<double> xi(static_cast<std::size_t>(ens.n_paths()));
    for (int i = 0; i < ens.n_paths(); ++i)
        xi[static_cast<std::size_t>(i)] = ens.state(i, ens.grid().n_steps());
    return xi;
}

} // namespace

TEST_CASE("linearize: identical fields yield zero coefficients") {
    const auto ens = make_ensemble(10, 500, 3);
    const auto gen = builtin_generator("lipschitz_mixed", 0.5, 1.0);
    const auto xi = brownian_xi(*ens);
    const auto field = solve_backward_euler(gen, xi, ens, RegressionConfig{});
    const auto coeffs = linearize(gen, field, field);
    for (const double u : coeffs.u) CHECK(u == 0.0);
    for (const double v : coeffs.v) CHECK(v == 0.0);
    CHECK(coeffs.max_residual == 0.0);
}

TEST_CASE("linearize: exact slopes for linear and |z| drivers") {
    const auto ens = make_ensemble(8, 2000, 5);
    const auto xi1 = brownian_xi(*ens);
    std::vector<double> xi2 = xi1;
    for (double& v : xi2) v += 1.0;

    SUBCASE("pure linear drift: u = -beta wherever dY != 0") {
        const double beta = 0.7;
        const auto gen = builtin_generator("linear_y", beta, 1.0);
        const auto plan = std::make_shared<const RegressionPlan>(ens, RegressionConfig{});
        SolveOptions options;
        options.plan = plan;
        const auto f1 = solve_backward_euler(gen, xi1, ens, RegressionConfig{}, options);
        const auto f2 = solve_backward_euler(gen, xi2, ens, RegressionConfig{}, options);
        const auto coeffs = linearize(gen, f1, f2);
        const int n = 8, d = 1;
        for (int i = 0; i < 2000; i += 41) {
            for (int k = 0; k < n; ++k) {
                if (std::fabs(f1.y_at(i, k) - f2.y_at(i, k)) > 1e-9) {
                    CHECK(coeffs.u_at(i, k, n) == doctest::Approx(-beta).epsilon(1e-12));
                }
                CHECK(coeffs.v_at(i, k, 0, n, d) == 0.0);
            }
        }
        CHECK(coeffs.max_residual <= 1e-12);
    }

    SUBCASE("|z| driver: v is the exact secant slope in [-gamma, gamma]") {
        const double gamma = 0.8;
        const auto gen = builtin_generator("abs_z", 0.0, gamma);
        const auto plan = std::make_shared<const RegressionPlan>(ens, RegressionConfig{});
        SolveOptions options;
        options.plan = plan;
        const auto f1 = solve_backward_euler(gen, xi1, ens, RegressionConfig{}, options);
        RegressionConfig reg3;
        reg3.basis_degree = 3;
        const auto f2 = solve_backward_euler(gen, xi2, ens, reg3);
        const auto coeffs = linearize(gen, f1, f2);
        const int n = 8, d = 1;
        for (int i = 0; i < 2000; i += 23) {
            for (int k = 0; k < n; ++k) {
                const double v = coeffs.v_at(i, k, 0, n, d);
                CHECK(v >= -gamma - 1e-9);
                CHECK(v <= gamma + 1e-9);
            }
        }
        CHECK(coeffs.max_residual <= 1e-12);
    }
}

TEST_CASE("linearize: coefficient bounds for Lipschitz builtins") {
    const auto ens = make_ensemble(6, 3000, 7);
    const auto xi1 = brownian_xi(*ens);
    std::vector<double> xi2 = xi1;
    for (std::size_t i = 0; i < xi2.size(); ++i) xi2[i] = std::sin(3.0 * xi2[i]);

    for (const char* name : {"zero", "linear_y", "abs_z", "lipschitz_mixed"}) {
        const auto gen = builtin_generator(name, 0.6, 0.9);
        const auto plan = std::make_shared<const RegressionPlan>(ens, RegressionConfig{});
        SolveOptions options;
        options.plan = plan;
        const auto f1 = solve_backward_euler(gen, xi1, ens, RegressionConfig{}, options);
        const auto f2 = solve_backward_euler(gen, xi2, ens, RegressionConfig{}, options);
        const auto coeffs = linearize(gen, f1, f2);
        INFO(name);
        for (const double u : coeffs.u) CHECK(std::fabs(u) <= 0.6 + 1e-9);
        for (const double v : coeffs.v) CHECK(std::fabs(v) <= 0.9 + 1e-9);

        // residual small relative to the difference magnitudes
        CHECK(coeffs.max_residual <= 1e-9 * (1.0 + 100.0));
    }
}

TEST_CASE("subinterval cascade") {
    SUBCASE("worked lists") {
        const auto c1 = subinterval_cascade(1.0, 0.5);
        REQUIRE(c1.intervals.size() == 2);
        CHECK(c1.intervals[0].left == 0.75);
        CHECK(c1.intervals[0].right == 1.0);
        CHECK(c1.intervals[1].left == 0.5625);
        CHECK(c1.intervals[1].right == 0.75);

        const auto c2 = subinterval_cascade(1.0, 0.3);
        REQUIRE(c2.intervals.size() >= 3);
        CHECK(c2.intervals[2].left == 27.0 / 64.0);
        CHECK(c2.intervals[2].right == 9.0 / 16.0);
    }

    SUBCASE("telescoping endpoints, bit-exact adjacency, coverage") {
        const auto cascade = subinterval_cascade(1.0, 0.01);
        CHECK(cascade.depth == static_cast<int>(cascade.intervals.size()));
        double expected_left = 1.0;
        for (int k = 0; k < cascade.depth; ++k) {
            expected_left *= 0.75;
            CHECK(cascade.intervals[static_cast<std::size_t>(k)].left == expected_left);
            if (k > 0) {
                CHECK(cascade.intervals[static_cast<std::size_t>(k)].right ==
                      cascade.intervals[static_cast<std::size_t>(k - 1)].left);
            }
        }
        CHECK(cascade.intervals.front().right == 1.0);
        // union of intervals plus [0, left_last] covers [0, T] exactly
        CHECK(cascade.intervals.back().left < 0.01 / 0.75 + 1e-15);
    }

    SUBCASE("rejects bad cutoffs") {
        CHECK_THROWS_AS(subinterval_cascade(1.0, 0.0), ConfigError);
        CHECK_THROWS_AS(subinterval_cascade(1.0, 2.0), ConfigError);
    }
}

TEST_CASE("girsanov moment check") {
    const CriticalParams params{.gamma = 0.5, .beta = 0.0, .horizon = 1.0};
    const auto ens = make_ensemble(32, 50000, 11);

    SUBCASE("lambda = 0 estimates exactly 1") {
        const auto report = girsanov_moment_check_constant(0.5, *ens, 8, 0.0, params);
        CHECK(report.pass);
        CHECK(report.details.at(0).at("estimate").get<double>() == 1.0);
    }

    SUBCASE("constant q attains the bound within 3 standard errors") {
        const int t_index = 8;
        const double t = ens->grid().time(t_index);
        const double lambda = 0.2 / (params.gamma * params.gamma * (1.0 - t));
        const auto report = girsanov_moment_check_constant(0.5, *ens, t_index, lambda, params);
        CHECK(report.pass);
        const double est = report.details.at(0).at("estimate").get<double>();
        const double bound = report.details.at(0).at("bound").get<double>();
        // exact Gaussian value equals the bound for constant |q| = gamma
        CHECK(std::fabs(est - bound) <= 3.0 * report.noise_band);
    }

    SUBCASE("paper regime: lambda = 1/(gamma^2 t) at t = 3T/4 respects sqrt(3)") {
        const int t_index = 24; // t = 0.75
        const double lambda = 1.0 / (params.gamma * params.gamma * 0.75);
        const auto report = girsanov_moment_check_constant(0.5, *ens, t_index, lambda, params);
        CHECK(report.pass);
        const double bound = report.details.at(0).at("bound").get<double>();
        CHECK(bound <= std::sqrt(3.0) + 1e-12);
    }

    SUBCASE("inadmissible lambda throws") {
        const double lambda = 10.0 / (params.gamma * params.gamma);
        CHECK_THROWS_AS(girsanov_moment_check_constant(0.5, *ens, 0, lambda, params),
                        std::domain_error);
    }
}

TEST_CASE("delta bound audit") {
    const CriticalParams params{.gamma = 0.5, .beta = 0.0, .horizon = 1.0};
    const auto ens = make_ensemble(40, 5000, 13);
    const auto gen = builtin_generator("abs_z", 0.0, 0.5);
    const auto xi = brownian_xi(*ens);

    SUBCASE("identical fields: zero majorant at every level") {
        const auto field = solve_backward_euler(gen, xi, ens, RegressionConfig{});
        const auto coeffs = linearize(gen, field, field);
        const auto report =
            delta_bound_audit(coeffs, field, field, {0.75, 1.0}, params, 1.0);
        CHECK(report.pass);
        for (const auto& detail : report.details) {
            if (detail.contains("majorants")) {
                for (const double v : detail.at("majorants").get<std::vector<double>>())
                    CHECK(v == 0.0);
            }
        }
    }

    SUBCASE("independent routes: pathwise split holds, majorant near noise") {
        const auto f1 = solve_backward_euler(gen, xi, ens, RegressionConfig{});
        RegressionConfig reg3;
        reg3.basis_degree = 3;
        const auto f2 = solve_backward_euler(gen, xi, ens, reg3);
        const auto coeffs = linearize(gen, f1, f2);
        const auto report = delta_bound_audit(coeffs, f1, f2, {0.75, 1.0}, params, 0.5);
        CHECK(report.pass);
        CHECK(report.worst_margin >= -1e-9);
    }

    SUBCASE("interval admissibility is enforced") {
        const auto field = solve_backward_euler(gen, xi, ens, RegressionConfig{});
        const auto coeffs = linearize(gen, field, field);
        CHECK_THROWS_AS(delta_bound_audit(coeffs, field, field, {0.5, 1.0}, params, 1.0),
                        ConfigError);
    }
}

TEST_CASE("uniqueness experiment") {
    SUBCASE("zero generator: both routes coincide exactly") {
        const auto ens = make_ensemble(20, 5000, 17);
        const auto gen = builtin_generator("zero", 0.0, 0.5);
        const auto terminal = brownian_terminal();
        const SolverRoute euler{SolveMethod::BackwardEuler, RegressionConfig{}, 64, 1e-10};
        const SolverRoute picard{SolveMethod::Picard, RegressionConfig{}, 64, 1e-10};
        const auto report =
            uniqueness_experiment(gen, terminal, ens, euler, picard, 0.2, 5e-2);
        CHECK(report.pass);
        // discrepancy is regression-noise only; for g = 0 the two routes are identical
        for (const auto& row : report.details.at(0).at("intervals")) {
            CHECK(row.at("sup_mean_abs_dY").get<double>() == 0.0);
        }
    }

    SUBCASE("Lipschitz scenario with bounded terminal") {
        const auto ens = make_ensemble(50, 20000, 19);
        const auto gen = builtin_generator("lipschitz_mixed", 0.5, 0.5);
        TerminalSpec bounded = brownian_terminal();
        bounded.name = "brownian_clamped";
        bounded.evaluate = [](std::span<const double> b) {
            return std::clamp(b.empty() ? 0.0 : b[0], -2.0, 2.0);
        };
        const SolverRoute euler{SolveMethod::BackwardEuler, RegressionConfig{}, 64, 1e-10};
        const SolverRoute picard{SolveMethod::Picard, RegressionConfig{}, 64, 1e-8};
        const auto report =
            uniqueness_experiment(gen, bounded, ens, euler, picard, 0.2, 5e-2);
        CHECK(report.pass);
    }

    SUBCASE("identical routes are rejected") {
        const auto ens = make_ensemble(10, 500, 23);
        const auto gen = builtin_generator("abs_z", 0.0, 0.5);
        const SolverRoute route{SolveMethod::BackwardEuler, RegressionConfig{}, 64, 1e-10};
        CHECK_THROWS_AS(
            uniqueness_experiment(gen, brownian_terminal(), ens, route, route, 0.2, 5e-2),
            ConfigError);
    }

    SUBCASE("different terminals produce discrepancy far beyond noise") {
        const auto ens = make_ensemble(20, 5000, 29);
        const auto gen = builtin_generator("abs_z", 0.0, 0.5);
        const auto xi1 = brownian_xi(*ens);
        std::vector<double> xi2 = xi1;
        for (double& v : xi2) v += 2.0;
        const auto f1 = solve_backward_euler(gen, xi1, ens, RegressionConfig{});
        const auto f2 = solve_backward_euler(gen, xi2, ens, RegressionConfig{});
        const auto cascade = subinterval_cascade(1.0, 0.2);
        const auto disc = discrepancy_by_interval(f1, f2, cascade);
        for (const double v : disc) CHECK(v > 10.0 * 5e-2);
    }
}
