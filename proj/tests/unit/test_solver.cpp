#include <algorithm>
#include <array>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>
#include <vector>

#include "doctest.h"

#include "bsdelab/errors.hpp"
#include "bsdelab/solver.hpp"
#include "bsdelab/terminal.hpp"

using namespace bsdelab;

namespace {

EnsemblePtr make_ensemble(int n_steps, int n_paths, std::uint64_t seed, double horizon = 1.0) {
    return simulate_brownian(TimeGrid::uniform(horizon, n_steps), 1, n_paths, seed, 4);
}

std::vector<double> terminal_brownian_samples(const PathEnsemble& ens) {
    std::vector<double> xi(static_cast<std::size_t>(ens.n_paths()));
    for (int i = 0; i < ens.n_paths(); ++i)
        xi[static_cast<std::size_t>(i)] = ens.state(i, ens.grid().n_steps());
    return xi;
}

} // namespace

TEST_CASE("terminal truncation") {
    const std::vector<double> xi{5.0, -4.0, 0.0, 2.5, -1.5};
    const auto out = truncate_terminal(xi, 3, 2);
    CHECK(out[0] == 3.0);
    CHECK(out[1] == -2.0);
    CHECK(out[2] == 0.0);
    CHECK(out[3] == 2.5);
    CHECK(out[4] == -1.5);
    for (const double v : out) {
        CHECK(v <= 3.0);
        CHECK(v >= -2.0);
    }
    CHECK_THROWS_AS(truncate_terminal(xi, 0, 1), std::invalid_argument);
}

TEST_CASE("generator truncation keeps (y, z)-increments") {
    const double gamma = 1.0;
    GeneratorSpec shifted{.name = "shifted",
                          .class_tags = {GeneratorTag::H1, GeneratorTag::H2},
                          .beta = 0.5,
                          .gamma = gamma,
                          .evaluate = [gamma](double, double y, std::span<const double> z) {
                              double nz = 0.0;
                              for (double c : z) nz += c * c;
                              return 5.0 + 0.5 * std::sin(y) + gamma * std::sqrt(nz);
                          }};

    const auto trunc = truncate_generator(shifted, 3, 1);
    CHECK(trunc.at_zero(0.0) == doctest::Approx(3.0).epsilon(1e-15));
    CHECK(trunc.class_tags == shifted.class_tags);

    // difference audit: increments unchanged
    for (int i = 0; i < 1000; ++i) {
        const double y1 = std::sin(i * 0.77) * 10.0;
        const double y2 = std::cos(i * 0.31) * 10.0;
        const std::array<double, 1> z1{std::sin(i * 1.3) * 5.0};
        const std::array<double, 1> z2{std::cos(i * 2.1) * 5.0};
        const double lhs = trunc(0.1, y1, z1) - trunc(0.1, y2, z2);
        const double rhs = shifted(0.1, y1, z1) - shifted(0.1, y2, z2);
        CHECK(lhs == doctest::Approx(rhs).epsilon(1e-12));
    }

    // a zero-level generator is unchanged
    const auto zero_level = truncate_generator(builtin_generator("abs_z", 0.0, 1.0), 2, 2);
    const std::array<double, 1> z{1.5};
    CHECK(zero_level(0.2, 3.0, z) ==
          doctest::Approx(builtin_generator("abs_z", 0.0, 1.0)(0.2, 3.0, z)).epsilon(1e-15));
}

TEST_CASE("backward solve: constant terminal is reproduced exactly") {
    const auto ens = make_ensemble(10, 4000, 21);
    const auto gen = builtin_generator("zero", 0.0, 1.0);
    const std::vector<double> xi(4000, 2.5);
    const auto field = solve_backward_euler(gen, xi, ens, RegressionConfig{});

    for (int k = 0; k <= 10; ++k) {
        for (int i = 0; i < 4000; i += 37) {
            CHECK(field.y_at(i, k) == doctest::Approx(2.5).epsilon(1e-12));
        }
    }
    for (int k = 0; k < 10; ++k) {
        for (int i = 0; i < 4000; i += 37) {
            CHECK(std::fabs(field.z_at(i, k)) <= 1e-10);
        }
    }
    // terminal row equals xi bit-for-bit
    for (int i = 0; i < 4000; ++i) CHECK(field.y_at(i, 10) == 2.5);
}

TEST_CASE("backward solve: martingale-representation oracle for xi = B_T") {
    const int n = 50, m = 20000;
    const auto ens = make_ensemble(n, m, 33);
    const auto gen = builtin_generator("zero", 0.0, 1.0);
    const auto xi = terminal_brownian_samples(*ens);
    RegressionConfig reg;
    reg.basis_degree = 1;
    const auto field = solve_backward_euler(gen, xi, ens, reg);

    CHECK(std::fabs(field.mean_y(0)) <= 5e-2);

    // Y_{t_k} tracks B_{t_k}; Z tracks 1
    long double y_err = 0.0L, z_err = 0.0L;
    for (int k = 0; k < n; ++k) {
        for (int i = 0; i < m; ++i) {
            y_err += std::fabs(field.y_at(i, k) - ens->state(i, k));
            z_err += std::fabs(field.z_at(i, k) - 1.0);
        }
    }
    CHECK(static_cast<double>(y_err / (static_cast<long double>(n) * m)) <= 5e-2);
    CHECK(static_cast<double>(z_err / (static_cast<long double>(n) * m)) <= 5e-2);
}

TEST_CASE("backward solve: closed form for g = gamma |z|, xi = B_T") {
    // Y_t = B_t + gamma (T - t), Z = 1 solves the equation: substituting gives
    // dY = -gamma dt + dB = -g(Z) dt + Z dB.
    const int n = 50, m = 20000;
    const double gamma = 0.5;
    const auto ens = make_ensemble(n, m, 55);
    const auto gen = builtin_generator("abs_z", 0.0, gamma);
    const auto xi = terminal_brownian_samples(*ens);
    const auto field = solve_backward_euler(gen, xi, ens, RegressionConfig{});

    CHECK(std::fabs(field.mean_y(0) - gamma * 1.0) <= 5e-2);
    for (int k = 0; k < n; k += 7) {
        const double expected = gamma * (1.0 - field.grid.time(k));
        CHECK(std::fabs(field.mean_y(k) - expected) <= 5e-2);
    }
}

TEST_CASE("backward solve: superposition for the zero generator") {
    const auto ens = make_ensemble(20, 5000, 77);
    const auto gen = builtin_generator("zero", 0.0, 1.0);
    const auto xi1 = terminal_brownian_samples(*ens);
    std::vector<double> xi2(xi1.size());
    for (std::size_t i = 0; i < xi1.size(); ++i) xi2[i] = std::cos(xi1[i]) + 0.5;
    std::vector<double> xi_sum(xi1.size());
    for (std::size_t i = 0; i < xi1.size(); ++i) xi_sum[i] = xi1[i] + xi2[i];

    const auto plan = std::make_shared<const RegressionPlan>(ens, RegressionConfig{});
    SolveOptions options;
    options.plan = plan;
    const auto f1 = solve_backward_euler(gen, xi1, ens, RegressionConfig{}, options);
    const auto f2 = solve_backward_euler(gen, xi2, ens, RegressionConfig{}, options);
    const auto fs = solve_backward_euler(gen, xi_sum, ens, RegressionConfig{}, options);

    for (int k = 0; k <= 20; k += 5) {
        for (int i = 0; i < 5000; i += 101) {
            CHECK(fs.y_at(i, k) ==
                  doctest::Approx(f1.y_at(i, k) + f2.y_at(i, k)).epsilon(1e-10));
        }
    }
}

TEST_CASE("backward solve: pathwise comparison under a shared H2 generator") {
    const auto ens = make_ensemble(25, 20000, 88);
    const auto gen = builtin_generator("abs_z", 0.0, 0.5);
    auto xi1 = terminal_brownian_samples(*ens);
    for (double& v : xi1) v = std::min(v, 1.0);
    std::vector<double> xi2 = xi1;
    for (double& v : xi2) v += 0.5;

    const auto plan = std::make_shared<const RegressionPlan>(ens, RegressionConfig{});
    SolveOptions options;
    options.plan = plan;
    const auto f1 = solve_backward_euler(gen, xi1, ens, RegressionConfig{}, options);
    const auto f2 = solve_backward_euler(gen, xi2, ens, RegressionConfig{}, options);

    const double band = 3.0 * (f1.noise_scale() + f2.noise_scale());
    long violations = 0, total = 0;
    for (int k = 0; k <= 25; ++k) {
        for (int i = 0; i < 20000; ++i) {
            ++total;
            if (f1.y_at(i, k) > f2.y_at(i, k) + band) ++violations;
        }
    }
    CHECK(static_cast<double>(violations) / static_cast<double>(total) <= 0.01);
}

TEST_CASE("backward solve: determinism and error paths") {
    const auto ens = make_ensemble(8, 2000, 3);
    const auto gen = builtin_generator("lipschitz_mixed", 0.5, 0.5);
    const auto xi = terminal_brownian_samples(*ens);

    const auto f1 = solve_backward_euler(gen, xi, ens, RegressionConfig{});
    const auto f2 = solve_backward_euler(gen, xi, ens, RegressionConfig{});
    CHECK(f1.y == f2.y);
    CHECK(f1.z == f2.z);

    std::vector<double> bad_xi = xi;
    bad_xi[7] = std::numeric_limits<double>::quiet_NaN();
    CHECK_THROWS_AS(solve_backward_euler(gen, bad_xi, ens, RegressionConfig{}), SolverError);

    std::vector<double> short_xi(10, 0.0);
    CHECK_THROWS_AS(solve_backward_euler(gen, short_xi, ens, RegressionConfig{}), SolverError);
}

TEST_CASE("picard solve: convergence behavior") {
    SUBCASE("zero generator converges in one iteration to the projection field") {
        const auto ens = make_ensemble(12, 3000, 11);
        const auto gen = builtin_generator("zero", 0.0, 1.0);
        const auto xi = terminal_brownian_samples(*ens);
        const auto result = picard_solve(gen, xi, ens, RegressionConfig{}, 10, 1e-12);
        CHECK(result.iterations == 1);
        CHECK(result.last_change == 0.0);

        const auto direct = solve_backward_euler(gen, xi, ens, RegressionConfig{});
        CHECK(result.field.y == direct.y);
    }

    SUBCASE("linear drift oracle: Y_0 -> c exp(-beta T)") {
        const int n = 50, m = 20000;
        const double beta = 1.0, c = 1.0;
        const auto ens = make_ensemble(n, m, 13);
        const auto gen = builtin_generator("linear_y", beta, 1.0);
        const std::vector<double> xi(static_cast<std::size_t>(m), c);
        const auto result = picard_solve(gen, xi, ens, RegressionConfig{}, 64, 1e-10);
        CHECK(result.iterations > 1);
        CHECK(std::fabs(result.field.mean_y(0) - c * std::exp(-beta)) <= 5e-2);
    }

    SUBCASE("cross-solver agreement on a Lipschitz scenario") {
        const int n = 25, m = 20000;
        const auto ens = make_ensemble(n, m, 17);
        const auto gen = builtin_generator("lipschitz_mixed", 0.5, 0.5);
        auto xi = terminal_brownian_samples(*ens);
        for (double& v : xi) v = std::clamp(v, -2.0, 2.0);

        const auto euler = solve_backward_euler(gen, xi, ens, RegressionConfig{});
        const auto picard = picard_solve(gen, xi, ens, RegressionConfig{}, 64, 1e-10);

        double worst = 0.0;
        for (int k = 0; k <= n; ++k) {
            long double acc = 0.0L;
            for (int i = 0; i < m; ++i)
                acc += std::fabs(euler.y_at(i, k) - picard.field.y_at(i, k));
            worst = std::max(worst, static_cast<double>(acc / m));
        }
        // the two routes share the discretization; they differ only through
        // the generator treatment, which is O(dt) here
        CHECK(worst <= 2e-2);
    }

    SUBCASE("non-convergence reports the last residual") {
        const auto ens = make_ensemble(4, 500, 19);
        // Deliberately non-contractive driver (huge Lipschitz constant).
        GeneratorSpec wild{.name = "wild",
                           .class_tags = {GeneratorTag::H2},
                           .beta = 50.0,
                           .gamma = 1.0,
                           .evaluate = [](double, double y, std::span<const double>) {
                               return -50.0 * y;
                           }};
        const std::vector<double> xi(500, 1.0);
        CHECK_THROWS_AS(picard_solve(wild, xi, ens, RegressionConfig{}, 3, 1e-14), SolverError);
    }
}

TEST_CASE("monotone approximation sweep") {
    SUBCASE("inactive truncation: all members equal the untruncated solve") {
        const auto ens = make_ensemble(10, 3000, 23);
        const auto gen = builtin_generator("abs_z", 0.0, 0.5);
        const std::vector<double> xi(3000, 2.0); // bounded by 2 < 4
        const auto sweep = monotone_approximation(gen, xi, ens, RegressionConfig{}, 4, 4);

        const auto reference = solve_backward_euler(gen, xi, ens, RegressionConfig{});
        const double y0 = reference.mean_y(0);
        int checked = 0;
        for (const auto& member : sweep.members) {
            REQUIRE(member.solved);
            if (member.n >= 2 && member.p >= 1) { // caps above the bound
                CHECK(member.y0 == doctest::Approx(y0).epsilon(1e-12));
                ++checked;
            }
        }
        CHECK(checked > 0);
        CHECK(sweep.ordering_violation_rate <= 1e-12);
        // limit field equals the reference where truncation is inactive
        CHECK(sweep.limit.size() == reference.y.size());
    }

    SUBCASE("nonnegative terminal: members independent of p") {
        const auto ens = make_ensemble(10, 3000, 29);
        const auto gen = builtin_generator("abs_z", 0.0, 0.5);
        auto xi = terminal_brownian_samples(*ens);
        for (double& v : xi) v = std::fabs(v);
        const auto sweep = monotone_approximation(gen, xi, ens, RegressionConfig{}, 4, 4);

        // group by n: y0 must be identical across p
        for (const int n_level : sweep.n_levels) {
            double first = 0.0;
            bool seen = false;
            for (const auto& member : sweep.members) {
                if (member.n != n_level) continue;
                REQUIRE(member.solved);
                if (!seen) {
                    first = member.y0;
                    seen = true;
                } else {
                    CHECK(member.y0 == first);
                }
            }
        }
    }

    SUBCASE("member errors are collected, not propagated") {
        const auto ens = make_ensemble(4, 200, 31);
        GeneratorSpec exploding{.name = "exploding",
                                .class_tags = {GeneratorTag::H1},
                                .beta = 0.0,
                                .gamma = 1.0,
                                .evaluate = [](double, double, std::span<const double>) {
                                    return std::numeric_limits<double>::infinity();
                                }};
        const std::vector<double> xi(200, 1.0);
        const auto sweep = monotone_approximation(exploding, xi, ens, RegressionConfig{}, 2, 2);
        CHECK_FALSE(sweep.member_errors.empty());
        for (const auto& member : sweep.members) CHECK_FALSE(member.solved);
    }
}

TEST_CASE("solution export: CSV layout and sidecar") {
    const auto ens = make_ensemble(3, 50, 37);
    const auto gen = builtin_generator("zero", 0.0, 1.0);
    const std::vector<double> xi(50, 1.0);
    auto field = solve_backward_euler(gen, xi, ens, RegressionConfig{});
    field.meta.terminal = "constant";

    const auto dir = std::filesystem::temp_directory_path() / "bsdelab_csv_test";
    std::filesystem::create_directories(dir);
    const auto csv_path = dir / "solution.csv";
    export_solution_csv(field, csv_path);
    export_solution_meta(field, dir / "solution.meta.json", "deadbeef");

    std::ifstream in(csv_path, std::ios::binary);
    REQUIRE(in.good());
    std::string header;
    std::getline(in, header);
    REQUIRE(!header.empty());
    CHECK(header.back() == '\r'); // RFC 4180 line endings
    header.pop_back();
    CHECK(header == "step_index,time,path_id,y,z_1");

    std::string first;
    std::getline(in, first);
    first.pop_back();
    std::istringstream row(first);
    std::string cell;
    std::getline(row, cell, ',');
    CHECK(cell == "0");
    std::getline(row, cell, ',');
    CHECK(cell == "0");
    std::getline(row, cell, ',');
    CHECK(cell == "0");
    std::getline(row, cell, ',');
    CHECK(std::stod(cell) == doctest::Approx(1.0).epsilon(1e-12));

    // terminal rows carry empty z fields
    std::string line, last;
    while (std::getline(in, line)) {
        if (!line.empty()) last = line;
    }
    CHECK(last.substr(last.size() - 1) == "\r");
    last.pop_back();
    CHECK(last.back() == ','); // empty z cell at k = N

    CHECK(std::filesystem::exists(dir / "solution.meta.json"));
    std::filesystem::remove_all(dir);
}
