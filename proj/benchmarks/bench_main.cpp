#include <benchmark/benchmark.h>

#include <vector>

#include "bsdelab/path_ensemble.hpp"
#include "bsdelab/solver.hpp"
#include "bsdelab/special_functions.hpp"

namespace {

using namespace bsdelab;

void BM_psi(benchmark::State& state) {
    double x = 0.1;
    for (auto _ : state) {
        benchmark::DoNotOptimize(psi(x, 0.7));
        x += 1.0;
        if (x > 1e6) x = 0.1;
    }
}
BENCHMARK(BM_psi);

void BM_phi_jet(benchmark::State& state) {
    const CriticalParams params{.gamma = 0.5, .beta = 0.0, .horizon = 1.0};
    double x = 0.0;
    for (auto _ : state) {
        benchmark::DoNotOptimize(phi_jet({.t = 0.25, .s = 0.5, .x = x}, params));
        x += 0.37;
        if (x > 1e4) x = 0.0;
    }
}
BENCHMARK(BM_phi_jet);

void BM_hjb_residual(benchmark::State& state) {
    const CriticalParams params{.gamma = 1.0, .beta = 0.0, .horizon = 1.0};
    double x = 0.0;
    for (auto _ : state) {
        benchmark::DoNotOptimize(hjb_residual({.t = 0.5, .s = 0.75, .x = x}, params));
        x += 1.7;
        if (x > 1e6) x = 0.0;
    }
}
BENCHMARK(BM_hjb_residual);

void BM_brownian_generation(benchmark::State& state) {
    const int n_paths = static_cast<int>(state.range(0));
    const TimeGrid grid = TimeGrid::uniform(1.0, 50);
    for (auto _ : state) {
        auto ens = simulate_brownian(grid, 1, n_paths, 42, 4);
        benchmark::DoNotOptimize(ens->state(0, 50));
    }
    state.SetItemsProcessed(state.iterations() * n_paths * 50);
}
BENCHMARK(BM_brownian_generation)->Arg(1000)->Arg(10000);

void BM_backward_solve(benchmark::State& state) {
    const int n_paths = static_cast<int>(state.range(0));
    const TimeGrid grid = TimeGrid::uniform(1.0, 50);
    const auto ens = simulate_brownian(grid, 1, n_paths, 42, 4);
    const auto gen = builtin_generator("abs_z", 0.0, 0.5);
    std::vector<double> xi(static_cast<std::size_t>(n_paths));
    for (int i = 0; i < n_paths; ++i) xi[static_cast<std::size_t>(i)] = ens->state(i, 50);
    const auto plan = std::make_shared<const RegressionPlan>(ens, RegressionConfig{});
    for (auto _ : state) {
        SolveOptions options;
        options.plan = plan;
        auto field = solve_backward_euler(gen, xi, ens, RegressionConfig{}, options);
        benchmark::DoNotOptimize(field.mean_y(0));
    }
    state.SetItemsProcessed(state.iterations() * n_paths * 50);
}
BENCHMARK(BM_backward_solve)->Arg(1000)->Arg(10000);

} // namespace

BENCHMARK_MAIN();
