#include "bsdelab/path_ensemble.hpp"

#include <cmath>
#include <stdexcept>
#include <string>
#include <thread>

#include "bsdelab/errors.hpp"
#include "bsdelab/io_util.hpp"
#include "bsdelab/rng.hpp"

namespace bsdelab {

PathEnsemble::PathEnsemble(TimeGrid grid, int dim, int n_paths, std::uint64_t seed,
                           int shard_count, std::size_t memory_budget_bytes)
    : grid_(std::move(grid)), dim_(dim), n_paths_(n_paths), seed_(seed),
      shard_count_(shard_count) {
    if (dim_ < 1) throw std::invalid_argument("PathEnsemble: dim must be >= 1");
    if (n_paths_ < 1) throw std::invalid_argument("PathEnsemble: n_paths must be >= 1");
    if (shard_count_ < 1) throw std::invalid_argument("PathEnsemble: shard_count must be >= 1");

    const std::size_t n = static_cast<std::size_t>(grid_.n_steps());
    const std::size_t m = static_cast<std::size_t>(n_paths_);
    const std::size_t d = static_cast<std::size_t>(dim_);
    const std::size_t bytes = m * (2 * n + 1) * d * sizeof(double);
    if (bytes > memory_budget_bytes) {
        throw ResourceError("PathEnsemble: M x N x d needs " + std::to_string(bytes) +
                            " bytes, over the budget of " + std::to_string(memory_budget_bytes) +
                            "; reduce paths/steps or stream in batches");
    }

    increments_.resize(m * n * d);
    states_.resize(m * (n + 1) * d);

    // increment(i,k,c) = sqrt(dt_k) * N(0,1) addressed by
    // key = (seed, shard of i), counter = (i, k*d + c).
    auto fill_range = [&](int lo, int hi) {
        for (int i = lo; i < hi; ++i) {
            const std::uint64_t shard = static_cast<std::uint64_t>(i) %
                                        static_cast<std::uint64_t>(shard_count_);
            const std::uint64_t k1 = 0x9e3779b97f4a7c15ull ^ shard;
            for (int c = 0; c < dim_; ++c) states_[state_index(i, 0, c)] = 0.0;
            for (int k = 0; k < grid_.n_steps(); ++k) {
                const double sqrt_dt = std::sqrt(grid_.dt(k));
                for (int c = 0; c < dim_; ++c) {
                    const std::uint64_t slot =
                        static_cast<std::uint64_t>(k) * static_cast<std::uint64_t>(dim_) +
                        static_cast<std::uint64_t>(c);
                    const double z = standard_normal(seed_, k1, static_cast<std::uint64_t>(i), slot);
                    const double db = sqrt_dt * z;
                    increments_[inc_index(i, k, c)] = db;
                    states_[state_index(i, k + 1, c)] = states_[state_index(i, k, c)] + db;
                }
            }
        }
    };

    const int workers = std::min(worker_count(), n_paths_);
    if (workers <= 1) {
        fill_range(0, n_paths_);
    } else {
        std::vector<std::thread> pool;
        pool.reserve(static_cast<std::size_t>(workers));
        const int chunk = (n_paths_ + workers - 1) / workers;
        for (int w = 0; w < workers; ++w) {
            const int lo = w * chunk;
            const int hi = std::min(n_paths_, lo + chunk);
            if (lo >= hi) break;
            pool.emplace_back(fill_range, lo, hi);
        }
        for (auto& th : pool) th.join();
    }
}

EnsemblePtr simulate_brownian(const TimeGrid& grid, int dim, int n_paths, std::uint64_t seed,
                              int shard_count, std::size_t memory_budget_bytes) {
    return std::make_shared<const PathEnsemble>(grid, dim, n_paths, seed, shard_count,
                                                memory_budget_bytes);
}

} // namespace bsdelab
