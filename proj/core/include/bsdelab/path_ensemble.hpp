#pragma once

#include <cstdint>
#include <memory>
#include <span>
#include <vector>

#include "bsdelab/time_grid.hpp"

namespace bsdelab {

/// M sampled d-dimensional Brownian trajectories over a TimeGrid.
/// Increments are a pure function of (seed, shard_count, path, step,
/// component), so regeneration with the same lineage is bit-identical and
/// generation parallelizes over paths without affecting the values.
/// Immutable after construction; both increments and cumulative states are
/// materialized up front.
class PathEnsemble {
public:
    PathEnsemble(TimeGrid grid, int dim, int n_paths, std::uint64_t seed, int shard_count,
                 std::size_t memory_budget_bytes = kDefaultMemoryBudget);

    static constexpr std::size_t kDefaultMemoryBudget = 4ull << 30;

    const TimeGrid& grid() const { return grid_; }
    int dim() const { return dim_; }
    int n_paths() const { return n_paths_; }
    std::uint64_t seed() const { return seed_; }
    int shard_count() const { return shard_count_; }

    /// dB for (path i, step k, component c); k in [0, N).
    double increment(int i, int k, int c = 0) const {
        return increments_[inc_index(i, k, c)];
    }

    /// B_{t_k} for (path i, component c); k in [0, N].
    double state(int i, int k, int c = 0) const { return states_[state_index(i, k, c)]; }

    /// d-dimensional state of path i at grid index k.
    std::span<const double> state_vector(int i, int k) const {
        return {states_.data() + state_index(i, k, 0), static_cast<std::size_t>(dim_)};
    }

    std::span<const double> increments_flat() const { return increments_; }
    std::span<const double> states_flat() const { return states_; }

private:
    std::size_t inc_index(int i, int k, int c) const {
        return (static_cast<std::size_t>(i) * static_cast<std::size_t>(grid_.n_steps()) +
                static_cast<std::size_t>(k)) *
                   static_cast<std::size_t>(dim_) +
               static_cast<std::size_t>(c);
    }
    std::size_t state_index(int i, int k, int c) const {
        return (static_cast<std::size_t>(i) * (static_cast<std::size_t>(grid_.n_steps()) + 1) +
                static_cast<std::size_t>(k)) *
                   static_cast<std::size_t>(dim_) +
               static_cast<std::size_t>(c);
    }

    TimeGrid grid_;
    int dim_ = 1;
    int n_paths_ = 0;
    std::uint64_t seed_ = 0;
    int shard_count_ = 1;
    std::vector<double> increments_; // M x N x d
    std::vector<double> states_;     // M x (N+1) x d, cumulative sums
};

using EnsemblePtr = std::shared_ptr<const PathEnsemble>;

/// Generate a Brownian ensemble; throws ResourceError when the requested
/// size exceeds the memory budget.
EnsemblePtr simulate_brownian(const TimeGrid& grid, int dim, int n_paths, std::uint64_t seed,
                              int shard_count = 1,
                              std::size_t memory_budget_bytes = PathEnsemble::kDefaultMemoryBudget);

} // namespace bsdelab
