#pragma once

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <vector>

namespace bsdelab {

/// Discretization 0 = t_0 < t_1 < ... < t_N = T of [0, T].
class TimeGrid {
public:
    TimeGrid() = default;

    explicit TimeGrid(std::vector<double> times) : times_(std::move(times)) {
        if (times_.size() < 2) throw std::invalid_argument("TimeGrid: need at least two times");
        if (times_.front() != 0.0) throw std::invalid_argument("TimeGrid: t_0 must be 0");
        for (std::size_t k = 1; k < times_.size(); ++k) {
            if (!(times_[k] > times_[k - 1]))
                throw std::invalid_argument("TimeGrid: times must be strictly increasing");
        }
        if (!(times_.back() > 0.0) || !std::isfinite(times_.back()))
            throw std::invalid_argument("TimeGrid: horizon must be positive and finite");
    }

    static TimeGrid uniform(double horizon, int n_steps) {
        if (!(horizon > 0.0)) throw std::invalid_argument("TimeGrid: horizon must be > 0");
        if (n_steps < 1) throw std::invalid_argument("TimeGrid: n_steps must be >= 1");
        std::vector<double> times(static_cast<std::size_t>(n_steps) + 1);
        for (int k = 0; k <= n_steps; ++k)
            times[static_cast<std::size_t>(k)] =
                horizon * (static_cast<double>(k) / static_cast<double>(n_steps));
        return TimeGrid(std::move(times));
    }

    double horizon() const { return times_.back(); }
    int n_steps() const { return static_cast<int>(times_.size()) - 1; }
    double time(int k) const { return times_.at(static_cast<std::size_t>(k)); }
    double dt(int k) const {
        return times_.at(static_cast<std::size_t>(k) + 1) - times_.at(static_cast<std::size_t>(k));
    }
    const std::vector<double>& times() const { return times_; }

    /// Largest index k with time(k) <= t (clamped to [0, N]).
    int index_at(double t) const {
        if (t <= 0.0) return 0;
        int k = n_steps();
        while (k > 0 && times_[static_cast<std::size_t>(k)] > t) --k;
        return k;
    }

private:
    std::vector<double> times_;
};

} // namespace bsdelab
