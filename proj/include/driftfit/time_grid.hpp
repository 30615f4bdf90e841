#pragma once

#include <cmath>
#include <cstddef>
#include <utility>
#include <vector>

#include "driftfit/errors.hpp"

namespace driftfit::dynamics {

/// Strictly increasing observation times t_0 = 0 < ... < t_{L-1} = T.
class TimeGrid {
public:
    TimeGrid() = default;

    /// Uniform grid over [0, T] with step dt; dt must divide T within 1e-9.
    static TimeGrid uniform(double horizon, double dt) {
        if (horizon <= 0.0 || dt <= 0.0)
            throw Error("TimeGrid: horizon and dt must be positive");
        const double steps_real = horizon / dt;
        const auto steps = static_cast<std::size_t>(std::llround(steps_real));
        if (steps < 1 || std::abs(static_cast<double>(steps) * dt - horizon) > 1e-9)
            throw Error("TimeGrid: dt does not divide the horizon");
        std::vector<double> t(steps + 1);
        for (std::size_t i = 0; i <= steps; ++i)
            t[i] = (i == steps) ? horizon : static_cast<double>(i) * dt;
        return TimeGrid(std::move(t));
    }

    explicit TimeGrid(std::vector<double> times) : times_(std::move(times)) {
        if (times_.size() < 2)
            throw Error("TimeGrid: needs at least two times");
        if (times_.front() != 0.0)
            throw Error("TimeGrid: first time must be 0");
        for (std::size_t i = 0; i + 1 < times_.size(); ++i)
            if (!(times_[i] < times_[i + 1]))
                throw Error("TimeGrid: times must be strictly increasing");
    }

    std::size_t size() const { return times_.size(); }
    std::size_t steps() const { return times_.size() - 1; }
    double horizon() const { return times_.back(); }
    double time(std::size_t l) const { return times_[l]; }
    double dt(std::size_t l) const { return times_[l + 1] - times_[l]; }
    const std::vector<double>& times() const { return times_; }

    /// Index of the grid time closest to t.
    std::size_t nearest_index(double t) const {
        std::size_t best = 0;
        double best_gap = std::abs(times_[0] - t);
        for (std::size_t i = 1; i < times_.size(); ++i) {
            const double gap = std::abs(times_[i] - t);
            if (gap < best_gap) {
                best = i;
                best_gap = gap;
            }
        }
        return best;
    }

    bool operator==(const TimeGrid& other) const { return times_ == other.times_; }

private:
    std::vector<double> times_;
};

} // namespace driftfit::dynamics
