#pragma once

#include <cstdint>
#include <vector>

#include "driftfit/time_grid.hpp"
#include "driftfit/types.hpp"

namespace driftfit::dynamics {

/// One discrete sample path. Row l of `states` is the state at grid time l.
/// When present, row l of `noise` holds the realized stochastic increment
/// applied on the step l -> l+1 (the covariance factor already applied),
/// so `noise` has one row fewer than `states`.
struct Trajectory {
    Matrix states;  // L x d
    Matrix noise;   // (L-1) x d, or 0 x 0 when not recorded

    bool has_noise() const { return noise.rows() > 0; }
};

/// M trajectories sharing one time grid and one state dimension.
struct Ensemble {
    TimeGrid grid;
    std::vector<Trajectory> paths;
    int dim = 0;
    std::uint64_t seed = 0;

    std::size_t size() const { return paths.size(); }
    std::size_t length() const { return grid.size(); }
};

} // namespace driftfit::dynamics
