#pragma once

#include <cstdint>
#include <vector>

#include "driftfit/covariance.hpp"
#include "driftfit/drift.hpp"
#include "driftfit/ensemble.hpp"
#include "driftfit/errors.hpp"

namespace driftfit::dynamics {

/// Initial condition x_0 ~ mu_0: either independent Uniform(lo_k, hi_k) per
/// component or an explicit list of starting points (one shared point, or
/// one point per trajectory).
struct InitialDistribution {
    enum class Kind { Uniform, Points };

    Kind kind = Kind::Uniform;
    Vector lo, hi;               // Uniform
    std::vector<Vector> points;  // Points: size 1 or M

    static InitialDistribution uniform(Vector lo, Vector hi);
    static InitialDistribution points_list(std::vector<Vector> pts);
};

/// The shared Euler-Maruyama state update. Simulation and replay both go
/// through this so that replaying recorded increments is bit-exact.
inline void em_advance(const Vector& x, const Vector& drift_value, double dt,
                       const Vector& realized_noise, Vector& out) {
    out = x + drift_value * dt + realized_noise;
}

/// One Euler-Maruyama step: x + f(x) dt + C(x) dw, where dw is a raw
/// standard-normal draw already scaled by sqrt(dt) and C is the covariance
/// factor. Throws NonFiniteError when the drift or the result overflows.
Vector em_step(const Vector& x, const Drift& drift, const CovarianceModel& cov, double dt,
               const Vector& dw);

/// Simulates M trajectories from i.i.d. initial states. Identical
/// (seed, M, grid) inputs reproduce bit-identical output for any worker
/// count. With record_noise the realized per-step increments C(x_l) dw_l
/// are stored on each trajectory.
Ensemble simulate_ensemble(const Drift& drift, const CovarianceModel& cov, const TimeGrid& grid,
                           std::size_t n_trajectories, const InitialDistribution& init,
                           std::uint64_t seed, bool record_noise, int threads = 1);

/// Constant noise level from quadratic variation:
/// sigma^2 = (1 / (M T d)) sum_{m,l} |x_{l+1}^m - x_l^m|^2.
double quadratic_variation_sigma(const Ensemble& ensemble);

} // namespace driftfit::dynamics
