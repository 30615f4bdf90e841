#pragma once

#include <vector>

#include "driftfit/drift.hpp"
#include "driftfit/ensemble.hpp"
#include "driftfit/types.hpp"

namespace driftfit::metrics {

/// Empirical occupation measure: every observed state of every trajectory,
/// pooled with uniform weights, one state per row.
struct OccupationSample {
    Matrix states;

    int dim() const { return static_cast<int>(states.cols()); }
    Eigen::Index size() const { return states.rows(); }
};

OccupationSample occupation_sample(const dynamics::Ensemble& ensemble);

/// Keeps only the states whose every coordinate lies inside the central
/// `keep_fraction` quantile range of that coordinate's pooled marginal.
OccupationSample restrict_central(const OccupationSample& occ, double keep_fraction);

struct L2RhoResult {
    double value = 0.0;
    /// True when the truth norm vanished on the sample and the value is the
    /// absolute (not relative) error.
    bool absolute_fallback = false;
};

/// Relative L2 error between two drifts under the empirical occupation
/// measure: sqrt(sum ||f_true - f_hat||^2 / sum ||f_true||^2).
L2RhoResult l2_rho_error(const dynamics::Drift& truth, const dynamics::Drift& candidate,
                         const OccupationSample& occ);

/// Re-integrates the candidate drift against each trajectory's recorded
/// noise increments from the same initial state (paired-noise replay).
dynamics::Ensemble replay_trajectories(const dynamics::Drift& candidate,
                                       const dynamics::Ensemble& ensemble);

struct TrajectoryError {
    double mean = 0.0;
    double std_dev = 0.0;
    /// Trajectories dropped from the statistics (zero reference norm or a
    /// non-finite replay).
    int skipped = 0;
};

/// Per-trajectory relative error sum_l ||x_l - xhat_l||^2 / sum_l ||x_l||^2,
/// summarized as mean and population standard deviation over trajectories.
TrajectoryError trajectory_error(const dynamics::Ensemble& reference,
                                 const dynamics::Ensemble& replayed);

/// Order-1 Wasserstein distance between two equally sized 1D samples
/// (mean absolute difference of sorted values).
double wasserstein1d(std::vector<double> a, std::vector<double> b);

/// Distance between the two ensembles' state distributions at the grid time
/// nearest to t: exact order-1 Wasserstein in 1D, sliced order-1 Wasserstein
/// with 64 seeded projection directions in higher dimension.
double wasserstein_snapshot(const dynamics::Ensemble& ensemble,
                            const dynamics::Ensemble& ensemble_hat, double t);

struct SnapshotDistance {
    double time = 0.0;
    double distance = 0.0;
};

struct MetricReport {
    L2RhoResult l2_rho;
    TrajectoryError trajectory;
    std::vector<SnapshotDistance> wasserstein;
    /// Optional extra: relative error restricted to a central quantile band
    /// of the occupation sample. central_fraction = 0 means "not computed".
    double central_fraction = 0.0;
    L2RhoResult central_l2;
};

/// Full scoring pass: occupation error against the truth, paired-noise
/// replay error, and Wasserstein distances at the given snapshot times.
/// `central_fraction` > 0 additionally scores the central quantile band.
MetricReport compute_metrics(const dynamics::Drift& truth, const dynamics::Drift& candidate,
                             const dynamics::Ensemble& data,
                             const std::vector<double>& snapshot_times,
                             double central_fraction = 0.0);

} // namespace driftfit::metrics
