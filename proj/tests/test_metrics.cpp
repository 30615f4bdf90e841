// Metrics layer: occupation-measure L2 error, paired-noise trajectory
// replay, and order-1 Wasserstein snapshot distances. The 1D Wasserstein
// is checked against brute-force enumeration over all pairings.

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

#include "driftfit/covariance.hpp"
#include "driftfit/drift.hpp"
#include "driftfit/ensemble.hpp"
#include "driftfit/errors.hpp"
#include "driftfit/metrics.hpp"
#include "driftfit/rng.hpp"
#include "driftfit/simulate.hpp"
#include "driftfit/time_grid.hpp"
#include "oracles.hpp"

using namespace driftfit;
using dynamics::CovarianceModel;
using dynamics::Ensemble;
using dynamics::InitialDistribution;
using dynamics::TimeGrid;
using metrics::OccupationSample;

namespace {

Ensemble noisy_ensemble(std::size_t m, std::uint64_t seed, bool record_noise = true) {
    const auto drift =
        dynamics::make_drift(1, [](const Vector& x, Vector& out) { out(0) = 2.0 - 0.3 * x(0); });
    const CovarianceModel cov = CovarianceModel::scalar_constant(1, 0.5);
    const TimeGrid grid = TimeGrid::uniform(0.5, 0.01);
    const auto init = InitialDistribution::uniform(Vector::Zero(1), Vector::Constant(1, 10.0));
    return dynamics::simulate_ensemble(*drift, cov, grid, m, init, seed, record_noise);
}

OccupationSample ramp_sample(int n) {
    OccupationSample occ;
    occ.states.resize(n, 1);
    for (int i = 0; i < n; ++i)
        occ.states(i, 0) = static_cast<double>(i + 1);
    return occ;
}

} // namespace

TEST_CASE("occupation sampling pools every state of every trajectory") {
    const Ensemble ens = noisy_ensemble(3, 11);
    const OccupationSample occ = metrics::occupation_sample(ens);
    CHECK(occ.dim() == 1);
    CHECK(occ.size() == 3 * 51);
    // Path-major layout: the first block is trajectory 0 in time order.
    CHECK(occ.states(0, 0) == ens.paths[0].states(0, 0));
    CHECK(occ.states(51, 0) == ens.paths[1].states(0, 0));
    CHECK_THROWS_WITH_AS(metrics::occupation_sample(Ensemble{}), "cannot pool an empty ensemble",
                         Error);
}

TEST_CASE("central restriction trims symmetric quantile tails per coordinate") {
    // Values 1..100 with keep = 0.9: each tail drops 5%, and the linearly
    // interpolated quantiles sit at 5.95 and 95.05, keeping 6..95.
    const OccupationSample occ = ramp_sample(100);
    const OccupationSample kept = metrics::restrict_central(occ, 0.9);
    CHECK(kept.size() == 90);
    CHECK(kept.states.col(0).minCoeff() == 6.0);
    CHECK(kept.states.col(0).maxCoeff() == 95.0);

    const OccupationSample all = metrics::restrict_central(occ, 1.0);
    CHECK(all.size() == 100);

    CHECK_THROWS_WITH_AS(metrics::restrict_central(occ, 0.0),
                         "central quantile fraction must lie in (0, 1]", Error);
    CHECK_THROWS_WITH_AS(metrics::restrict_central(occ, 1.5),
                         "central quantile fraction must lie in (0, 1]", Error);
    CHECK_THROWS_WITH_AS(metrics::restrict_central(OccupationSample{}, 0.5),
                         "cannot restrict an empty occupation sample", Error);
}

TEST_CASE("relative L2 drift error matches hand values") {
    const OccupationSample occ = ramp_sample(10);
    const auto two = dynamics::make_drift(1, [](const Vector&, Vector& out) { out(0) = 2.0; });
    const auto one = dynamics::make_drift(1, [](const Vector&, Vector& out) { out(0) = 1.0; });
    const auto zero = dynamics::zero_drift(1);
    const auto three = dynamics::make_drift(1, [](const Vector&, Vector& out) { out(0) = 3.0; });

    const auto same = metrics::l2_rho_error(*two, *two, occ);
    CHECK(same.value == 0.0);
    CHECK_FALSE(same.absolute_fallback);

    // sqrt(sum 1 / sum 4) = 0.5 exactly.
    const auto half = metrics::l2_rho_error(*two, *one, occ);
    CHECK(half.value == 0.5);
    CHECK_FALSE(half.absolute_fallback);

    // Vanishing truth: the reported number is the absolute RMS error.
    const auto fallback = metrics::l2_rho_error(*zero, *three, occ);
    CHECK(fallback.value == 3.0);
    CHECK(fallback.absolute_fallback);

    // Monotone in the perturbation size.
    double previous = 0.0;
    for (const double eps : {0.1, 0.2, 0.4}) {
        const auto candidate =
            dynamics::make_drift(1, [eps](const Vector&, Vector& out) { out(0) = 2.0 + eps; });
        const auto result = metrics::l2_rho_error(*two, *candidate, occ);
        CHECK(result.value > previous);
        previous = result.value;
    }

    const auto nan_drift = dynamics::make_drift(1, [](const Vector&, Vector& out) {
        out(0) = std::numeric_limits<double>::quiet_NaN();
    });
    CHECK_THROWS_WITH_AS(metrics::l2_rho_error(*two, *nan_drift, occ),
                         "drift evaluation produced a non-finite value while scoring",
                         NonFiniteError);
    const auto two2 = dynamics::zero_drift(2);
    CHECK_THROWS_WITH_AS(metrics::l2_rho_error(*two2, *two, occ),
                         "drift dimension does not match the occupation sample", Error);
    OccupationSample empty;
    empty.states.resize(0, 1);  // right dimension, no rows
    CHECK_THROWS_WITH_AS(metrics::l2_rho_error(*two, *two, empty),
                         "occupation sample is empty", Error);
}

TEST_CASE("replaying the generating drift reproduces the data bit-exactly") {
    // The replay advances with the same x + f dt + recorded-noise expression
    // the simulator used, so the true drift must reproduce every state.
    const auto drift =
        dynamics::make_drift(1, [](const Vector& x, Vector& out) { out(0) = 2.0 - 0.3 * x(0); });
    const Ensemble ens = noisy_ensemble(5, 21);
    const Ensemble replayed = metrics::replay_trajectories(*drift, ens);
    REQUIRE(replayed.size() == ens.size());
    for (std::size_t m = 0; m < ens.size(); ++m)
        CHECK(replayed.paths[m].states == ens.paths[m].states);

    const metrics::TrajectoryError err = metrics::trajectory_error(ens, replayed);
    CHECK(err.mean == 0.0);
    CHECK(err.std_dev == 0.0);
    CHECK(err.skipped == 0);
}

TEST_CASE("replaying a shifted drift accumulates the shift linearly in time") {
    // With noise paired, xhat_l - x_l = eps * t_l exactly in exact
    // arithmetic: the difference integrates the constant drift offset.
    const double eps = 0.01;
    const auto truth = dynamics::make_drift(1, [](const Vector&, Vector& out) { out(0) = 2.0; });
    const auto shifted =
        dynamics::make_drift(1, [eps](const Vector&, Vector& out) { out(0) = 2.0 + eps; });
    const CovarianceModel cov = CovarianceModel::scalar_constant(1, 0.5);
    const TimeGrid grid = TimeGrid::uniform(0.5, 0.01);
    const auto init = InitialDistribution::uniform(Vector::Zero(1), Vector::Constant(1, 10.0));
    const Ensemble ens = dynamics::simulate_ensemble(*truth, cov, grid, 4, init, 33, true);
    const Ensemble replayed = metrics::replay_trajectories(*shifted, ens);
    for (std::size_t m = 0; m < ens.size(); ++m) {
        for (std::size_t l = 0; l < ens.length(); ++l) {
            const double expected = eps * ens.grid.time(l);
            const double got = replayed.paths[m].states(static_cast<Eigen::Index>(l), 0) -
                               ens.paths[m].states(static_cast<Eigen::Index>(l), 0);
            CHECK(std::abs(got - expected) < 1e-9);
        }
    }
}

TEST_CASE("replay demands recorded noise and matching dimensions") {
    const Ensemble bare = noisy_ensemble(2, 3, false);
    const auto drift = dynamics::zero_drift(1);
    CHECK_THROWS_WITH_AS(metrics::replay_trajectories(*drift, bare),
                         "replay requires recorded noise increments on every trajectory",
                         MissingNoiseError);
    const Ensemble ens = noisy_ensemble(2, 3, true);
    const auto wide = dynamics::zero_drift(2);
    CHECK_THROWS_WITH_AS(metrics::replay_trajectories(*wide, ens),
                         "candidate drift dimension does not match the ensemble", Error);
}

TEST_CASE("trajectory error summarizes per-path relative errors") {
    // Path 0 replayed exactly: e_0 = 0. Path 1 off by 1 at both times with
    // reference norm 1: e_1 = (1 + 1) / (1 + 1) = 1. Mean 0.5, population
    // standard deviation 0.5.
    Ensemble reference;
    reference.grid = TimeGrid::uniform(1.0, 1.0);
    reference.dim = 1;
    dynamics::Trajectory a, b;
    a.states = Matrix::Constant(2, 1, 1.0);
    b.states = Matrix::Constant(2, 1, 1.0);
    reference.paths = {a, b};

    Ensemble replayed = reference;
    replayed.paths[1].states = Matrix::Constant(2, 1, 2.0);

    const metrics::TrajectoryError err = metrics::trajectory_error(reference, replayed);
    CHECK(err.mean == 0.5);
    CHECK(err.std_dev == 0.5);
    CHECK(err.skipped == 0);

    SUBCASE("zero-norm references are skipped") {
        Ensemble zero_ref = reference;
        zero_ref.paths[0].states.setZero();
        Ensemble zero_rep = replayed;
        const metrics::TrajectoryError skipping = metrics::trajectory_error(zero_ref, zero_rep);
        CHECK(skipping.skipped == 1);
        CHECK(skipping.mean == 1.0);
        CHECK(skipping.std_dev == 0.0);
    }
    SUBCASE("non-finite replays are skipped") {
        Ensemble bad = replayed;
        bad.paths[0].states(1, 0) = std::numeric_limits<double>::infinity();
        const metrics::TrajectoryError skipping = metrics::trajectory_error(reference, bad);
        CHECK(skipping.skipped == 1);
        CHECK(skipping.mean == 1.0);
    }
    SUBCASE("skipping everything is an error") {
        Ensemble zero_ref = reference;
        zero_ref.paths[0].states.setZero();
        zero_ref.paths[1].states.setZero();
        CHECK_THROWS_WITH_AS(metrics::trajectory_error(zero_ref, replayed),
                             "every trajectory was skipped while scoring the replay error", Error);
    }
    SUBCASE("shape mismatches are rejected") {
        Ensemble fewer = reference;
        fewer.paths.pop_back();
        CHECK_THROWS_WITH_AS(metrics::trajectory_error(reference, fewer),
                             "trajectory error needs matching ensemble sizes", Error);
        Ensemble other_grid = replayed;
        other_grid.grid = TimeGrid::uniform(2.0, 1.0);
        dynamics::Trajectory longer;
        longer.states = Matrix::Constant(3, 1, 1.0);
        other_grid.paths = {longer, longer};
        CHECK_THROWS_WITH_AS(metrics::trajectory_error(reference, other_grid),
                             "trajectory error needs matching grids and dimensions", Error);
    }
}

TEST_CASE("1D Wasserstein distance matches hand values and the enumeration oracle") {
    CHECK(metrics::wasserstein1d({0.0, 1.0}, {0.0, 2.0}) == 0.5);
    CHECK(metrics::wasserstein1d({1.0, 0.0}, {2.0, 0.0}) == 0.5);  // order-free
    CHECK_THROWS_WITH_AS(metrics::wasserstein1d({1.0}, {1.0, 2.0}),
                         "order-1 Wasserstein needs two equally sized nonempty samples", Error);
    CHECK_THROWS_WITH_AS(metrics::wasserstein1d({}, {}),
                         "order-1 Wasserstein needs two equally sized nonempty samples", Error);

    // The sorted pairing must beat every permutation (optimal transport on
    // the line), so brute-force enumeration gives the same distance.
    auto gen = dynamics::substream(71, 0);
    std::uniform_real_distribution<double> unif(-5.0, 5.0);
    std::uniform_int_distribution<int> size_dist(2, 8);
    for (int trial = 0; trial < 20; ++trial) {
        const int n = size_dist(gen);
        std::vector<double> a(static_cast<std::size_t>(n)), b(static_cast<std::size_t>(n));
        for (int i = 0; i < n; ++i) {
            a[static_cast<std::size_t>(i)] = unif(gen);
            b[static_cast<std::size_t>(i)] = unif(gen);
        }
        const double best = oracles::wasserstein_enumerate(a, b);
        CHECK(metrics::wasserstein1d(a, b) == doctest::Approx(best).epsilon(1e-12));
    }
}

TEST_CASE("1D Wasserstein respects translation and the triangle inequality") {
    auto gen = dynamics::substream(72, 0);
    std::uniform_real_distribution<double> unif(-3.0, 3.0);
    std::vector<double> a(40), b(40), c(40);
    for (std::size_t i = 0; i < a.size(); ++i) {
        a[i] = unif(gen);
        b[i] = unif(gen);
        c[i] = unif(gen);
    }
    // Translating both samples by the same shift preserves the distance.
    std::vector<double> a_shift = a, b_shift = b;
    for (std::size_t i = 0; i < a.size(); ++i) {
        a_shift[i] += 1.75;
        b_shift[i] += 1.75;
    }
    CHECK(std::abs(metrics::wasserstein1d(a_shift, b_shift) - metrics::wasserstein1d(a, b)) <
          1e-12);
    // Translating one sample moves the distance by at most the shift.
    CHECK(metrics::wasserstein1d(a, b) + metrics::wasserstein1d(b, c) + 1e-12 >=
          metrics::wasserstein1d(a, c));
}

TEST_CASE("snapshot distances snap to the nearest grid time") {
    const Ensemble ens = noisy_ensemble(40, 81);
    const Ensemble other = noisy_ensemble(40, 82);

    // 1D snapshots reduce to the exact 1D distance on the column at the
    // nearest grid time; 0.262 is off-grid and snaps to index 26.
    const std::size_t index = ens.grid.nearest_index(0.262);
    CHECK(index == 26);
    std::vector<double> column_a, column_b;
    for (const auto& path : ens.paths)
        column_a.push_back(path.states(static_cast<Eigen::Index>(index), 0));
    for (const auto& path : other.paths)
        column_b.push_back(path.states(static_cast<Eigen::Index>(index), 0));
    const double direct = metrics::wasserstein1d(column_a, column_b);
    CHECK(metrics::wasserstein_snapshot(ens, other, 0.262) == direct);
    CHECK(metrics::wasserstein_snapshot(ens, other, ens.grid.time(index)) == direct);

    Ensemble other_grid = other;
    other_grid.grid = TimeGrid::uniform(0.25, 0.01);
    for (auto& path : other_grid.paths) {
        path.states = path.states.topRows(26).eval();
        path.noise = path.noise.topRows(25).eval();
    }
    CHECK_THROWS_WITH_AS(metrics::wasserstein_snapshot(ens, other_grid, 0.1),
                         "snapshot distance needs a shared time grid", Error);
    Ensemble fewer = other;
    fewer.paths.pop_back();
    CHECK_THROWS_WITH_AS(metrics::wasserstein_snapshot(ens, fewer, 0.1),
                         "snapshot distance needs matching ensemble shapes", Error);
}

TEST_CASE("sliced snapshot distances are deterministic, symmetric, and vanish on equality") {
    const auto drift = dynamics::make_drift(2, [](const Vector& x, Vector& out) {
        out(0) = 0.4 * x(0) - 0.1 * x(0) * x(1);
        out(1) = -0.8 * x(1) + 0.2 * x(0) * x(0);
    });
    Vector diag(2);
    diag << 0.6, 0.8;
    const CovarianceModel cov = CovarianceModel::diagonal_constant(diag);
    const TimeGrid grid = TimeGrid::uniform(0.5, 0.01);
    const auto init = InitialDistribution::uniform(Vector::Zero(2), Vector::Constant(2, 10.0));
    const Ensemble a = dynamics::simulate_ensemble(*drift, cov, grid, 30, init, 41, false);
    const Ensemble b = dynamics::simulate_ensemble(*drift, cov, grid, 30, init, 42, false);

    CHECK(metrics::wasserstein_snapshot(a, a, 0.5) == 0.0);

    // Reordering trajectories permutes the sample without changing the law.
    Ensemble reordered = a;
    std::reverse(reordered.paths.begin(), reordered.paths.end());
    CHECK(metrics::wasserstein_snapshot(a, reordered, 0.5) == doctest::Approx(0.0).epsilon(1e-12));

    const double ab = metrics::wasserstein_snapshot(a, b, 0.5);
    CHECK(ab > 0.0);
    // Projection directions are drawn from a fixed seed independent of the
    // arguments, so repeat calls and swapped arguments agree bitwise.
    CHECK(metrics::wasserstein_snapshot(a, b, 0.5) == ab);
    CHECK(metrics::wasserstein_snapshot(b, a, 0.5) == ab);
}

TEST_CASE("compute_metrics assembles the full report") {
    const auto truth =
        dynamics::make_drift(1, [](const Vector& x, Vector& out) { out(0) = 2.0 - 0.3 * x(0); });
    const auto candidate =
        dynamics::make_drift(1, [](const Vector& x, Vector& out) { out(0) = 2.1 - 0.3 * x(0); });
    const Ensemble ens = noisy_ensemble(20, 91);

    const metrics::MetricReport report =
        metrics::compute_metrics(*truth, *candidate, ens, {0.26, 0.5}, 0.9);
    CHECK(report.l2_rho.value > 0.0);
    CHECK_FALSE(report.l2_rho.absolute_fallback);
    CHECK(report.trajectory.mean > 0.0);
    CHECK(report.trajectory.skipped == 0);
    REQUIRE(report.wasserstein.size() == 2);
    // The report keeps the requested times even though evaluation snaps to
    // the grid.
    CHECK(report.wasserstein[0].time == 0.26);
    CHECK(report.wasserstein[1].time == 0.5);
    CHECK(report.wasserstein[0].distance >= 0.0);
    CHECK(report.central_fraction == 0.9);
    CHECK(report.central_l2.value > 0.0);

    // Without a central fraction the extra block stays untouched.
    const metrics::MetricReport plain =
        metrics::compute_metrics(*truth, *candidate, ens, {0.5});
    CHECK(plain.central_fraction == 0.0);
    CHECK(plain.central_l2.value == 0.0);

    // Replaying the exact truth gives zero trajectory error; the candidate
    // shift keeps the l2 metric strictly between the two.
    const metrics::MetricReport self = metrics::compute_metrics(*truth, *truth, ens, {});
    CHECK(self.l2_rho.value == 0.0);
    CHECK(self.trajectory.mean == 0.0);
    CHECK(self.wasserstein.empty());
}
