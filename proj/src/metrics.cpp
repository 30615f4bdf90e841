#include "driftfit/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

#include "driftfit/errors.hpp"
#include "driftfit/rng.hpp"
#include "driftfit/simulate.hpp"

namespace driftfit::metrics {

namespace {

constexpr int kSlicedProjections = 64;
constexpr std::uint64_t kProjectionSeed = 0x511ced00b1a5e5ull;

/// Linear-interpolation quantile of an already sorted sample.
double sorted_quantile(const std::vector<double>& sorted, double q) {
    const double pos = q * static_cast<double>(sorted.size() - 1);
    const auto lo = static_cast<std::size_t>(pos);
    const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
    const double frac = pos - static_cast<double>(lo);
    return sorted[lo] + frac * (sorted[hi] - sorted[lo]);
}

L2RhoResult l2_between(const Matrix& truth_values, const Matrix& candidate_values) {
    const double num = (truth_values - candidate_values).squaredNorm();
    const double den = truth_values.squaredNorm();
    if (!std::isfinite(num) || !std::isfinite(den))
        throw NonFiniteError("drift evaluation produced a non-finite value while scoring");
    L2RhoResult result;
    if (den == 0.0) {
        result.value = std::sqrt(num / static_cast<double>(truth_values.rows()));
        result.absolute_fallback = true;
    } else {
        result.value = std::sqrt(num / den);
    }
    return result;
}

} // namespace

OccupationSample occupation_sample(const dynamics::Ensemble& ensemble) {
    if (ensemble.paths.empty())
        throw Error("cannot pool an empty ensemble");
    const Eigen::Index per_path = ensemble.paths.front().states.rows();
    OccupationSample occ;
    occ.states.resize(static_cast<Eigen::Index>(ensemble.paths.size()) * per_path, ensemble.dim);
    Eigen::Index row = 0;
    for (const auto& path : ensemble.paths) {
        occ.states.middleRows(row, per_path) = path.states;
        row += per_path;
    }
    return occ;
}

OccupationSample restrict_central(const OccupationSample& occ, double keep_fraction) {
    if (!(keep_fraction > 0.0) || keep_fraction > 1.0)
        throw Error("central quantile fraction must lie in (0, 1]");
    if (occ.size() == 0)
        throw Error("cannot restrict an empty occupation sample");
    const double tail = 0.5 * (1.0 - keep_fraction);
    const int d = occ.dim();
    Vector lo(d);
    Vector hi(d);
    std::vector<double> column(static_cast<std::size_t>(occ.size()));
    for (int k = 0; k < d; ++k) {
        for (Eigen::Index r = 0; r < occ.size(); ++r)
            column[static_cast<std::size_t>(r)] = occ.states(r, k);
        std::sort(column.begin(), column.end());
        lo(k) = sorted_quantile(column, tail);
        hi(k) = sorted_quantile(column, 1.0 - tail);
    }
    std::vector<Eigen::Index> keep;
    keep.reserve(static_cast<std::size_t>(occ.size()));
    for (Eigen::Index r = 0; r < occ.size(); ++r) {
        bool inside = true;
        for (int k = 0; k < d && inside; ++k)
            inside = occ.states(r, k) >= lo(k) && occ.states(r, k) <= hi(k);
        if (inside)
            keep.push_back(r);
    }
    if (keep.empty())
        throw Error("central quantile restriction left no states");
    OccupationSample out;
    out.states.resize(static_cast<Eigen::Index>(keep.size()), d);
    for (std::size_t i = 0; i < keep.size(); ++i)
        out.states.row(static_cast<Eigen::Index>(i)) = occ.states.row(keep[i]);
    return out;
}

L2RhoResult l2_rho_error(const dynamics::Drift& truth, const dynamics::Drift& candidate,
                         const OccupationSample& occ) {
    if (truth.dim() != occ.dim() || candidate.dim() != occ.dim())
        throw Error("drift dimension does not match the occupation sample");
    if (occ.size() == 0)
        throw Error("occupation sample is empty");
    Matrix truth_values;
    Matrix candidate_values;
    truth.eval_batch(occ.states, truth_values);
    candidate.eval_batch(occ.states, candidate_values);
    return l2_between(truth_values, candidate_values);
}

dynamics::Ensemble replay_trajectories(const dynamics::Drift& candidate,
                                       const dynamics::Ensemble& ensemble) {
    if (candidate.dim() != ensemble.dim)
        throw Error("candidate drift dimension does not match the ensemble");
    for (const auto& path : ensemble.paths)
        if (!path.has_noise())
            throw MissingNoiseError("replay requires recorded noise increments on every trajectory");

    dynamics::Ensemble replayed;
    replayed.grid = ensemble.grid;
    replayed.dim = ensemble.dim;
    replayed.seed = ensemble.seed;
    replayed.paths.resize(ensemble.paths.size());

    const auto steps = ensemble.grid.steps();
    Vector x(ensemble.dim);
    Vector fx(ensemble.dim);
    Vector x_next(ensemble.dim);
    for (std::size_t m = 0; m < ensemble.paths.size(); ++m) {
        const auto& src = ensemble.paths[m];
        auto& dst = replayed.paths[m];
        dst.states.resize(src.states.rows(), src.states.cols());
        dst.noise = src.noise;
        x = src.states.row(0).transpose();
        dst.states.row(0) = x.transpose();
        for (std::size_t l = 0; l < steps; ++l) {
            candidate.eval(x, fx);
            dynamics::em_advance(x, fx, ensemble.grid.dt(l),
                                 src.noise.row(static_cast<Eigen::Index>(l)).transpose(), x_next);
            dst.states.row(static_cast<Eigen::Index>(l) + 1) = x_next.transpose();
            x = x_next;
        }
    }
    return replayed;
}

TrajectoryError trajectory_error(const dynamics::Ensemble& reference,
                                 const dynamics::Ensemble& replayed) {
    if (reference.paths.size() != replayed.paths.size())
        throw Error("trajectory error needs matching ensemble sizes");
    if (reference.dim != replayed.dim || !(reference.grid == replayed.grid))
        throw Error("trajectory error needs matching grids and dimensions");

    std::vector<double> errors;
    errors.reserve(reference.paths.size());
    TrajectoryError result;
    for (std::size_t m = 0; m < reference.paths.size(); ++m) {
        const Matrix& x = reference.paths[m].states;
        const Matrix& xh = replayed.paths[m].states;
        const double num = (x - xh).squaredNorm();
        const double den = x.squaredNorm();
        if (den == 0.0 || !std::isfinite(num) || !std::isfinite(den)) {
            ++result.skipped;
            continue;
        }
        errors.push_back(num / den);
    }
    if (errors.empty())
        throw Error("every trajectory was skipped while scoring the replay error");
    double mean = 0.0;
    for (double e : errors)
        mean += e;
    mean /= static_cast<double>(errors.size());
    double var = 0.0;
    for (double e : errors)
        var += (e - mean) * (e - mean);
    var /= static_cast<double>(errors.size());
    result.mean = mean;
    result.std_dev = std::sqrt(std::max(var, 0.0));
    return result;
}

double wasserstein1d(std::vector<double> a, std::vector<double> b) {
    if (a.empty() || a.size() != b.size())
        throw Error("order-1 Wasserstein needs two equally sized nonempty samples");
    std::sort(a.begin(), a.end());
    std::sort(b.begin(), b.end());
    double total = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i)
        total += std::abs(a[i] - b[i]);
    return total / static_cast<double>(a.size());
}

double wasserstein_snapshot(const dynamics::Ensemble& ensemble,
                            const dynamics::Ensemble& ensemble_hat, double t) {
    if (!(ensemble.grid == ensemble_hat.grid))
        throw Error("snapshot distance needs a shared time grid");
    if (ensemble.dim != ensemble_hat.dim || ensemble.paths.size() != ensemble_hat.paths.size())
        throw Error("snapshot distance needs matching ensemble shapes");
    const auto index = static_cast<Eigen::Index>(ensemble.grid.nearest_index(t));
    const auto m_count = ensemble.paths.size();
    const int d = ensemble.dim;

    std::vector<double> a(m_count);
    std::vector<double> b(m_count);
    if (d == 1) {
        for (std::size_t m = 0; m < m_count; ++m) {
            a[m] = ensemble.paths[m].states(index, 0);
            b[m] = ensemble_hat.paths[m].states(index, 0);
        }
        return wasserstein1d(std::move(a), std::move(b));
    }

    // Sliced order-1 distance: average the 1D distance over fixed random
    // directions drawn once from a dedicated seed.
    auto gen = dynamics::substream(kProjectionSeed, 0);
    std::normal_distribution<double> normal(0.0, 1.0);
    Vector direction(d);
    double total = 0.0;
    for (int p = 0; p < kSlicedProjections; ++p) {
        double norm = 0.0;
        do {
            for (int k = 0; k < d; ++k)
                direction(k) = normal(gen);
            norm = direction.norm();
        } while (norm < 1e-12);
        direction /= norm;
        for (std::size_t m = 0; m < m_count; ++m) {
            a[m] = ensemble.paths[m].states.row(index) * direction;
            b[m] = ensemble_hat.paths[m].states.row(index) * direction;
        }
        total += wasserstein1d(a, b);
    }
    return total / kSlicedProjections;
}

MetricReport compute_metrics(const dynamics::Drift& truth, const dynamics::Drift& candidate,
                             const dynamics::Ensemble& data,
                             const std::vector<double>& snapshot_times, double central_fraction) {
    MetricReport report;
    const OccupationSample occ = occupation_sample(data);
    report.l2_rho = l2_rho_error(truth, candidate, occ);
    if (central_fraction > 0.0) {
        report.central_fraction = central_fraction;
        report.central_l2 = l2_rho_error(truth, candidate, restrict_central(occ, central_fraction));
    }
    const dynamics::Ensemble replayed = replay_trajectories(candidate, data);
    report.trajectory = trajectory_error(data, replayed);
    report.wasserstein.reserve(snapshot_times.size());
    for (double t : snapshot_times)
        report.wasserstein.push_back({t, wasserstein_snapshot(data, replayed, t)});
    return report;
}

} // namespace driftfit::metrics
