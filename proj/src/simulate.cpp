#include "driftfit/simulate.hpp"

#include <atomic>
#include <cmath>
#include <mutex>
#include <random>
#include <string>
#include <thread>

#include "driftfit/rng.hpp"

namespace driftfit::dynamics {

InitialDistribution InitialDistribution::uniform(Vector lo, Vector hi) {
    if (lo.size() != hi.size() || lo.size() == 0)
        throw Error("initial distribution: lo/hi must share a positive dimension");
    for (Eigen::Index k = 0; k < lo.size(); ++k)
        if (!(lo[k] <= hi[k]))
            throw Error("initial distribution: lo must not exceed hi");
    InitialDistribution d;
    d.kind = Kind::Uniform;
    d.lo = std::move(lo);
    d.hi = std::move(hi);
    return d;
}

InitialDistribution InitialDistribution::points_list(std::vector<Vector> pts) {
    if (pts.empty())
        throw Error("initial distribution: point list is empty");
    for (const auto& p : pts)
        if (p.size() != pts.front().size())
            throw Error("initial distribution: points must share one dimension");
    InitialDistribution d;
    d.kind = Kind::Points;
    d.points = std::move(pts);
    return d;
}

Vector em_step(const Vector& x, const Drift& drift, const CovarianceModel& cov, double dt,
               const Vector& dw) {
    if (!(dt > 0.0))
        throw Error("em_step: dt must be positive");
    Vector fx(x.size());
    drift.eval(x, fx);
    if (!fx.allFinite())
        throw NonFiniteError("em_step: drift evaluated to a non-finite value");
    const Vector realized = cov.factor_at(x) * dw;
    Vector out(x.size());
    em_advance(x, fx, dt, realized, out);
    if (!out.allFinite())
        throw NonFiniteError("em_step: state overflowed");
    return out;
}

namespace {

void simulate_one(std::size_t m, const Drift& drift, const CovarianceModel& cov,
                  const TimeGrid& grid, const InitialDistribution& init, std::uint64_t seed,
                  bool record_noise, Trajectory& out) {
    const int d = cov.dim();
    const std::size_t length = grid.size();
    auto rng = substream(seed, m);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    std::normal_distribution<double> normal(0.0, 1.0);

    out.states.resize(static_cast<Eigen::Index>(length), d);
    if (record_noise)
        out.noise.resize(static_cast<Eigen::Index>(length - 1), d);

    Vector x(d);
    switch (init.kind) {
    case InitialDistribution::Kind::Uniform:
        for (int k = 0; k < d; ++k)
            x[k] = init.lo[k] + (init.hi[k] - init.lo[k]) * unif(rng);
        break;
    case InitialDistribution::Kind::Points:
        x = init.points.size() == 1 ? init.points[0] : init.points[m];
        break;
    }
    out.states.row(0) = x;

    const bool constant_factor = cov.is_constant();
    Matrix factor;
    if (constant_factor)
        cov.factor_at(x, factor);

    Vector fx(d), dw(d), realized(d), next(d);
    for (std::size_t l = 0; l + 1 < length; ++l) {
        const double dt = grid.dt(l);
        const double sqrt_dt = std::sqrt(dt);
        drift.eval(x, fx);
        if (!fx.allFinite())
            throw NonFiniteError("simulate: drift blew up at trajectory " + std::to_string(m) +
                                 ", step " + std::to_string(l));
        if (!constant_factor)
            cov.factor_at(x, factor);
        for (int k = 0; k < d; ++k)
            dw[k] = sqrt_dt * normal(rng);
        realized.noalias() = factor * dw;
        em_advance(x, fx, dt, realized, next);
        if (!next.allFinite())
            throw NonFiniteError("simulate: state overflowed at trajectory " + std::to_string(m) +
                                 ", step " + std::to_string(l));
        if (record_noise)
            out.noise.row(static_cast<Eigen::Index>(l)) = realized;
        x = next;
        out.states.row(static_cast<Eigen::Index>(l + 1)) = x;
    }
}

} // namespace

Ensemble simulate_ensemble(const Drift& drift, const CovarianceModel& cov, const TimeGrid& grid,
                           std::size_t n_trajectories, const InitialDistribution& init,
                           std::uint64_t seed, bool record_noise, int threads) {
    if (n_trajectories < 1)
        throw Error("simulate: need at least one trajectory");
    if (drift.dim() != cov.dim())
        throw Error("simulate: drift and covariance dimensions differ");
    if (init.kind == InitialDistribution::Kind::Uniform) {
        if (init.lo.size() != cov.dim())
            throw Error("simulate: initial distribution dimension mismatch");
    } else if (init.points.front().size() != cov.dim() ||
               (init.points.size() != 1 && init.points.size() != n_trajectories)) {
        throw Error("simulate: initial point list must hold 1 or M points of dimension d");
    }

    Ensemble ens;
    ens.grid = grid;
    ens.dim = cov.dim();
    ens.seed = seed;
    ens.paths.resize(n_trajectories);

    if (threads <= 1) {
        for (std::size_t m = 0; m < n_trajectories; ++m)
            simulate_one(m, drift, cov, grid, init, seed, record_noise, ens.paths[m]);
        return ens;
    }

    // Trajectories are independent with per-trajectory substreams, so any
    // scheduling yields the same ensemble.
    std::atomic<std::size_t> next_index{0};
    std::atomic<bool> failed{false};
    std::string failure;
    std::mutex failure_mutex;
    auto worker = [&]() {
        for (;;) {
            const std::size_t m = next_index.fetch_add(1);
            if (m >= n_trajectories || failed.load())
                return;
            try {
                simulate_one(m, drift, cov, grid, init, seed, record_noise, ens.paths[m]);
            } catch (const std::exception& e) {
                std::lock_guard<std::mutex> lock(failure_mutex);
                failed.store(true);
                if (failure.empty())
                    failure = e.what();
                return;
            }
        }
    };
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(threads));
    for (int t = 0; t < threads; ++t)
        pool.emplace_back(worker);
    for (auto& th : pool)
        th.join();
    if (failed.load())
        throw NonFiniteError(failure);
    return ens;
}

double quadratic_variation_sigma(const Ensemble& ensemble) {
    if (ensemble.length() < 2 || ensemble.size() < 1)
        throw Error("quadratic variation: ensemble needs at least two times");
    const double horizon = ensemble.grid.horizon();
    double total = 0.0;
    for (const auto& path : ensemble.paths) {
        const auto length = path.states.rows();
        for (Eigen::Index l = 0; l + 1 < length; ++l)
            total += (path.states.row(l + 1) - path.states.row(l)).squaredNorm();
    }
    const double m = static_cast<double>(ensemble.size());
    const double d = static_cast<double>(ensemble.dim);
    return std::sqrt(total / (m * horizon * d));
}

} // namespace driftfit::dynamics
