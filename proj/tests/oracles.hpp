#pragma once

// Independent reference implementations the test suites check the library
// against. Everything here favors transparency over speed: textbook
// recursions, explicitly weighted dense least squares, brute-force
// enumeration.

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/QR>

#include "driftfit/basis.hpp"
#include "driftfit/covariance.hpp"
#include "driftfit/ensemble.hpp"
#include "driftfit/types.hpp"

namespace oracles {

using driftfit::Matrix;
using driftfit::Vector;

/// Textbook Cox-de Boor recursion:
///   B_{i,0}(x) = 1 on [t_i, t_{i+1}), else 0,
///   B_{i,p}(x) = (x - t_i) / (t_{i+p} - t_i) * B_{i,p-1}(x)
///              + (t_{i+p+1} - x) / (t_{i+p+1} - t_{i+1}) * B_{i+1,p-1}(x),
/// with 0/0 terms dropped. Valid strictly inside the knot range; the right
/// endpoint follows the half-open convention and is checked separately.
inline double bspline_recursive(const std::vector<double>& knots, int i, int p, double x) {
    if (p == 0)
        return knots[static_cast<std::size_t>(i)] <= x &&
                       x < knots[static_cast<std::size_t>(i) + 1]
                   ? 1.0
                   : 0.0;
    double result = 0.0;
    const double d_left = knots[static_cast<std::size_t>(i + p)] - knots[static_cast<std::size_t>(i)];
    if (d_left > 0.0)
        result += (x - knots[static_cast<std::size_t>(i)]) / d_left *
                  bspline_recursive(knots, i, p - 1, x);
    const double d_right =
        knots[static_cast<std::size_t>(i + p) + 1] - knots[static_cast<std::size_t>(i) + 1];
    if (d_right > 0.0)
        result += (knots[static_cast<std::size_t>(i + p) + 1] - x) / d_right *
                  bspline_recursive(knots, i + 1, p - 1, x);
    return result;
}

/// Clamped knot vector for a breakpoint sequence: each endpoint repeated
/// `degree` extra times, matching the library's construction.
inline std::vector<double> clamped_knots(const std::vector<double>& breakpoints, int degree) {
    std::vector<double> knots;
    knots.reserve(breakpoints.size() + 2 * static_cast<std::size_t>(degree));
    for (int i = 0; i < degree; ++i)
        knots.push_back(breakpoints.front());
    knots.insert(knots.end(), breakpoints.begin(), breakpoints.end());
    for (int i = 0; i < degree; ++i)
        knots.push_back(breakpoints.back());
    return knots;
}

/// Weighted-least-squares reference for the drift coefficients. For each
/// dimension k the quadratic trajectory loss is, up to a constant, the
/// weighted residual sum
///   sum_{m,l} (dt_l / sigma_k^2) * (psi(x_l)^T a_k - dx_k / dt_l)^2,
/// so the minimizer is the solution of the explicitly weighted design matrix
/// by QR. This shares no code with the normal-equation assembly it checks.
inline Matrix wls_reference(const driftfit::dynamics::Ensemble& ens,
                            const driftfit::basis::TensorBasis& tensor,
                            const driftfit::dynamics::CovarianceModel& cov) {
    const int d = ens.dim;
    const int n = tensor.size();
    const auto steps = ens.grid.steps();
    const auto rows = static_cast<Eigen::Index>(ens.size() * steps);

    Matrix coefficients(n, d);
    Matrix design(rows, n);
    Vector target(rows);
    Vector x(d);
    for (int k = 0; k < d; ++k) {
        Eigen::Index r = 0;
        for (const auto& path : ens.paths) {
            for (std::size_t l = 0; l < steps; ++l, ++r) {
                const double dt = ens.grid.dt(l);
                x = path.states.row(static_cast<Eigen::Index>(l)).transpose();
                const double w = std::sqrt(dt / cov.sigma2_at(x, k));
                design.row(r) = w * tensor.evaluate(x).transpose();
                const double dx = path.states(static_cast<Eigen::Index>(l) + 1, k) -
                                  path.states(static_cast<Eigen::Index>(l), k);
                target(r) = w * dx / dt;
            }
        }
        coefficients.col(k) = design.colPivHouseholderQr().solve(target);
    }
    return coefficients;
}

/// Brute-force order-1 Wasserstein distance between equally sized samples:
/// the minimum over all pairings of the mean absolute difference. Feasible
/// up to about 8 points (8! = 40320 orderings).
inline double wasserstein_enumerate(const std::vector<double>& a, std::vector<double> b) {
    std::sort(b.begin(), b.end());
    double best = std::numeric_limits<double>::infinity();
    do {
        double total = 0.0;
        for (std::size_t i = 0; i < a.size(); ++i)
            total += std::abs(a[i] - b[i]);
        best = std::min(best, total);
    } while (std::next_permutation(b.begin(), b.end()));
    return best / static_cast<double>(a.size());
}

} // namespace oracles
