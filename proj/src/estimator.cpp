#include "driftfit/estimator.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <string>
#include <thread>
#include <utility>

#include <Eigen/Cholesky>

#include "driftfit/errors.hpp"

namespace driftfit::estimator {

namespace {

thread_local std::vector<std::pair<int, double>> tl_support;

} // namespace

BasisDrift::BasisDrift(basis::TensorBasis tensor, Matrix coefficients)
    : tensor_(std::move(tensor)), coefficients_(std::move(coefficients)) {
    if (coefficients_.rows() != tensor_.size())
        throw Error("basis drift: coefficient rows must match the basis size");
    if (!coefficients_.allFinite())
        throw Error("basis drift: coefficients must be finite");
}

void BasisDrift::eval(const Vector& x, Vector& out) const {
    auto& nz = tl_support;
    tensor_.evaluate_support(x, nz);
    out.setZero();
    for (const auto& [i, v] : nz)
        out.noalias() += v * coefficients_.row(i).transpose();
}

double empirical_loss(const dynamics::Drift& candidate, const dynamics::Ensemble& ensemble,
                      const dynamics::CovarianceModel& cov) {
    if (ensemble.length() < 2)
        throw Error("empirical loss: ensemble needs at least two times");
    const int d = ensemble.dim;
    const auto& grid = ensemble.grid;
    Vector x(d), fx(d), dx(d), weighted(d);
    double loss = 0.0;
    for (const auto& path : ensemble.paths) {
        for (std::size_t l = 0; l + 1 < ensemble.length(); ++l) {
            const double dt = grid.dt(l);
            x = path.states.row(static_cast<Eigen::Index>(l));
            dx = path.states.row(static_cast<Eigen::Index>(l + 1)) -
                 path.states.row(static_cast<Eigen::Index>(l));
            candidate.eval(x, fx);
            cov.apply_inverse(x, fx, weighted);
            loss += 0.5 * fx.dot(weighted) * dt - dx.dot(weighted);
        }
    }
    return loss / (grid.horizon() * static_cast<double>(ensemble.size()));
}

namespace {

struct DiagonalPartial {
    std::vector<Matrix> a;
    std::vector<Vector> b;
    std::size_t samples = 0;
};

void accumulate_diagonal(const dynamics::Ensemble& ensemble, const basis::TensorBasis& tensor,
                         const dynamics::CovarianceModel& cov, std::size_t m_begin,
                         std::size_t m_end, DiagonalPartial& partial) {
    const int d = ensemble.dim;
    const int n = tensor.size();
    partial.a.assign(static_cast<std::size_t>(d), Matrix::Zero(n, n));
    partial.b.assign(static_cast<std::size_t>(d), Vector::Zero(n));
    partial.samples = 0;

    std::vector<std::pair<int, double>> nz;
    Vector x(d), dx(d), inv_s2(d);
    const bool constant_noise = cov.is_constant();
    if (constant_noise)
        for (int k = 0; k < d; ++k)
            inv_s2[k] = 1.0 / cov.diagonal_values()[k];

    for (std::size_t m = m_begin; m < m_end; ++m) {
        const auto& path = ensemble.paths[m];
        for (std::size_t l = 0; l + 1 < ensemble.length(); ++l) {
            const double dt = ensemble.grid.dt(l);
            x = path.states.row(static_cast<Eigen::Index>(l));
            dx = path.states.row(static_cast<Eigen::Index>(l + 1)) -
                 path.states.row(static_cast<Eigen::Index>(l));
            if (!constant_noise)
                for (int k = 0; k < d; ++k)
                    inv_s2[k] = 1.0 / cov.sigma2_at(x, k);
            tensor.evaluate_support(x, nz);
            for (const auto& [i, vi] : nz) {
                for (int k = 0; k < d; ++k)
                    partial.b[static_cast<std::size_t>(k)][i] += vi * dx[k] * inv_s2[k];
                for (const auto& [j, vj] : nz) {
                    const double w = vi * vj * dt;
                    for (int k = 0; k < d; ++k)
                        partial.a[static_cast<std::size_t>(k)](i, j) += w * inv_s2[k];
                }
            }
            ++partial.samples;
        }
    }
}

constexpr std::size_t kAssemblyBlock = 64;

} // namespace

NormalSystem assemble_diagonal_system(const dynamics::Ensemble& ensemble,
                                      const basis::TensorBasis& tensor,
                                      const dynamics::CovarianceModel& cov, int threads) {
    if (!cov.is_diagonal())
        throw Error("assemble: covariance must be diagonal for the closed-form path");
    if (cov.dim() != ensemble.dim || tensor.dim() != ensemble.dim)
        throw Error("assemble: dimension mismatch");

    const int d = ensemble.dim;
    const int n = tensor.size();
    const std::size_t m_total = ensemble.size();
    const std::size_t n_blocks = (m_total + kAssemblyBlock - 1) / kAssemblyBlock;

    std::vector<DiagonalPartial> partials(n_blocks);
    auto run_block = [&](std::size_t blk) {
        const std::size_t begin = blk * kAssemblyBlock;
        const std::size_t end = std::min(m_total, begin + kAssemblyBlock);
        accumulate_diagonal(ensemble, tensor, cov, begin, end, partials[blk]);
    };

    if (threads <= 1 || n_blocks == 1) {
        for (std::size_t blk = 0; blk < n_blocks; ++blk)
            run_block(blk);
    } else {
        std::atomic<std::size_t> next{0};
        auto worker = [&]() {
            for (;;) {
                const std::size_t blk = next.fetch_add(1);
                if (blk >= n_blocks)
                    return;
                run_block(blk);
            }
        };
        std::vector<std::thread> pool;
        for (int t = 0; t < threads; ++t)
            pool.emplace_back(worker);
        for (auto& th : pool)
            th.join();
    }

    // Fixed block order keeps the reduction identical for any worker count.
    NormalSystem system;
    system.a.assign(static_cast<std::size_t>(d), Matrix::Zero(n, n));
    system.b.assign(static_cast<std::size_t>(d), Vector::Zero(n));
    for (std::size_t blk = 0; blk < n_blocks; ++blk) {
        for (int k = 0; k < d; ++k) {
            system.a[static_cast<std::size_t>(k)] += partials[blk].a[static_cast<std::size_t>(k)];
            system.b[static_cast<std::size_t>(k)] += partials[blk].b[static_cast<std::size_t>(k)];
        }
        system.samples += partials[blk].samples;
    }

    const double scale =
        1.0 / (ensemble.grid.horizon() * static_cast<double>(ensemble.size()));
    for (int k = 0; k < d; ++k) {
        system.a[static_cast<std::size_t>(k)] *= scale;
        system.b[static_cast<std::size_t>(k)] *= scale;
    }
    return system;
}

namespace {

Vector solve_column(const Matrix& a, const Vector& b, double ridge, int k) {
    Matrix regularized = a;
    if (ridge > 0.0)
        regularized.diagonal().array() += ridge;
    Eigen::LLT<Matrix> llt(regularized);
    if (llt.info() != Eigen::Success)
        throw SingularSystemError("solve: normal matrix for dimension " + std::to_string(k) +
                                  " is singular" + (ridge > 0.0 ? " even with ridge" : ""));
    return llt.solve(b);
}

} // namespace

Matrix solve_system(const NormalSystem& system, double ridge) {
    if (ridge < 0.0)
        throw Error("solve: ridge must be nonnegative");
    const int d = system.dims();
    const int n = system.size();
    Matrix coefficients(n, d);
    for (int k = 0; k < d; ++k)
        coefficients.col(k) = solve_column(system.a[static_cast<std::size_t>(k)],
                                           system.b[static_cast<std::size_t>(k)], ridge, k);
    return coefficients;
}

BasisDrift fit_basis_drift(const dynamics::Ensemble& ensemble, const basis::TensorBasis& tensor,
                           const dynamics::CovarianceModel& cov, double ridge, int threads) {
    const NormalSystem system = assemble_diagonal_system(ensemble, tensor, cov, threads);
    try {
        return BasisDrift(tensor, solve_system(system, ridge));
    } catch (const SingularSystemError&) {
        if (ridge != 0.0)
            throw;
    }
    // Default ridge keeps unobserved basis cells at zero coefficients.
    const int d = system.dims();
    const int n = system.size();
    Matrix coefficients(n, d);
    for (int k = 0; k < d; ++k) {
        const auto& a = system.a[static_cast<std::size_t>(k)];
        const double fallback = 1e-10 * a.trace() / static_cast<double>(n);
        coefficients.col(k) = solve_column(a, system.b[static_cast<std::size_t>(k)], fallback, k);
    }
    return BasisDrift(tensor, coefficients);
}

namespace {

/// One pass over the data collecting the loss and, when `gradient` is not
/// null, the analytic coefficient gradient.
double loss_and_gradient(const Matrix& coefficients, const dynamics::Ensemble& ensemble,
                         const basis::TensorBasis& tensor, const dynamics::CovarianceModel& cov,
                         Matrix* gradient) {
    const int d = ensemble.dim;
    if (gradient)
        gradient->setZero();
    std::vector<std::pair<int, double>> nz;
    Vector x(d), dx(d), f(d), weighted(d), residual(d);
    double loss = 0.0;
    for (const auto& path : ensemble.paths) {
        for (std::size_t l = 0; l + 1 < ensemble.length(); ++l) {
            const double dt = ensemble.grid.dt(l);
            x = path.states.row(static_cast<Eigen::Index>(l));
            dx = path.states.row(static_cast<Eigen::Index>(l + 1)) -
                 path.states.row(static_cast<Eigen::Index>(l));
            tensor.evaluate_support(x, nz);
            f.setZero();
            for (const auto& [i, v] : nz)
                f.noalias() += v * coefficients.row(i).transpose();
            cov.apply_inverse(x, f, weighted);
            loss += 0.5 * f.dot(weighted) * dt - dx.dot(weighted);
            if (gradient) {
                cov.apply_inverse(x, f * dt - dx, residual);
                for (const auto& [i, v] : nz)
                    gradient->row(i) += v * residual.transpose();
            }
        }
    }
    const double scale =
        1.0 / (ensemble.grid.horizon() * static_cast<double>(ensemble.size()));
    if (gradient)
        *gradient *= scale;
    return loss * scale;
}

} // namespace

Matrix coefficient_gradient(const Matrix& coefficients, const dynamics::Ensemble& ensemble,
                            const basis::TensorBasis& tensor,
                            const dynamics::CovarianceModel& cov) {
    Matrix gradient(tensor.size(), ensemble.dim);
    loss_and_gradient(coefficients, ensemble, tensor, cov, &gradient);
    return gradient;
}

GradientFitResult fit_general(const dynamics::Ensemble& ensemble, const basis::TensorBasis& tensor,
                              const dynamics::CovarianceModel& cov, const OptimizerConfig& opt) {
    if (!(opt.step > 0.0))
        throw Error("fit_general: step size must be positive");
    const int n = tensor.size();
    const int d = ensemble.dim;

    GradientFitResult result;
    result.coefficients = Matrix::Zero(n, d);
    if (opt.max_iterations == 0)
        return result;

    Matrix gradient(n, d);
    Matrix adam_m = Matrix::Zero(n, d);
    Matrix adam_v = Matrix::Zero(n, d);
    constexpr double beta1 = 0.9;
    constexpr double beta2 = 0.999;
    constexpr double eps = 1e-8;

    double previous_loss = loss_and_gradient(result.coefficients, ensemble, tensor, cov, &gradient);
    for (std::size_t it = 1; it <= opt.max_iterations; ++it) {
        if (!std::isfinite(previous_loss))
            throw DivergedError("fit_general: loss became non-finite (step too large?)");
        switch (opt.method) {
        case OptimMethod::GradientDescent:
            result.coefficients -= opt.step * gradient;
            break;
        case OptimMethod::Adam: {
            adam_m = beta1 * adam_m + (1.0 - beta1) * gradient;
            adam_v = beta2 * adam_v + (1.0 - beta2) * gradient.cwiseProduct(gradient);
            const double c1 = 1.0 - std::pow(beta1, static_cast<double>(it));
            const double c2 = 1.0 - std::pow(beta2, static_cast<double>(it));
            result.coefficients.array() -=
                opt.step * (adam_m.array() / c1) /
                ((adam_v.array() / c2).sqrt() + eps);
            break;
        }
        }
        const double loss = loss_and_gradient(result.coefficients, ensemble, tensor, cov, &gradient);
        if (!std::isfinite(loss))
            throw DivergedError("fit_general: loss became non-finite (step too large?)");
        result.report.iterations = it;
        result.report.final_loss = loss;
        if (previous_loss - loss >= 0.0 && previous_loss - loss < opt.tolerance) {
            result.report.converged = true;
            break;
        }
        previous_loss = loss;
    }
    return result;
}

} // namespace driftfit::estimator
