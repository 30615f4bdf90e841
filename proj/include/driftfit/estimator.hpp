#pragma once

#include <cstdint>
#include <vector>

#include "driftfit/basis.hpp"
#include "driftfit/covariance.hpp"
#include "driftfit/drift.hpp"
#include "driftfit/ensemble.hpp"

namespace driftfit::estimator {

/// A drift in basis form: f(x) = sum_i a_i psi_i(x) with vector coefficients
/// a_i kept as rows of an (n x d) matrix alongside the tensor basis that
/// defines the psi_i.
class BasisDrift final : public dynamics::Drift {
public:
    BasisDrift(basis::TensorBasis tensor, Matrix coefficients);

    int dim() const override { return static_cast<int>(coefficients_.cols()); }
    void eval(const Vector& x, Vector& out) const override;

    const basis::TensorBasis& tensor() const { return tensor_; }
    const Matrix& coefficients() const { return coefficients_; }

private:
    basis::TensorBasis tensor_;
    Matrix coefficients_;  // n x d
};

/// The per-dimension normal equations A_k alpha_k = b_k of the quadratic
/// empirical loss under diagonal noise.
struct NormalSystem {
    std::vector<Matrix> a;  // d matrices, each n x n symmetric
    std::vector<Vector> b;  // d vectors of length n
    std::size_t samples = 0;

    int dims() const { return static_cast<int>(a.size()); }
    int size() const { return a.empty() ? 0 : static_cast<int>(a.front().rows()); }
};

enum class OptimMethod { GradientDescent, Adam };

struct OptimizerConfig {
    OptimMethod method = OptimMethod::Adam;
    double step = 1e-3;
    std::size_t max_iterations = 1000;  // epochs, for the minibatch MLP path
    double tolerance = 0.0;             // stop when the loss decrease falls below this
    std::uint64_t seed = 0;
    std::size_t batch_size = 1024;      // minibatch size, MLP path only
};

struct ConvergenceReport {
    std::size_t iterations = 0;
    double final_loss = 0.0;
    bool converged = false;
};

/// Discretized trajectory likelihood loss of a candidate drift:
///   (1 / (T M)) sum_{m,l} [ 1/2 <f(x), D^{-1}(x) f(x)> dt_l
///                           - <f(x), D^{-1}(x) (x_{l+1} - x_l)> ].
double empirical_loss(const dynamics::Drift& candidate, const dynamics::Ensemble& ensemble,
                      const dynamics::CovarianceModel& cov);

/// Builds the normal equations for a diagonal covariance:
///   A_k(i,j) = (1/(T M)) sum_{m,l} psi_i psi_j dt_l / sigma_k^2(x_l^m)
///   b_k(i)   = (1/(T M)) sum_{m,l} psi_i (x_{l+1}^m - x_l^m)_k / sigma_k^2(x_l^m).
/// Worker partial sums are combined in a fixed block order, so the result is
/// independent of `threads`.
NormalSystem assemble_diagonal_system(const dynamics::Ensemble& ensemble,
                                      const basis::TensorBasis& tensor,
                                      const dynamics::CovarianceModel& cov, int threads = 1);

/// Solves (A_k + ridge I) alpha_k = b_k for every k by Cholesky
/// factorization. Throws SingularSystemError when a factorization fails.
Matrix solve_system(const NormalSystem& system, double ridge = 0.0);

/// Assembly followed by the simultaneous solve. A singular system with
/// ridge = 0 is retried once with the default per-dimension ridge
/// 1e-10 * trace(A_k) / n, which parks coefficients of empty basis cells
/// near zero.
BasisDrift fit_basis_drift(const dynamics::Ensemble& ensemble, const basis::TensorBasis& tensor,
                           const dynamics::CovarianceModel& cov, double ridge = 0.0,
                           int threads = 1);

/// Analytic gradient of empirical_loss with respect to every coefficient:
///   dE/da_i = (1/(T M)) sum_{m,l} psi_i(x) D^{-1}(x) (f(x) dt_l - dx).
/// Valid for any SPD covariance.
Matrix coefficient_gradient(const Matrix& coefficients, const dynamics::Ensemble& ensemble,
                            const basis::TensorBasis& tensor,
                            const dynamics::CovarianceModel& cov);

struct GradientFitResult {
    Matrix coefficients;
    ConvergenceReport report;
};

/// Full-batch first-order minimization of the empirical loss from zero
/// initialization, for covariances without the diagonal structure the
/// closed-form solve needs. Throws DivergedError when the loss leaves the
/// finite range.
GradientFitResult fit_general(const dynamics::Ensemble& ensemble,
                              const basis::TensorBasis& tensor,
                              const dynamics::CovarianceModel& cov, const OptimizerConfig& opt);

} // namespace driftfit::estimator
