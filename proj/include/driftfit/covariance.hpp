#pragma once

#include <functional>
#include <memory>
#include <vector>

#include "driftfit/types.hpp"

namespace driftfit::dynamics {

/// Noise covariance D(x) of the driving Brownian motion. Variants range
/// from a single constant sigma^2 to a full SPD-matrix-valued function of
/// the state. Constant variants validate and factorize at construction;
/// state-dependent variants validate at every evaluation point.
class CovarianceModel {
public:
    enum class Kind { ScalarConstant, DiagonalConstant, DiagonalFunction, FullConstant, FullFunction };

    using ScalarFn = std::function<double(const Vector&)>;
    using MatrixFn = std::function<Matrix(const Vector&)>;

    static CovarianceModel scalar_constant(int dim, double sigma2);
    static CovarianceModel diagonal_constant(Vector sigma2);
    /// One positive function sigma_k^2(x) per coordinate.
    static CovarianceModel diagonal_function(int dim, std::vector<ScalarFn> sigma2);
    static CovarianceModel full_constant(Matrix d_matrix);
    static CovarianceModel full_function(int dim, MatrixFn d_matrix);

    Kind kind() const { return kind_; }
    int dim() const { return dim_; }
    bool is_diagonal() const {
        return kind_ == Kind::ScalarConstant || kind_ == Kind::DiagonalConstant ||
               kind_ == Kind::DiagonalFunction;
    }
    bool is_constant() const {
        return kind_ == Kind::ScalarConstant || kind_ == Kind::DiagonalConstant ||
               kind_ == Kind::FullConstant;
    }

    /// D(x) as a dense matrix.
    Matrix matrix_at(const Vector& x) const;

    /// Lower-triangular C(x) with C C^T = D(x). Throws NotSpdError when a
    /// pivot falls below 1e-12 of the largest diagonal entry.
    Matrix factor_at(const Vector& x) const;

    /// Writes C(x) into `factor` without allocating for constant variants.
    void factor_at(const Vector& x, Matrix& factor) const;

    /// out = D(x)^{-1} v.
    void apply_inverse(const Vector& x, const Vector& v, Vector& out) const;

    /// Diagonal variants only: sigma_k^2(x).
    double sigma2_at(const Vector& x, int k) const;

    /// Constant variants only: the model scaled by c (used by invariance tests).
    CovarianceModel scaled(double c) const;

    const Vector& diagonal_values() const { return diag_sigma2_; }
    const Matrix& constant_matrix() const { return const_matrix_; }

private:
    CovarianceModel(Kind kind, int dim) : kind_(kind), dim_(dim) {}

    Kind kind_;
    int dim_;
    Vector diag_sigma2_;                 // ScalarConstant / DiagonalConstant
    std::vector<ScalarFn> diag_fns_;     // DiagonalFunction
    Matrix const_matrix_;                // FullConstant
    Matrix const_factor_;                // FullConstant, precomputed
    Matrix const_inverse_;               // FullConstant, precomputed
    MatrixFn matrix_fn_;                 // FullFunction
};

/// Lower-triangular Cholesky factor of an SPD matrix with an explicit pivot
/// tolerance of 1e-12 relative to the largest diagonal entry.
Matrix cholesky_factor(const Matrix& spd);

} // namespace driftfit::dynamics
