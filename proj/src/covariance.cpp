#include "driftfit/covariance.hpp"

#include <cmath>

#include "driftfit/errors.hpp"

namespace driftfit::dynamics {

Matrix cholesky_factor(const Matrix& spd) {
    const auto n = spd.rows();
    if (spd.cols() != n)
        throw NotSpdError("covariance matrix is not square");
    if (!spd.isApprox(spd.transpose(), 1e-12))
        throw NotSpdError("covariance matrix is not symmetric");

    double max_diag = 0.0;
    for (Eigen::Index i = 0; i < n; ++i)
        max_diag = std::max(max_diag, std::abs(spd(i, i)));
    const double pivot_floor = 1e-12 * max_diag;

    Matrix factor = Matrix::Zero(n, n);
    for (Eigen::Index j = 0; j < n; ++j) {
        double pivot = spd(j, j);
        for (Eigen::Index k = 0; k < j; ++k)
            pivot -= factor(j, k) * factor(j, k);
        if (!(pivot > pivot_floor))
            throw NotSpdError("covariance matrix has a non-positive pivot at index " +
                              std::to_string(j));
        factor(j, j) = std::sqrt(pivot);
        for (Eigen::Index i = j + 1; i < n; ++i) {
            double s = spd(i, j);
            for (Eigen::Index k = 0; k < j; ++k)
                s -= factor(i, k) * factor(j, k);
            factor(i, j) = s / factor(j, j);
        }
    }
    return factor;
}

CovarianceModel CovarianceModel::scalar_constant(int dim, double sigma2) {
    if (dim < 1)
        throw Error("covariance: dimension must be >= 1");
    if (!(sigma2 > 0.0) || !std::isfinite(sigma2))
        throw NotSpdError("covariance: sigma^2 must be positive and finite");
    CovarianceModel m(Kind::ScalarConstant, dim);
    m.diag_sigma2_ = Vector::Constant(dim, sigma2);
    return m;
}

CovarianceModel CovarianceModel::diagonal_constant(Vector sigma2) {
    const int dim = static_cast<int>(sigma2.size());
    if (dim < 1)
        throw Error("covariance: dimension must be >= 1");
    for (int k = 0; k < dim; ++k)
        if (!(sigma2[k] > 0.0) || !std::isfinite(sigma2[k]))
            throw NotSpdError("covariance: every sigma_k^2 must be positive and finite");
    CovarianceModel m(Kind::DiagonalConstant, dim);
    m.diag_sigma2_ = std::move(sigma2);
    return m;
}

CovarianceModel CovarianceModel::diagonal_function(int dim, std::vector<ScalarFn> sigma2) {
    if (dim < 1 || static_cast<int>(sigma2.size()) != dim)
        throw Error("covariance: need one sigma_k^2 function per coordinate");
    CovarianceModel m(Kind::DiagonalFunction, dim);
    m.diag_fns_ = std::move(sigma2);
    return m;
}

CovarianceModel CovarianceModel::full_constant(Matrix d_matrix) {
    const int dim = static_cast<int>(d_matrix.rows());
    if (dim < 1)
        throw Error("covariance: dimension must be >= 1");
    CovarianceModel m(Kind::FullConstant, dim);
    m.const_factor_ = cholesky_factor(d_matrix);  // rejects non-SPD input
    m.const_inverse_ = d_matrix.llt().solve(Matrix::Identity(dim, dim));
    m.const_matrix_ = std::move(d_matrix);
    return m;
}

CovarianceModel CovarianceModel::full_function(int dim, MatrixFn d_matrix) {
    if (dim < 1 || !d_matrix)
        throw Error("covariance: invalid matrix function");
    CovarianceModel m(Kind::FullFunction, dim);
    m.matrix_fn_ = std::move(d_matrix);
    return m;
}

Matrix CovarianceModel::matrix_at(const Vector& x) const {
    switch (kind_) {
    case Kind::ScalarConstant:
    case Kind::DiagonalConstant:
        return diag_sigma2_.asDiagonal();
    case Kind::DiagonalFunction: {
        Matrix d = Matrix::Zero(dim_, dim_);
        for (int k = 0; k < dim_; ++k) {
            const double s2 = diag_fns_[k](x);
            if (!(s2 > 0.0) || !std::isfinite(s2))
                throw NotSpdError("covariance: sigma_k^2(x) must be positive");
            d(k, k) = s2;
        }
        return d;
    }
    case Kind::FullConstant:
        return const_matrix_;
    case Kind::FullFunction:
        return matrix_fn_(x);
    }
    throw Error("covariance: unreachable kind");
}

Matrix CovarianceModel::factor_at(const Vector& x) const {
    Matrix f;
    factor_at(x, f);
    return f;
}

void CovarianceModel::factor_at(const Vector& x, Matrix& factor) const {
    switch (kind_) {
    case Kind::ScalarConstant:
    case Kind::DiagonalConstant:
        factor = Matrix::Zero(dim_, dim_);
        for (int k = 0; k < dim_; ++k)
            factor(k, k) = std::sqrt(diag_sigma2_[k]);
        return;
    case Kind::DiagonalFunction:
        factor = Matrix::Zero(dim_, dim_);
        for (int k = 0; k < dim_; ++k) {
            const double s2 = diag_fns_[k](x);
            if (!(s2 > 0.0) || !std::isfinite(s2))
                throw NotSpdError("covariance: sigma_k^2(x) must be positive");
            factor(k, k) = std::sqrt(s2);
        }
        return;
    case Kind::FullConstant:
        factor = const_factor_;
        return;
    case Kind::FullFunction:
        factor = cholesky_factor(matrix_fn_(x));
        return;
    }
}

void CovarianceModel::apply_inverse(const Vector& x, const Vector& v, Vector& out) const {
    switch (kind_) {
    case Kind::ScalarConstant:
    case Kind::DiagonalConstant:
        out = v.cwiseQuotient(diag_sigma2_);
        return;
    case Kind::DiagonalFunction:
        out.resize(dim_);
        for (int k = 0; k < dim_; ++k)
            out[k] = v[k] / sigma2_at(x, k);
        return;
    case Kind::FullConstant:
        out = const_inverse_ * v;
        return;
    case Kind::FullFunction: {
        const Matrix factor = cholesky_factor(matrix_fn_(x));
        out = factor.transpose().triangularView<Eigen::Upper>().solve(
            factor.triangularView<Eigen::Lower>().solve(v));
        return;
    }
    }
}

double CovarianceModel::sigma2_at(const Vector& x, int k) const {
    switch (kind_) {
    case Kind::ScalarConstant:
    case Kind::DiagonalConstant:
        return diag_sigma2_[k];
    case Kind::DiagonalFunction: {
        const double s2 = diag_fns_[k](x);
        if (!(s2 > 0.0) || !std::isfinite(s2))
            throw NotSpdError("covariance: sigma_k^2(x) must be positive");
        return s2;
    }
    default:
        throw Error("covariance: sigma2_at requires a diagonal model");
    }
}

CovarianceModel CovarianceModel::scaled(double c) const {
    if (!(c > 0.0))
        throw Error("covariance: scale factor must be positive");
    switch (kind_) {
    case Kind::ScalarConstant:
        return scalar_constant(dim_, c * diag_sigma2_[0]);
    case Kind::DiagonalConstant:
        return diagonal_constant(c * diag_sigma2_);
    case Kind::FullConstant:
        return full_constant(c * const_matrix_);
    default:
        throw Error("covariance: scaled requires a constant model");
    }
}

} // namespace driftfit::dynamics
