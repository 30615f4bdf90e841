#pragma once

#include <cstddef>
#include <vector>

#include "driftfit/ensemble.hpp"
#include "driftfit/errors.hpp"
#include "driftfit/types.hpp"

namespace driftfit::basis {

/// Axis-aligned box [lo_k, hi_k] x ... covering the observed states.
struct Domain {
    Vector lo, hi;

    int dim() const { return static_cast<int>(lo.size()); }
};

/// Per-dimension closed intervals spanning the data, optionally padded by a
/// fraction of each dimension's range. Throws DegenerateDomainError when a
/// dimension has zero extent.
Domain build_domain(const dynamics::Ensemble& ensemble, double padding = 0.0);

/// n_intervals + 1 equally spaced knots including both endpoints.
std::vector<double> uniform_knots(double lo, double hi, std::size_t n_intervals);

enum class BasisFamily { PiecewisePolynomial, ClampedBSpline, Fourier };

/// What to do when an evaluation point leaves the interval: clamp to the
/// nearest endpoint (default, keeps fitted drifts usable on replayed
/// trajectories that wander out) or return all zeros.
enum class OutOfDomainPolicy { Clamp, Zero };

/// One-dimensional basis family on an interval.
///
/// PiecewisePolynomial: per-cell shifted monomials 1, u, ..., u^p with
///   u in [0,1] the cell-local coordinate; size = cells * (p+1).
/// ClampedBSpline: Cox-de Boor with repeated endpoint knots;
///   size = interior_knots + p + 1.
/// Fourier: 1 plus sin/cos harmonics scaled to the interval; size = 1 + 2H.
class BasisSet1D {
public:
    BasisSet1D() = default;

    static BasisSet1D piecewise_polynomial(std::vector<double> breakpoints, int degree);
    static BasisSet1D clamped_bspline(std::vector<double> breakpoints, int degree);
    static BasisSet1D fourier(double lo, double hi, int harmonics);

    BasisFamily family() const { return family_; }
    int size() const { return size_; }
    int degree() const { return degree_; }
    double lo() const { return breakpoints_.front(); }
    double hi() const { return breakpoints_.back(); }
    const std::vector<double>& breakpoints() const { return breakpoints_; }

    /// Largest number of simultaneously nonzero basis values.
    int support() const;

    /// Dense evaluation of all size() values at x.
    Vector evaluate(double x, OutOfDomainPolicy policy = OutOfDomainPolicy::Clamp) const;

    /// Support-only evaluation: writes the (at most support()) contiguous
    /// nonzero values into `values` and returns their first index, or -1
    /// when every value is zero (Zero policy outside the interval).
    /// `values` must have room for support() doubles.
    int evaluate_support(double x, double* values,
                         OutOfDomainPolicy policy = OutOfDomainPolicy::Clamp) const;

private:
    BasisFamily family_ = BasisFamily::ClampedBSpline;
    std::vector<double> breakpoints_;
    int degree_ = 0;
    int size_ = 0;
    int harmonics_ = 0;

    std::vector<double> knot_vector_;  // ClampedBSpline: clamped knots

    int find_cell(double x) const;
};

/// Tensor product of per-dimension 1D bases: psi_i(x) = prod_k phi_{i_k}(x_k)
/// with a fixed bijection between flat index i and multi-index (i_1...i_d).
/// The first dimension's index varies fastest.
class TensorBasis {
public:
    TensorBasis() = default;
    explicit TensorBasis(std::vector<BasisSet1D> dims,
                         OutOfDomainPolicy policy = OutOfDomainPolicy::Clamp);

    int dim() const { return static_cast<int>(dims_.size()); }
    int size() const { return size_; }
    const BasisSet1D& dimension(int k) const { return dims_[static_cast<std::size_t>(k)]; }
    OutOfDomainPolicy policy() const { return policy_; }

    /// Largest number of simultaneously nonzero tensor values.
    int support() const;

    std::vector<int> multi_index(int flat) const;
    int flat_index(const std::vector<int>& multi) const;

    /// Dense evaluation of all size() values at x.
    Vector evaluate(const Vector& x) const;

    /// Sparse evaluation: appends (flat index, value) pairs for the nonzero
    /// support at x. Clears `out` first.
    void evaluate_support(const Vector& x, std::vector<std::pair<int, double>>& out) const;

private:
    std::vector<BasisSet1D> dims_;
    std::vector<int> strides_;
    int size_ = 0;
    OutOfDomainPolicy policy_ = OutOfDomainPolicy::Clamp;
};

/// Resolves a requested family/size/degree on a domain into per-dimension
/// bases with uniform knots. The total size n must be a perfect d-th power;
/// each per-dimension size must be representable by the family
/// (B-spline: n1 >= degree + 1; piecewise polynomial: (degree+1) | n1;
/// Fourier: n1 odd).
TensorBasis make_tensor_basis(const Domain& domain, BasisFamily family, int total_size, int degree,
                              OutOfDomainPolicy policy = OutOfDomainPolicy::Clamp);

} // namespace driftfit::basis
