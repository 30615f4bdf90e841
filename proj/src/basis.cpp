#include "driftfit/basis.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <string>
#include <utility>

namespace {
// Stack buffers in the evaluators bound the per-dimension support and the
// tensor rank.
constexpr int kMaxSupport = 64;
constexpr int kMaxTensorDims = 8;
} // namespace

namespace driftfit::basis {

Domain build_domain(const dynamics::Ensemble& ensemble, double padding) {
    if (ensemble.size() == 0)
        throw Error("build_domain: empty ensemble");
    if (padding < 0.0)
        throw Error("build_domain: padding must be nonnegative");
    const int d = ensemble.dim;
    Vector lo = Vector::Constant(d, std::numeric_limits<double>::infinity());
    Vector hi = Vector::Constant(d, -std::numeric_limits<double>::infinity());
    for (const auto& path : ensemble.paths) {
        lo = lo.cwiseMin(path.states.colwise().minCoeff().transpose());
        hi = hi.cwiseMax(path.states.colwise().maxCoeff().transpose());
    }
    for (int k = 0; k < d; ++k) {
        if (!(lo[k] < hi[k]))
            throw DegenerateDomainError("build_domain: dimension " + std::to_string(k) +
                                        " has zero extent");
        const double pad = padding * (hi[k] - lo[k]);
        lo[k] -= pad;
        hi[k] += pad;
    }
    return Domain{std::move(lo), std::move(hi)};
}

std::vector<double> uniform_knots(double lo, double hi, std::size_t n_intervals) {
    if (!(lo < hi))
        throw Error("uniform_knots: interval must have positive length");
    if (n_intervals < 1)
        throw Error("uniform_knots: need at least one interval");
    std::vector<double> knots(n_intervals + 1);
    for (std::size_t i = 0; i <= n_intervals; ++i)
        knots[i] = (i == n_intervals)
                       ? hi
                       : lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(n_intervals);
    return knots;
}

namespace {

void check_breakpoints(const std::vector<double>& breakpoints) {
    if (breakpoints.size() < 2)
        throw Error("basis: need at least two breakpoints");
    for (std::size_t i = 0; i + 1 < breakpoints.size(); ++i)
        if (!(breakpoints[i] < breakpoints[i + 1]))
            throw Error("basis: breakpoints must be strictly increasing");
}

void check_support(int support) {
    if (support > kMaxSupport)
        throw Error("basis: per-dimension support exceeds " + std::to_string(kMaxSupport));
}

} // namespace

BasisSet1D BasisSet1D::piecewise_polynomial(std::vector<double> breakpoints, int degree) {
    check_breakpoints(breakpoints);
    if (degree < 0)
        throw Error("basis: degree must be nonnegative");
    BasisSet1D b;
    b.family_ = BasisFamily::PiecewisePolynomial;
    b.breakpoints_ = std::move(breakpoints);
    b.degree_ = degree;
    b.size_ = static_cast<int>(b.breakpoints_.size() - 1) * (degree + 1);
    check_support(b.support());
    return b;
}

BasisSet1D BasisSet1D::clamped_bspline(std::vector<double> breakpoints, int degree) {
    check_breakpoints(breakpoints);
    if (degree < 0)
        throw Error("basis: degree must be nonnegative");
    BasisSet1D b;
    b.family_ = BasisFamily::ClampedBSpline;
    b.breakpoints_ = std::move(breakpoints);
    b.degree_ = degree;
    const int interior = static_cast<int>(b.breakpoints_.size()) - 2;
    b.size_ = interior + degree + 1;
    check_support(b.support());

    // Clamped knot vector: each endpoint repeated degree + 1 times.
    b.knot_vector_.reserve(b.breakpoints_.size() + 2 * static_cast<std::size_t>(degree));
    for (int i = 0; i < degree; ++i)
        b.knot_vector_.push_back(b.breakpoints_.front());
    b.knot_vector_.insert(b.knot_vector_.end(), b.breakpoints_.begin(), b.breakpoints_.end());
    for (int i = 0; i < degree; ++i)
        b.knot_vector_.push_back(b.breakpoints_.back());
    return b;
}

BasisSet1D BasisSet1D::fourier(double lo, double hi, int harmonics) {
    if (!(lo < hi))
        throw Error("basis: interval must have positive length");
    if (harmonics < 0)
        throw Error("basis: harmonic count must be nonnegative");
    BasisSet1D b;
    b.family_ = BasisFamily::Fourier;
    b.breakpoints_ = {lo, hi};
    b.degree_ = 0;
    b.harmonics_ = harmonics;
    b.size_ = 1 + 2 * harmonics;
    check_support(b.support());
    return b;
}

int BasisSet1D::support() const {
    switch (family_) {
    case BasisFamily::PiecewisePolynomial:
    case BasisFamily::ClampedBSpline:
        return degree_ + 1;
    case BasisFamily::Fourier:
        return size_;
    }
    return size_;
}

int BasisSet1D::find_cell(double x) const {
    // Half-open cells [b_i, b_{i+1}), last cell closed.
    const auto it = std::upper_bound(breakpoints_.begin(), breakpoints_.end(), x);
    auto cell = static_cast<int>(it - breakpoints_.begin()) - 1;
    const int last = static_cast<int>(breakpoints_.size()) - 2;
    return std::clamp(cell, 0, last);
}

Vector BasisSet1D::evaluate(double x, OutOfDomainPolicy policy) const {
    Vector out = Vector::Zero(size_);
    double buffer[kMaxSupport];
    const int first = evaluate_support(x, buffer, policy);
    if (first >= 0)
        for (int j = 0; j < support(); ++j)
            out[first + j] = buffer[j];
    return out;
}

int BasisSet1D::evaluate_support(double x, double* values, OutOfDomainPolicy policy) const {
    const double lo = breakpoints_.front();
    const double hi = breakpoints_.back();
    if (x < lo || x > hi) {
        if (policy == OutOfDomainPolicy::Zero)
            return -1;
        x = std::clamp(x, lo, hi);
    }

    switch (family_) {
    case BasisFamily::PiecewisePolynomial: {
        const int cell = find_cell(x);
        const double a = breakpoints_[static_cast<std::size_t>(cell)];
        const double b = breakpoints_[static_cast<std::size_t>(cell) + 1];
        const double u = (x - a) / (b - a);
        double p = 1.0;
        for (int j = 0; j <= degree_; ++j) {
            values[j] = p;
            p *= u;
        }
        return cell * (degree_ + 1);
    }
    case BasisFamily::ClampedBSpline: {
        // Span index into the clamped knot vector; x == hi maps to the last
        // nonempty span so the endpoint basis value is 1.
        const int p = degree_;
        const auto& knots = knot_vector_;
        const int last_span = size_ - 1;  // knots[last_span + 1] is the first hi copy
        int span;
        if (x >= breakpoints_.back()) {
            span = last_span;
        } else {
            const auto it = std::upper_bound(knots.begin(), knots.end(), x);
            span = static_cast<int>(it - knots.begin()) - 1;
            span = std::clamp(span, p, last_span);
        }
        // Cox-de Boor in the triangular form: values[j] = B_{span-p+j, p}(x).
        double left[64], right[64];
        values[0] = 1.0;
        for (int j = 1; j <= p; ++j) {
            left[j] = x - knots[static_cast<std::size_t>(span + 1 - j)];
            right[j] = knots[static_cast<std::size_t>(span + j)] - x;
            double saved = 0.0;
            for (int r = 0; r < j; ++r) {
                const double temp = values[r] / (right[r + 1] + left[j - r]);
                values[r] = saved + right[r + 1] * temp;
                saved = left[j - r] * temp;
            }
            values[j] = saved;
        }
        return span - p;
    }
    case BasisFamily::Fourier: {
        const double w = 2.0 * std::numbers::pi / (hi - lo);
        values[0] = 1.0;
        for (int h = 1; h <= harmonics_; ++h) {
            values[2 * h - 1] = std::sin(w * static_cast<double>(h) * (x - lo));
            values[2 * h] = std::cos(w * static_cast<double>(h) * (x - lo));
        }
        return 0;
    }
    }
    return -1;
}

TensorBasis::TensorBasis(std::vector<BasisSet1D> dims, OutOfDomainPolicy policy)
    : dims_(std::move(dims)), policy_(policy) {
    if (dims_.empty())
        throw Error("tensor basis: need at least one dimension");
    if (dims_.size() > static_cast<std::size_t>(kMaxTensorDims))
        throw Error("tensor basis: at most 8 dimensions supported");
    strides_.resize(dims_.size());
    int stride = 1;
    for (std::size_t k = 0; k < dims_.size(); ++k) {
        strides_[k] = stride;
        stride *= dims_[k].size();
    }
    size_ = stride;
}

int TensorBasis::support() const {
    int s = 1;
    for (const auto& b : dims_)
        s *= b.support();
    return s;
}

std::vector<int> TensorBasis::multi_index(int flat) const {
    std::vector<int> multi(dims_.size());
    for (std::size_t k = 0; k < dims_.size(); ++k) {
        multi[k] = flat % dims_[k].size();
        flat /= dims_[k].size();
    }
    return multi;
}

int TensorBasis::flat_index(const std::vector<int>& multi) const {
    int flat = 0;
    for (std::size_t k = 0; k < dims_.size(); ++k)
        flat += multi[k] * strides_[k];
    return flat;
}

Vector TensorBasis::evaluate(const Vector& x) const {
    Vector out = Vector::Zero(size_);
    std::vector<std::pair<int, double>> nz;
    evaluate_support(x, nz);
    for (const auto& [i, v] : nz)
        out[i] = v;
    return out;
}

void TensorBasis::evaluate_support(const Vector& x,
                                   std::vector<std::pair<int, double>>& out) const {
    out.clear();
    const auto d = dims_.size();
    double values[kMaxTensorDims][kMaxSupport];
    int first[kMaxTensorDims];
    int count[kMaxTensorDims];
    for (std::size_t k = 0; k < d; ++k) {
        first[k] = dims_[k].evaluate_support(x[static_cast<Eigen::Index>(k)], values[k], policy_);
        if (first[k] < 0)
            return;  // Zero policy outside the interval: every product vanishes
        count[k] = dims_[k].support();
    }
    // Walk the rectangular support with an odometer over per-dimension offsets.
    int offsets[kMaxTensorDims] = {0};
    for (;;) {
        double product = 1.0;
        int flat = 0;
        for (std::size_t k = 0; k < d; ++k) {
            product *= values[k][offsets[k]];
            flat += (first[k] + offsets[k]) * strides_[k];
        }
        if (product != 0.0)
            out.emplace_back(flat, product);
        std::size_t k = 0;
        while (k < d && ++offsets[k] == count[k]) {
            offsets[k] = 0;
            ++k;
        }
        if (k == d)
            break;
    }
}

TensorBasis make_tensor_basis(const Domain& domain, BasisFamily family, int total_size, int degree,
                              OutOfDomainPolicy policy) {
    const int d = domain.dim();
    const double per_dim = std::pow(static_cast<double>(total_size), 1.0 / static_cast<double>(d));
    const int n1 = static_cast<int>(std::lround(per_dim));
    int check = 1;
    for (int k = 0; k < d; ++k)
        check *= n1;
    if (check != total_size)
        throw Error("basis: total size " + std::to_string(total_size) +
                    " is not a perfect power for dimension " + std::to_string(d));

    std::vector<BasisSet1D> dims;
    dims.reserve(static_cast<std::size_t>(d));
    for (int k = 0; k < d; ++k) {
        const double lo = domain.lo[k];
        const double hi = domain.hi[k];
        switch (family) {
        case BasisFamily::ClampedBSpline: {
            const int interior = n1 - degree - 1;
            if (interior < 0)
                throw Error("basis: B-spline size must be at least degree + 1");
            dims.push_back(BasisSet1D::clamped_bspline(
                uniform_knots(lo, hi, static_cast<std::size_t>(interior + 1)), degree));
            break;
        }
        case BasisFamily::PiecewisePolynomial: {
            if (n1 % (degree + 1) != 0)
                throw Error("basis: piecewise-polynomial size must be a multiple of degree + 1");
            const int cells = n1 / (degree + 1);
            dims.push_back(BasisSet1D::piecewise_polynomial(
                uniform_knots(lo, hi, static_cast<std::size_t>(cells)), degree));
            break;
        }
        case BasisFamily::Fourier: {
            if (n1 % 2 == 0)
                throw Error("basis: Fourier size must be odd (1 + 2 * harmonics)");
            dims.push_back(BasisSet1D::fourier(lo, hi, (n1 - 1) / 2));
            break;
        }
        }
    }
    return TensorBasis(std::move(dims), policy);
}

} // namespace driftfit::basis
