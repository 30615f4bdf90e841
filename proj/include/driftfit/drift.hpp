#pragma once

#include <functional>
#include <memory>
#include <utility>

#include "driftfit/types.hpp"

namespace driftfit::dynamics {

/// A state-dependent drift field f: R^d -> R^d.
class Drift {
public:
    virtual ~Drift() = default;

    virtual int dim() const = 0;

    /// Writes f(x) into `out`; `out` must already have size dim().
    virtual void eval(const Vector& x, Vector& out) const = 0;

    Vector operator()(const Vector& x) const {
        Vector out(dim());
        eval(x, out);
        return out;
    }

    /// Evaluates the field at every row of `points` into the matching row of
    /// `out` (resized here). Subclasses with a faster batched path override.
    virtual void eval_batch(const Matrix& points, Matrix& out) const {
        out.resize(points.rows(), points.cols());
        Vector x(dim());
        Vector fx(dim());
        for (Eigen::Index r = 0; r < points.rows(); ++r) {
            x = points.row(r).transpose();
            eval(x, fx);
            out.row(r) = fx.transpose();
        }
    }
};

using DriftPtr = std::shared_ptr<const Drift>;

/// Adapts any callable (const Vector&, Vector&) -> void as a drift.
class CallableDrift final : public Drift {
public:
    using Fn = std::function<void(const Vector&, Vector&)>;

    CallableDrift(int dim, Fn fn) : dim_(dim), fn_(std::move(fn)) {}

    int dim() const override { return dim_; }
    void eval(const Vector& x, Vector& out) const override { fn_(x, out); }

private:
    int dim_;
    Fn fn_;
};

inline DriftPtr make_drift(int dim, CallableDrift::Fn fn) {
    return std::make_shared<CallableDrift>(dim, std::move(fn));
}

/// The zero field, useful as a driftless baseline.
inline DriftPtr zero_drift(int dim) {
    return make_drift(dim, [](const Vector&, Vector& out) { out.setZero(); });
}

} // namespace driftfit::dynamics
