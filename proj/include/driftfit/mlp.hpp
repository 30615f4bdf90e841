#pragma once

#include <string>
#include <vector>

#include "driftfit/covariance.hpp"
#include "driftfit/drift.hpp"
#include "driftfit/ensemble.hpp"
#include "driftfit/estimator.hpp"

namespace driftfit::estimator {

/// Fully connected drift network: input dimension d, hidden layers with a
/// fixed activation, linear output of dimension d. Weights live in one flat
/// vector, per layer a row-major (out x in) weight block followed by the
/// bias, which is also the on-disk layout.
class MlpDrift final : public dynamics::Drift {
public:
    /// Builds a zero-weight network. widths = {d, hidden..., d}.
    MlpDrift(std::vector<int> widths, std::string activation = "tanh");

    int dim() const override { return widths_.front(); }
    void eval(const Vector& x, Vector& out) const override;
    void eval_batch(const Matrix& points, Matrix& out) const override { out = forward(points); }

    /// Batch forward pass: rows of `inputs` are states, rows of the result
    /// are drift values.
    Matrix forward(const Matrix& inputs) const;

    const std::vector<int>& widths() const { return widths_; }
    const std::string& activation() const { return activation_; }
    const Vector& weights() const { return weights_; }
    void set_weights(Vector w);
    std::size_t weight_count() const { return static_cast<std::size_t>(weights_.size()); }

    const ConvergenceReport& training_report() const { return report_; }
    void set_training_report(ConvergenceReport r) { report_ = r; }

    /// Offset of layer `l`'s weight block in the flat vector.
    std::size_t layer_offset(std::size_t l) const { return offsets_[l]; }
    std::size_t layer_count() const { return widths_.size() - 1; }

private:
    std::vector<int> widths_;
    std::string activation_;
    Vector weights_;
    std::vector<std::size_t> offsets_;
    ConvergenceReport report_;

    friend Matrix mlp_loss_gradient(const MlpDrift&, const Matrix&, const Matrix&, const Vector&,
                                    const Matrix&, double, Vector&);
};

/// Analytic gradient of the batch loss contribution
///   scale * sum_s [ 1/2 sum_k f_k^2 inv_s2 dt - sum_k f_k dx_k inv_s2 ]
/// with respect to the flat weights. Also returns the batch loss through
/// `loss_out`. Exposed for gradient verification.
double mlp_loss_and_gradient(const MlpDrift& net, const Matrix& states, const Matrix& increments,
                             const Vector& dts, const Matrix& inv_sigma2, double scale,
                             Vector& gradient);

/// Trains the network weights on the empirical trajectory loss with
/// seeded minibatch SGD/Adam. `init_from_skeleton` keeps the skeleton's
/// weights as the starting point instead of the seeded scaled-uniform
/// initialization. Deterministic for a fixed OptimizerConfig::seed.
MlpDrift fit_mlp(const dynamics::Ensemble& ensemble, const dynamics::CovarianceModel& cov,
                 const MlpDrift& skeleton, const OptimizerConfig& opt,
                 bool init_from_skeleton = false);

} // namespace driftfit::estimator
