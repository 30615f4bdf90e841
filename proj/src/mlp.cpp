#include "driftfit/mlp.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <utility>

#include "driftfit/errors.hpp"
#include "driftfit/rng.hpp"

namespace driftfit::estimator {

namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstWMap = Eigen::Map<const RowMat>;
using WMap = Eigen::Map<RowMat>;
using ConstBMap = Eigen::Map<const Vector>;
using BMap = Eigen::Map<Vector>;

void validate_widths(const std::vector<int>& widths) {
    if (widths.size() < 2)
        throw Error("mlp widths need at least an input and an output layer");
    for (int w : widths)
        if (w < 1)
            throw Error("mlp layer widths must be positive");
    if (widths.front() != widths.back())
        throw Error("mlp input and output widths must both equal the state dimension");
}

void apply_activation(Matrix& z, const std::string& activation) {
    if (activation == "tanh")
        z = z.array().tanh();
    else
        z = z.cwiseMax(0.0);
}

/// Derivative of the activation expressed through the activated value.
Matrix activation_derivative(const Matrix& a, const std::string& activation) {
    if (activation == "tanh")
        return (1.0 - a.array().square()).matrix();
    return (a.array() > 0.0).cast<double>().matrix();
}

} // namespace

MlpDrift::MlpDrift(std::vector<int> widths, std::string activation)
    : widths_(std::move(widths)), activation_(std::move(activation)) {
    validate_widths(widths_);
    if (activation_ != "tanh" && activation_ != "relu")
        throw Error("unsupported mlp activation '" + activation_ + "'");
    std::size_t total = 0;
    offsets_.reserve(layer_count());
    for (std::size_t l = 0; l + 1 < widths_.size(); ++l) {
        offsets_.push_back(total);
        const auto in = static_cast<std::size_t>(widths_[l]);
        const auto out = static_cast<std::size_t>(widths_[l + 1]);
        total += out * in + out;
    }
    weights_ = Vector::Zero(static_cast<Eigen::Index>(total));
}

void MlpDrift::set_weights(Vector w) {
    if (w.size() != weights_.size())
        throw Error("mlp weight vector has wrong length for the layer widths");
    weights_ = std::move(w);
}

void MlpDrift::eval(const Vector& x, Vector& out) const {
    if (x.size() != dim())
        throw Error("mlp drift evaluated at a state of wrong dimension");
    thread_local Vector a;
    thread_local Vector z;
    a = x;
    for (std::size_t l = 0; l < layer_count(); ++l) {
        const int in = widths_[l];
        const int out_w = widths_[l + 1];
        ConstWMap w(weights_.data() + offsets_[l], out_w, in);
        ConstBMap b(weights_.data() + offsets_[l] + static_cast<std::size_t>(out_w) * in, out_w);
        z.noalias() = w * a;
        z += b;
        if (l + 1 < layer_count()) {
            if (activation_ == "tanh")
                z = z.array().tanh();
            else
                z = z.cwiseMax(0.0);
        }
        std::swap(a, z);
    }
    out = a;
}

Matrix MlpDrift::forward(const Matrix& inputs) const {
    if (inputs.cols() != dim())
        throw Error("mlp forward pass expects one state per row");
    Matrix a = inputs;
    for (std::size_t l = 0; l < layer_count(); ++l) {
        const int in = widths_[l];
        const int out_w = widths_[l + 1];
        ConstWMap w(weights_.data() + offsets_[l], out_w, in);
        ConstBMap b(weights_.data() + offsets_[l] + static_cast<std::size_t>(out_w) * in, out_w);
        Matrix z = a * w.transpose();
        z.rowwise() += b.transpose();
        if (l + 1 < layer_count())
            apply_activation(z, activation_);
        a = std::move(z);
    }
    return a;
}

double mlp_loss_and_gradient(const MlpDrift& net, const Matrix& states, const Matrix& increments,
                             const Vector& dts, const Matrix& inv_sigma2, double scale,
                             Vector& gradient) {
    const auto layers = net.layer_count();
    const Vector& w_flat = net.weights();
    const auto& widths = net.widths();

    // Forward pass, keeping every layer's activated output for backprop.
    std::vector<Matrix> acts(layers + 1);
    acts[0] = states;
    for (std::size_t l = 0; l < layers; ++l) {
        ConstWMap w(w_flat.data() + net.layer_offset(l), widths[l + 1], widths[l]);
        ConstBMap b(w_flat.data() + net.layer_offset(l) +
                        static_cast<std::size_t>(widths[l + 1]) * widths[l],
                    widths[l + 1]);
        Matrix z = acts[l] * w.transpose();
        z.rowwise() += b.transpose();
        if (l + 1 < layers)
            apply_activation(z, net.activation());
        acts[l + 1] = std::move(z);
    }
    const Matrix& f = acts[layers];

    // Loss and its derivative with respect to the network output. With
    // diagonal noise both reduce to componentwise expressions.
    const Matrix f_dt = f.array().colwise() * dts.array();
    const double loss =
        scale * ((0.5 * f.array() * f_dt.array() - f.array() * increments.array()) *
                 inv_sigma2.array())
                    .sum();
    Matrix grad_out = scale * (inv_sigma2.array() * (f_dt - increments).array()).matrix();

    gradient.resize(w_flat.size());
    for (std::size_t l = layers; l-- > 0;) {
        const int in = widths[l];
        const int out_w = widths[l + 1];
        const std::size_t off = net.layer_offset(l);
        ConstWMap w(w_flat.data() + off, out_w, in);
        WMap gw(gradient.data() + off, out_w, in);
        BMap gb(gradient.data() + off + static_cast<std::size_t>(out_w) * in, out_w);
        gw.noalias() = grad_out.transpose() * acts[l];
        gb = grad_out.colwise().sum().transpose();
        if (l > 0) {
            Matrix grad_prev = grad_out * w;
            grad_out = grad_prev.cwiseProduct(activation_derivative(acts[l], net.activation()));
        }
    }
    return loss;
}

MlpDrift fit_mlp(const dynamics::Ensemble& ensemble, const dynamics::CovarianceModel& cov,
                 const MlpDrift& skeleton, const OptimizerConfig& opt, bool init_from_skeleton) {
    const int d = ensemble.dim;
    if (skeleton.dim() != d)
        throw Error("mlp skeleton dimension does not match the ensemble");
    if (!cov.is_diagonal())
        throw Error("mlp fitting requires diagonal noise");
    if (opt.step <= 0.0)
        throw Error("optimizer step size must be positive");
    if (opt.batch_size < 1)
        throw Error("optimizer batch size must be positive");

    // Flatten the ensemble into per-step samples once: left state, increment,
    // step length and the inverse noise variances at the left state.
    const auto steps = ensemble.grid.steps();
    const Eigen::Index n_samples =
        static_cast<Eigen::Index>(ensemble.paths.size()) * static_cast<Eigen::Index>(steps);
    if (n_samples == 0)
        throw Error("cannot fit a drift to an ensemble without steps");
    Matrix states(n_samples, d);
    Matrix increments(n_samples, d);
    Vector dts(n_samples);
    Matrix inv_sigma2(n_samples, d);
    const double horizon = ensemble.grid.horizon();
    Eigen::Index row = 0;
    Vector xl(d);
    for (const auto& path : ensemble.paths) {
        for (std::size_t l = 0; l < steps; ++l, ++row) {
            states.row(row) = path.states.row(static_cast<Eigen::Index>(l));
            increments.row(row) = path.states.row(static_cast<Eigen::Index>(l) + 1) -
                                  path.states.row(static_cast<Eigen::Index>(l));
            dts(row) = ensemble.grid.dt(l);
            xl = states.row(row).transpose();
            for (int k = 0; k < d; ++k)
                inv_sigma2(row, k) = 1.0 / cov.sigma2_at(xl, k);
        }
    }

    MlpDrift net = skeleton;
    if (!init_from_skeleton) {
        // Scaled-uniform initialization: weights in +-sqrt(6/(in+out)),
        // biases zero, drawn from a stream derived from the optimizer seed.
        auto gen = dynamics::substream(opt.seed, 0);
        Vector w = Vector::Zero(static_cast<Eigen::Index>(net.weight_count()));
        for (std::size_t l = 0; l < net.layer_count(); ++l) {
            const int in = net.widths()[l];
            const int out_w = net.widths()[l + 1];
            const double limit = std::sqrt(6.0 / (in + out_w));
            std::uniform_real_distribution<double> uni(-limit, limit);
            double* block = w.data() + net.layer_offset(l);
            for (int i = 0; i < out_w * in; ++i)
                block[i] = uni(gen);
        }
        net.set_weights(std::move(w));
    }

    const Eigen::Index batch =
        std::min(static_cast<Eigen::Index>(opt.batch_size), n_samples);
    std::vector<Eigen::Index> order(static_cast<std::size_t>(n_samples));
    std::iota(order.begin(), order.end(), 0);
    auto shuffle_gen = dynamics::substream(opt.seed, 1);

    Vector gradient;
    Vector adam_m, adam_v;
    if (opt.method == OptimMethod::Adam) {
        adam_m = Vector::Zero(static_cast<Eigen::Index>(net.weight_count()));
        adam_v = Vector::Zero(static_cast<Eigen::Index>(net.weight_count()));
    }
    long adam_t = 0;

    Matrix batch_states(batch, d);
    Matrix batch_increments(batch, d);
    Vector batch_dts(batch);
    Matrix batch_inv_sigma2(batch, d);

    ConvergenceReport report;
    double previous_loss = std::numeric_limits<double>::infinity();
    for (std::size_t epoch = 0; epoch < opt.max_iterations; ++epoch) {
        std::shuffle(order.begin(), order.end(), shuffle_gen);
        double epoch_loss = 0.0;
        for (Eigen::Index start = 0; start < n_samples; start += batch) {
            const Eigen::Index count = std::min(batch, n_samples - start);
            for (Eigen::Index i = 0; i < count; ++i) {
                const Eigen::Index s = order[static_cast<std::size_t>(start + i)];
                batch_states.row(i) = states.row(s);
                batch_increments.row(i) = increments.row(s);
                batch_dts(i) = dts(s);
                batch_inv_sigma2.row(i) = inv_sigma2.row(s);
            }
            // Each batch estimates the full empirical loss, so the scale
            // carries the sample-count ratio on top of 1/(T M).
            const double scale = static_cast<double>(n_samples) /
                                 (horizon * static_cast<double>(ensemble.paths.size()) *
                                  static_cast<double>(count));
            const double batch_loss = mlp_loss_and_gradient(
                net, batch_states.topRows(count), batch_increments.topRows(count),
                batch_dts.head(count), batch_inv_sigma2.topRows(count), scale, gradient);
            if (!std::isfinite(batch_loss))
                throw DivergedError("mlp training loss became non-finite");
            epoch_loss += batch_loss * static_cast<double>(count) / static_cast<double>(n_samples);

            Vector w = net.weights();
            if (opt.method == OptimMethod::Adam) {
                ++adam_t;
                constexpr double beta1 = 0.9;
                constexpr double beta2 = 0.999;
                constexpr double eps = 1e-8;
                adam_m = beta1 * adam_m + (1.0 - beta1) * gradient;
                adam_v = beta2 * adam_v + (1.0 - beta2) * gradient.cwiseProduct(gradient);
                const double c1 = 1.0 - std::pow(beta1, static_cast<double>(adam_t));
                const double c2 = 1.0 - std::pow(beta2, static_cast<double>(adam_t));
                w -= opt.step *
                     ((adam_m / c1).array() / ((adam_v / c2).array().sqrt() + eps)).matrix();
            } else {
                w -= opt.step * gradient;
            }
            net.set_weights(std::move(w));
        }

        report.iterations = epoch + 1;
        report.final_loss = epoch_loss;
        const double decrease = previous_loss - epoch_loss;
        if (opt.tolerance > 0.0 && decrease >= 0.0 && decrease < opt.tolerance) {
            report.converged = true;
            break;
        }
        previous_loss = epoch_loss;
    }
    net.set_training_report(report);
    return net;
}

} // namespace driftfit::estimator
