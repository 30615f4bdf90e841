#include "driftfit/presets.hpp"

#include <map>

#include "driftfit/errors.hpp"

namespace driftfit::harness {

namespace {

/// Shared experiment parameters: horizon 1 sampled at dt = 1e-3, initial
/// states Uniform(0,10) per component, snapshots at t = 0.25, 0.5, 1.
ExperimentConfig base_config(int dim, std::uint64_t seed, int trajectories) {
    ExperimentConfig cfg;
    cfg.seed = seed;
    cfg.dim = dim;
    cfg.horizon = 1.0;
    cfg.dt = 1e-3;
    cfg.trajectories = trajectories;
    cfg.initial_lo = Vector::Zero(dim);
    cfg.initial_hi = Vector::Constant(dim, 10.0);
    cfg.snapshots = {0.25, 0.5, 1.0};
    return cfg;
}

Preset make_sine_cos_1d() {
    Preset p;
    p.name = "sine-cos-1d";
    p.summary = "1D drift mixing polynomial and trigonometric terms, B-spline basis (n=8)";
    p.config = base_config(1, 1, 2000);
    p.config.drift = {"2 + 0.08*x1 - 0.05*sin(x1) + 0.02*cos(x1)^2"};
    p.config.cov_kind = ExperimentConfig::CovKind::Scalar;
    p.config.sigma2 = 0.6;
    p.config.fit.type = FitSpec::Type::Basis;
    p.config.fit.family = basis::BasisFamily::ClampedBSpline;
    p.config.fit.size = 8;
    p.config.fit.degree = 2;
    // Published full-scale results (M = 10000).
    p.reference.l2 = 0.007935;
    p.reference.trajectory_mean = 0.0020239;
    p.reference.trajectory_std = 0.002046;
    p.reference.wasserstein = {{0.25, 0.0291}, {0.5, 0.0319}, {1.0, 0.0403}};
    // Desk-scale bounds at M = 2000.
    p.bands.l2 = 0.05;
    p.bands.trajectory_mean = 0.01;
    p.bands.wasserstein = 0.10;
    return p;
}

Preset make_linear_1d_mlp() {
    Preset p;
    p.name = "linear-1d-mlp";
    p.summary = "1D linear drift learned by a small neural network";
    p.config = base_config(1, 5, 400);
    p.config.drift = {"0.08*x1"};
    p.config.cov_kind = ExperimentConfig::CovKind::Scalar;
    p.config.sigma2 = 0.6;
    p.config.fit.type = FitSpec::Type::Mlp;
    p.config.fit.hidden = {64, 64};
    p.config.fit.activation = "tanh";
    p.config.fit.optimizer.method = estimator::OptimMethod::Adam;
    p.config.fit.optimizer.step = 1e-3;
    p.config.fit.optimizer.max_iterations = 20;
    p.config.fit.optimizer.batch_size = 1024;
    p.config.fit.optimizer.seed = 1234;
    // Errors concentrate at the sparsely visited edges of the domain, so the
    // quantitative bound applies to the central 90% of the occupation sample.
    p.config.central_fraction = 0.9;
    p.bands.central_l2 = 0.2;
    return p;
}

Preset make_poly_1d() {
    Preset p;
    p.name = "poly-1d";
    p.summary = "1D quadratic polynomial drift, B-spline basis (n=10)";
    p.config = base_config(1, 2, 2000);
    p.config.drift = {"2 + 0.08*x1 - 0.01*x1^2"};
    p.config.cov_kind = ExperimentConfig::CovKind::Scalar;
    p.config.sigma2 = 0.6;
    p.config.fit.type = FitSpec::Type::Basis;
    p.config.fit.family = basis::BasisFamily::ClampedBSpline;
    p.config.fit.size = 10;
    p.config.fit.degree = 2;
    p.reference.l2 = 0.0087649;
    p.reference.trajectory_mean = 0.00199719;
    p.reference.trajectory_std = 0.00682781;
    p.reference.wasserstein = {{0.25, 0.0153}, {0.5, 0.0154}, {1.0, 0.0278}};
    p.bands.l2 = 0.05;
    p.bands.wasserstein = 0.08;
    return p;
}

Preset make_poly_2d() {
    Preset p;
    p.name = "poly-2d";
    p.summary = "2D polynomial drift with coupling terms, tensor B-spline basis (n=36)";
    p.config = base_config(2, 3, 2000);
    p.config.drift = {"0.4*x1 - 0.1*x1*x2", "-0.8*x2 + 0.2*x1^2"};
    p.config.cov_kind = ExperimentConfig::CovKind::Diagonal;
    p.config.cov_diagonal = Vector(2);
    p.config.cov_diagonal << 0.6, 0.8;
    p.config.fit.type = FitSpec::Type::Basis;
    p.config.fit.family = basis::BasisFamily::ClampedBSpline;
    p.config.fit.size = 36;
    p.config.fit.degree = 2;
    p.reference.l2 = 0.02118531;
    p.reference.trajectory_mean = 0.00306613;
    p.reference.trajectory_std = 0.00375144;
    p.reference.wasserstein = {{0.25, 0.0891}, {0.5, 0.0872}, {1.0, 0.0853}};
    p.bands.l2 = 0.08;
    p.bands.trajectory_mean = 0.02;
    p.bands.wasserstein = 0.3;
    return p;
}

Preset make_trig_2d() {
    Preset p;
    p.name = "trig-2d";
    p.summary = "2D trigonometric drift, tensor B-spline basis (n=36)";
    p.config = base_config(2, 4, 2000);
    p.config.drift = {"2*sin(0.2*x1) + 1.5*cos(0.1*x2)", "3*sin(0.3*x1)*cos(0.1*x2)"};
    p.config.cov_kind = ExperimentConfig::CovKind::Diagonal;
    p.config.cov_diagonal = Vector(2);
    p.config.cov_diagonal << 0.6, 0.8;
    p.config.fit.type = FitSpec::Type::Basis;
    p.config.fit.family = basis::BasisFamily::ClampedBSpline;
    p.config.fit.size = 36;
    p.config.fit.degree = 2;
    p.reference.l2 = 0.02734505;
    p.reference.trajectory_mean = 0.0041613;
    p.reference.trajectory_std = 0.0079917;
    p.reference.wasserstein = {{0.25, 0.1011}, {0.5, 0.1119}, {1.0, 0.1293}};
    p.bands.l2 = 0.08;
    p.bands.trajectory_mean = 0.02;
    p.bands.wasserstein = 0.3;
    return p;
}

const std::map<std::string, Preset>& registry() {
    static const std::map<std::string, Preset> presets = [] {
        std::map<std::string, Preset> out;
        for (Preset p : {make_sine_cos_1d(), make_linear_1d_mlp(), make_poly_1d(), make_poly_2d(),
                         make_trig_2d()}) {
            p.config.validate();
            out.emplace(p.name, std::move(p));
        }
        return out;
    }();
    return presets;
}

} // namespace

std::vector<std::string> preset_names() {
    std::vector<std::string> names;
    for (const auto& [name, preset] : registry())
        names.push_back(name);
    return names;
}

const Preset& get_preset(const std::string& name) {
    const auto& presets = registry();
    auto it = presets.find(name);
    if (it == presets.end()) {
        std::string known;
        for (const auto& [known_name, preset] : presets)
            known += (known.empty() ? "" : ", ") + known_name;
        throw ConfigError("unknown preset '" + name + "' (known: " + known + ")");
    }
    return it->second;
}

} // namespace driftfit::harness
