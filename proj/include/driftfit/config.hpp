#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "driftfit/basis.hpp"
#include "driftfit/covariance.hpp"
#include "driftfit/estimator.hpp"
#include "driftfit/simulate.hpp"
#include "driftfit/time_grid.hpp"

namespace driftfit::harness {

/// What to fit: a linear expansion over a tensor basis solved in closed
/// form, or a neural drift trained by minibatch descent.
struct FitSpec {
    enum class Type { Basis, Mlp };

    Type type = Type::Basis;

    // Basis settings.
    basis::BasisFamily family = basis::BasisFamily::ClampedBSpline;
    int size = 8;    // total tensor basis size n
    int degree = 2;  // maximum polynomial degree (ignored by Fourier)

    // Mlp settings.
    std::vector<int> hidden = {64, 64};
    std::string activation = "tanh";
    estimator::OptimizerConfig optimizer;  // max_iterations counts epochs
};

struct OutputSpec {
    std::string trajectories;  // trajectory table (CSV); empty = skip
    std::string model;         // fitted model file; empty = skip
    std::string report;        // metric report (JSON); empty = skip
    std::string plots;         // directory for plot-data CSVs; empty = skip
};

/// One full experiment: simulate -> fit -> score.
struct ExperimentConfig {
    std::uint64_t seed = 0;
    int dim = 1;
    double horizon = 1.0;
    double dt = 1e-3;
    int trajectories = 100;

    // Initial condition; defaults to Uniform(0,10) per component.
    bool initial_is_uniform = true;
    Vector initial_lo, initial_hi;
    std::vector<Vector> initial_points;

    std::vector<std::string> drift;  // one expression per dimension
    std::string drift_preset;        // set when the drift came from a preset

    enum class CovKind { Scalar, Diagonal, Full };
    CovKind cov_kind = CovKind::Scalar;
    double sigma2 = 1.0;
    Vector cov_diagonal;
    Matrix cov_matrix;

    FitSpec fit;
    std::vector<double> snapshots = {0.25, 0.5, 1.0};
    double ridge = 0.0;
    /// > 0: additionally score the central quantile band of the occupation
    /// sample (e.g. 0.9 keeps the middle 90% per coordinate).
    double central_fraction = 0.0;
    int threads = 1;
    OutputSpec output;

    /// Throws ConfigError when any invariant fails.
    void validate() const;

    dynamics::TimeGrid grid() const;
    dynamics::CovarianceModel covariance() const;
    dynamics::InitialDistribution initial() const;
};

/// Parses and validates a config from JSON text. Unknown keys anywhere in
/// the document are errors, reported with their path.
ExperimentConfig parse_config(const std::string& json_text);

/// Reads the file at `path` and parses it.
ExperimentConfig load_config(const std::string& path);

} // namespace driftfit::harness
