// Acceptance suite: twelve end-to-end checks covering the preset runs, the
// estimator's numerical guarantees, the reference implementations of the
// basis functions and metrics, and the byte-level reproducibility of the
// command-line tool. Prints one PASS/FAIL line per criterion; the exit code
// is the number of failures.
//
// Usage: acceptance <path-to-driftfit-cli>

#include <unistd.h>

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <exception>
#include <filesystem>
#include <fstream>
#include <functional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Eigenvalues>

#include "driftfit/basis.hpp"
#include "driftfit/covariance.hpp"
#include "driftfit/estimator.hpp"
#include "driftfit/experiment.hpp"
#include "driftfit/expression.hpp"
#include "driftfit/metrics.hpp"
#include "driftfit/mlp.hpp"
#include "driftfit/presets.hpp"
#include "driftfit/rng.hpp"
#include "driftfit/simulate.hpp"

#include "oracles.hpp"

using namespace driftfit;

namespace {

namespace fs = std::filesystem;

/// Thrown by checks with a human-readable reason for the FAIL line.
struct CheckFailure : std::runtime_error {
    using std::runtime_error::runtime_error;
};

void require(bool condition, const std::string& detail) {
    if (!condition)
        throw CheckFailure(detail);
}

std::string fmt(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.6g", v);
    return buf;
}

int failures = 0;

void criterion(int number, const std::string& description, const std::function<void()>& body) {
    try {
        body();
        std::printf("criterion %d: PASS - %s\n", number, description.c_str());
    } catch (const std::exception& e) {
        ++failures;
        std::printf("criterion %d: FAIL - %s (%s)\n", number, description.c_str(), e.what());
    }
    std::fflush(stdout);
}

std::string read_bytes(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    require(in.good(), "cannot read " + path);
    std::ostringstream buffer;
    buffer << in.rdbuf();
    return buffer.str();
}

/// Desk-scale preset run checked against its published bands.
void check_preset_bands(const std::string& name) {
    const harness::Preset& preset = harness::get_preset(name);
    const harness::ExperimentResult result = harness::run_experiment(preset.config, &preset);
    require(harness::bands_pass(preset.bands, result.metrics),
            name + ": l2=" + fmt(result.metrics.l2_rho.value) +
                " traj=" + fmt(result.metrics.trajectory.mean));
}

/// Shared 1D fixture: quadratic drift under scalar noise, with recorded
/// increments.
dynamics::Ensemble quadratic_1d_data(std::size_t m, std::uint64_t seed) {
    const auto drift = harness::expression_drift({"2 + 0.08*x1 - 0.01*x1^2"});
    const auto cov = dynamics::CovarianceModel::scalar_constant(1, 0.6);
    const auto grid = dynamics::TimeGrid::uniform(0.5, 0.01);
    const auto init =
        dynamics::InitialDistribution::uniform(Vector::Zero(1), Vector::Constant(1, 10.0));
    return dynamics::simulate_ensemble(*drift, cov, grid, m, init, seed, true);
}

} // namespace

int main(int argc, char** argv) {
    if (argc < 2) {
        std::fprintf(stderr, "usage: %s <path-to-driftfit-cli>\n", argv[0]);
        return 1;
    }
    const std::string cli = argv[1];

    const fs::path scratch =
        fs::temp_directory_path() / ("driftfit_acceptance_" + std::to_string(::getpid()));
    fs::create_directories(scratch);

    criterion(1, "sine-cos-1d desk run stays within its acceptance bands",
              [] { check_preset_bands("sine-cos-1d"); });

    criterion(2, "poly-1d desk run stays within its acceptance bands",
              [] { check_preset_bands("poly-1d"); });

    criterion(3, "poly-2d and trig-2d desk runs stay within their acceptance bands", [] {
        check_preset_bands("poly-2d");
        check_preset_bands("trig-2d");
    });

    criterion(4, "closed-form coefficients match a QR weighted-least-squares reference", [] {
        const auto drift =
            harness::expression_drift({"0.4*x1 - 0.1*x1*x2", "-0.8*x2 + 0.2*x1^2"});
        Vector diag(2);
        diag << 0.6, 0.8;
        const auto cov = dynamics::CovarianceModel::diagonal_constant(diag);
        const auto grid = dynamics::TimeGrid::uniform(0.5, 0.01);
        const auto init = dynamics::InitialDistribution::uniform(Vector::Zero(2),
                                                                 Vector::Constant(2, 10.0));
        const auto data = dynamics::simulate_ensemble(*drift, cov, grid, 10, init, 101, true);
        const basis::TensorBasis tensor = basis::make_tensor_basis(
            basis::build_domain(data), basis::BasisFamily::ClampedBSpline, 16, 2);
        const auto system = estimator::assemble_diagonal_system(data, tensor, cov);
        const Matrix solved = estimator::solve_system(system);
        const Matrix reference = oracles::wls_reference(data, tensor, cov);
        const double scale = 1.0 + reference.cwiseAbs().maxCoeff();
        const double deviation = (solved - reference).cwiseAbs().maxCoeff();
        require(deviation <= 1e-8 * scale,
                "max coefficient deviation " + fmt(deviation) + " exceeds 1e-8 relative");
    });

    criterion(5, "analytic loss gradients match central finite differences", [] {
        // Linear-expansion gradient under a non-diagonal covariance.
        const auto drift =
            harness::expression_drift({"0.4*x1 - 0.1*x1*x2", "-0.8*x2 + 0.2*x1^2"});
        Matrix sigma(2, 2);
        sigma << 0.8, 0.3, 0.3, 0.6;
        const auto cov = dynamics::CovarianceModel::full_constant(sigma);
        const auto grid = dynamics::TimeGrid::uniform(0.2, 0.01);
        const auto init = dynamics::InitialDistribution::uniform(Vector::Zero(2),
                                                                 Vector::Constant(2, 10.0));
        const auto data = dynamics::simulate_ensemble(*drift, cov, grid, 4, init, 23, true);
        const basis::TensorBasis tensor = basis::make_tensor_basis(
            basis::build_domain(data), basis::BasisFamily::ClampedBSpline, 16, 2);
        Matrix coeffs(tensor.size(), 2);
        for (int i = 0; i < tensor.size(); ++i) {
            coeffs(i, 0) = 0.1 * (i % 5) - 0.2;
            coeffs(i, 1) = 0.05 * (i % 7);
        }
        const Matrix grad = estimator::coefficient_gradient(coeffs, data, tensor, cov);
        require(grad.rows() * grad.cols() >= 20, "fixture must expose at least 20 entries");
        const double h = 1e-5;
        for (int i = 0; i < coeffs.rows(); ++i) {
            for (int k = 0; k < coeffs.cols(); ++k) {
                Matrix up = coeffs, down = coeffs;
                up(i, k) += h;
                down(i, k) -= h;
                const double fd =
                    (estimator::empirical_loss(estimator::BasisDrift(tensor, up), data, cov) -
                     estimator::empirical_loss(estimator::BasisDrift(tensor, down), data, cov)) /
                    (2.0 * h);
                const double err = std::abs(grad(i, k) - fd);
                require(err <= 1e-5 * (1.0 + std::abs(fd)),
                        "basis gradient entry (" + std::to_string(i) + "," + std::to_string(k) +
                            ") off by " + fmt(err));
            }
        }

        // Network gradient on the flattened batch.
        const auto lin_drift = harness::expression_drift({"0.08*x1"});
        const auto lin_cov = dynamics::CovarianceModel::scalar_constant(1, 0.6);
        const auto lin_data = dynamics::simulate_ensemble(
            *lin_drift, lin_cov, grid, 3,
            dynamics::InitialDistribution::uniform(Vector::Zero(1), Vector::Constant(1, 10.0)),
            33, true);
        estimator::MlpDrift net({1, 3, 1}, "tanh");
        auto gen = dynamics::substream(17, 4);
        std::uniform_real_distribution<double> unif(-0.6, 0.6);
        Vector w(static_cast<Eigen::Index>(net.weight_count()));
        for (Eigen::Index i = 0; i < w.size(); ++i)
            w(i) = unif(gen);
        net.set_weights(w);

        const Eigen::Index steps = static_cast<Eigen::Index>(lin_data.grid.size()) - 1;
        const Eigen::Index rows = steps * static_cast<Eigen::Index>(lin_data.size());
        Matrix states(rows, 1), increments(rows, 1), inv_sigma2(rows, 1);
        Vector dts(rows);
        Eigen::Index r = 0;
        for (const auto& path : lin_data.paths) {
            for (Eigen::Index l = 0; l < steps; ++l, ++r) {
                states(r, 0) = path.states(l, 0);
                increments(r, 0) = path.states(l + 1, 0) - path.states(l, 0);
                dts(r) = lin_data.grid.dt(static_cast<std::size_t>(l));
                inv_sigma2(r, 0) = 1.0 / 0.6;
            }
        }
        const double scale = 1.0 / (lin_data.grid.horizon() * double(lin_data.size()));
        Vector analytic(w.size());
        estimator::mlp_loss_and_gradient(net, states, increments, dts, inv_sigma2, scale,
                                         analytic);
        const double hw = 1e-6;
        for (Eigen::Index i = 0; i < w.size(); ++i) {
            Vector up = w, down = w;
            up(i) += hw;
            down(i) -= hw;
            Vector dummy(w.size());
            estimator::MlpDrift net_up({1, 3, 1}, "tanh");
            net_up.set_weights(up);
            estimator::MlpDrift net_down({1, 3, 1}, "tanh");
            net_down.set_weights(down);
            const double loss_up = estimator::mlp_loss_and_gradient(
                net_up, states, increments, dts, inv_sigma2, scale, dummy);
            const double loss_down = estimator::mlp_loss_and_gradient(
                net_down, states, increments, dts, inv_sigma2, scale, dummy);
            const double fd = (loss_up - loss_down) / (2.0 * hw);
            const double err = std::abs(analytic(i) - fd);
            require(err <= 1e-4 * (1.0 + std::abs(fd)),
                    "network gradient entry " + std::to_string(i) + " off by " + fmt(err));
        }
    });

    criterion(6, "fitted coefficients are invariant to the overall noise scale", [] {
        const auto data = quadratic_1d_data(40, 51);
        const auto cov = dynamics::CovarianceModel::scalar_constant(1, 0.6);
        const basis::TensorBasis tensor = basis::make_tensor_basis(
            basis::build_domain(data), basis::BasisFamily::ClampedBSpline, 8, 2);
        const Matrix base = estimator::fit_basis_drift(data, tensor, cov).coefficients();
        for (const double c : {0.1, 10.0}) {
            const Matrix rescaled =
                estimator::fit_basis_drift(data, tensor, cov.scaled(c)).coefficients();
            const double deviation = (rescaled - base).cwiseAbs().maxCoeff();
            require(deviation <= 1e-10, "scale " + fmt(c) + ": max deviation " + fmt(deviation) +
                                            " exceeds 1e-10");
        }
    });

    criterion(7, "quadratic variation recovers the simulated noise level within 2%", [] {
        const auto drift = dynamics::zero_drift(1);
        const auto cov = dynamics::CovarianceModel::scalar_constant(1, 0.6);
        const auto grid = dynamics::TimeGrid::uniform(1.0, 1e-3);
        const auto init =
            dynamics::InitialDistribution::uniform(Vector::Zero(1), Vector::Constant(1, 10.0));
        const auto data = dynamics::simulate_ensemble(*drift, cov, grid, 100, init, 61, false);
        const double sigma_hat = dynamics::quadratic_variation_sigma(data);
        const double truth = std::sqrt(0.6);
        require(std::abs(sigma_hat - truth) <= 0.02 * truth,
                "estimate " + fmt(sigma_hat) + " vs " + fmt(truth));
    });

    criterion(8, "basis evaluations match their textbook definitions", [] {
        // Partition of unity for the clamped B-spline family.
        const std::vector<double> breakpoints = basis::uniform_knots(0.0, 10.0, 6);
        const auto bspline = basis::BasisSet1D::clamped_bspline(breakpoints, 2);
        for (int i = 0; i <= 10000; ++i) {
            const double x = -2.0 + 14.0 * double(i) / 10000.0;
            const Vector values = bspline.evaluate(x);
            require(std::abs(values.sum() - 1.0) <= 1e-12,
                    "partition of unity off by " + fmt(std::abs(values.sum() - 1.0)) + " at x=" +
                        fmt(x));
            require(values.minCoeff() >= -1e-14, "negative value at x=" + fmt(x));
        }

        // Agreement with the two-term recurrence at interior points.
        const auto cubic = basis::BasisSet1D::clamped_bspline(breakpoints, 3);
        const std::vector<double> knots = oracles::clamped_knots(breakpoints, 3);
        auto gen = dynamics::substream(404, 1);
        std::uniform_real_distribution<double> unif(1e-6, 10.0 - 1e-6);
        for (int trial = 0; trial < 500; ++trial) {
            const double x = unif(gen);
            const Vector values = cubic.evaluate(x);
            for (int i = 0; i < values.size(); ++i) {
                const double reference = oracles::bspline_recursive(knots, i, 3, x);
                require(std::abs(values(i) - reference) <= 1e-12,
                        "B-spline " + std::to_string(i) + " off by " +
                            fmt(std::abs(values(i) - reference)) + " at x=" + fmt(x));
            }
        }

        // The piecewise family reproduces polynomials up to its degree.
        const auto pw =
            basis::BasisSet1D::piecewise_polynomial(basis::uniform_knots(0.0, 10.0, 3), 2);
        auto q = [](double x) { return 1.5 - 0.7 * x + 0.2 * x * x; };
        Matrix design(300, pw.size());
        Vector target(300);
        for (int i = 0; i < 300; ++i) {
            const double x = 10.0 * double(i) / 299.0;
            design.row(i) = pw.evaluate(x).transpose();
            target(i) = q(x);
        }
        const Vector alpha = design.colPivHouseholderQr().solve(target);
        for (int i = 0; i <= 1000; ++i) {
            const double x = 10.0 * double(i) / 1000.0;
            const double fitted = pw.evaluate(x).dot(alpha);
            require(std::abs(fitted - q(x)) <= 1e-8,
                    "quadratic reproduction off by " + fmt(std::abs(fitted - q(x))) + " at x=" +
                        fmt(x));
        }
    });

    criterion(9, "1D Wasserstein matches brute-force enumeration and is translation invariant",
              [] {
                  auto gen = dynamics::substream(71, 1);
                  std::uniform_real_distribution<double> unif(-5.0, 5.0);
                  std::uniform_int_distribution<int> size_dist(2, 8);
                  for (int trial = 0; trial < 20; ++trial) {
                      const int n = size_dist(gen);
                      std::vector<double> a(static_cast<std::size_t>(n));
                      std::vector<double> b(static_cast<std::size_t>(n));
                      for (double& v : a)
                          v = unif(gen);
                      for (double& v : b)
                          v = unif(gen);
                      const double fast = metrics::wasserstein1d(a, b);
                      const double brute = oracles::wasserstein_enumerate(a, b);
                      require(std::abs(fast - brute) <= 1e-12,
                              "n=" + std::to_string(n) + ": sorted " + fmt(fast) +
                                  " vs enumerated " + fmt(brute));
                  }
                  std::vector<double> a(40), b(40);
                  for (double& v : a)
                      v = unif(gen);
                  for (double& v : b)
                      v = unif(gen);
                  const double base = metrics::wasserstein1d(a, b);
                  std::vector<double> a_shift = a, b_shift = b;
                  for (double& v : a_shift)
                      v += 1.75;
                  for (double& v : b_shift)
                      v += 1.75;
                  const double shifted = metrics::wasserstein1d(a_shift, b_shift);
                  require(std::abs(shifted - base) <= 1e-12,
                          "translation changed the distance by " + fmt(std::abs(shifted - base)));
              });

    criterion(10, "first-order fits converge to the closed-form solution", [] {
        const auto data = quadratic_1d_data(30, 77);
        const auto cov = dynamics::CovarianceModel::scalar_constant(1, 0.6);
        const basis::TensorBasis tensor = basis::make_tensor_basis(
            basis::build_domain(data), basis::BasisFamily::ClampedBSpline, 6, 2);
        const auto system = estimator::assemble_diagonal_system(data, tensor, cov);
        const Matrix exact = estimator::solve_system(system);

        // Constant-step descent on a quadratic converges for any step below
        // 2 / lambda_max; the midpoint step is the classical optimum.
        const Eigen::SelfAdjointEigenSolver<Matrix> eigen(system.a[0]);
        const double lambda_min = eigen.eigenvalues().minCoeff();
        const double lambda_max = eigen.eigenvalues().maxCoeff();
        estimator::OptimizerConfig gd;
        gd.method = estimator::OptimMethod::GradientDescent;
        gd.step = 2.0 / (lambda_min + lambda_max);
        gd.max_iterations = 60000;
        gd.tolerance = 0.0;
        const auto descent = estimator::fit_general(data, tensor, cov, gd);
        const double gd_dev = ((descent.coefficients - exact).cwiseAbs().array() /
                               (1.0 + exact.cwiseAbs().array()))
                                  .maxCoeff();
        require(gd_dev <= 1e-4,
                "descent deviates from the solve by " + fmt(gd_dev) + " (tolerance 1e-4)");

        // Adam reaches a loss within a hundredth of the optimum.
        estimator::OptimizerConfig adam;
        adam.method = estimator::OptimMethod::Adam;
        adam.step = 0.01;
        adam.max_iterations = 12000;
        adam.tolerance = 0.0;
        const auto adaptive = estimator::fit_general(data, tensor, cov, adam);
        const double loss_exact =
            estimator::empirical_loss(estimator::BasisDrift(tensor, exact), data, cov);
        const double loss_adam = adaptive.report.final_loss;
        require(loss_adam >= loss_exact - 1e-12 * (1.0 + std::abs(loss_exact)),
                "adaptive loss " + fmt(loss_adam) + " undercuts the optimum " + fmt(loss_exact));
        require(loss_adam <= loss_exact + 0.01 * (1.0 + std::abs(loss_exact)),
                "adaptive loss " + fmt(loss_adam) + " vs optimum " + fmt(loss_exact));
    });

    criterion(11, "replay is bit-exact and repeated runs are byte-identical", [&] {
        // Replaying the generating drift through the recorded increments
        // must reproduce every state exactly.
        const auto data = quadratic_1d_data(10, 91);
        const auto drift = harness::expression_drift({"2 + 0.08*x1 - 0.01*x1^2"});
        const dynamics::Ensemble replayed = metrics::replay_trajectories(*drift, data);
        for (std::size_t m = 0; m < data.size(); ++m)
            require(replayed.paths[m].states == data.paths[m].states,
                    "replay diverged on trajectory " + std::to_string(m));

        // Three CLI invocations of the same preset (the third with a second
        // worker thread) must write byte-identical artifacts.
        const std::vector<std::string> dirs = {(scratch / "run_a").string(),
                                               (scratch / "run_b").string(),
                                               (scratch / "run_c").string()};
        for (std::size_t i = 0; i < dirs.size(); ++i) {
            std::string command = "\"" + cli + "\" reproduce poly-1d --scale 50 --out-dir \"" +
                                  dirs[i] + "\"";
            if (i == 2)
                command += " --threads 2";
            command += " >/dev/null 2>&1";
            const int status = std::system(command.c_str());
            require(status == 0, "run " + std::to_string(i) + " exited with status " +
                                     std::to_string(status));
        }
        for (const std::string& name :
             {std::string("trajectories.csv"), std::string("model.json"),
              std::string("report.json"), std::string("plots/histogram_x1.csv"),
              std::string("plots/overlay_x1.csv")}) {
            const std::string first = read_bytes(dirs[0] + "/" + name);
            require(first == read_bytes(dirs[1] + "/" + name), name + " differs between runs");
            require(first == read_bytes(dirs[2] + "/" + name),
                    name + " differs when using two worker threads");
        }
    });

    criterion(12, "linear-1d-mlp desk run meets its central error bound", [] {
        const harness::Preset& preset = harness::get_preset("linear-1d-mlp");
        const harness::ExperimentResult result = harness::run_experiment(preset.config, &preset);
        require(result.metrics.central_fraction == 0.9, "central fraction was not recorded");
        require(result.metrics.central_l2.value <= 0.2,
                "central error " + fmt(result.metrics.central_l2.value) + " exceeds 0.2");
    });

    std::error_code ec;
    fs::remove_all(scratch, ec);
    return failures;
}
