#include "driftfit/experiment.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include <json.hpp>

#include "driftfit/basis.hpp"
#include "driftfit/ensemble_io.hpp"
#include "driftfit/errors.hpp"
#include "driftfit/expression.hpp"
#include "driftfit/mlp.hpp"
#include "driftfit/model_io.hpp"
#include "driftfit/simulate.hpp"

namespace driftfit::harness {

namespace {

using json = nlohmann::ordered_json;

constexpr int kHistogramBins = 50;
constexpr std::size_t kOverlayTrajectories = 5;

/// Re-throws the current exception with the failing stage prepended,
/// preserving the exception type where the CLI exit code depends on it.
[[noreturn]] void rethrow_tagged(const char* stage) {
    const auto tag = [stage](const Error& e) { return std::string(stage) + ": " + e.what(); };
    try {
        throw;
    } catch (const NotSpdError& e) {
        throw NotSpdError(tag(e));
    } catch (const NonFiniteError& e) {
        throw NonFiniteError(tag(e));
    } catch (const DegenerateDomainError& e) {
        throw DegenerateDomainError(tag(e));
    } catch (const SingularSystemError& e) {
        throw SingularSystemError(tag(e));
    } catch (const DivergedError& e) {
        throw DivergedError(tag(e));
    } catch (const MissingNoiseError& e) {
        throw MissingNoiseError(tag(e));
    } catch (const ParseError&) {
        throw;  // already carries the expression offset
    } catch (const ConfigError& e) {
        throw ConfigError(tag(e));
    } catch (const VersionMismatchError& e) {
        throw VersionMismatchError(tag(e));
    } catch (const IoError& e) {
        throw IoError(tag(e));
    } catch (const FormatError& e) {
        throw FormatError(tag(e));
    } catch (const Error& e) {
        throw Error(tag(e));
    }
}

std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

void write_text_file(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out)
        throw IoError("cannot open '" + path + "' for writing");
    out << content;
    if (!out)
        throw IoError("failed writing '" + path + "'");
}

json metrics_json(const metrics::MetricReport& m) {
    json out;
    out["l2_rho"] = {{"value", m.l2_rho.value}, {"absolute_fallback", m.l2_rho.absolute_fallback}};
    if (m.central_fraction > 0.0)
        out["central_l2"] = {{"fraction", m.central_fraction},
                             {"value", m.central_l2.value},
                             {"absolute_fallback", m.central_l2.absolute_fallback}};
    out["trajectory"] = {{"mean", m.trajectory.mean},
                         {"std", m.trajectory.std_dev},
                         {"skipped", m.trajectory.skipped}};
    json snaps = json::array();
    for (const auto& w : m.wasserstein)
        snaps.push_back({{"t", w.time}, {"value", w.distance}});
    out["wasserstein"] = std::move(snaps);
    return out;
}

void write_plot_data(const std::string& dir, const dynamics::Ensemble& data,
                     const dynamics::Drift& fitted) {
    std::filesystem::create_directories(dir);

    const auto histograms = density_histogram(data, kHistogramBins);
    for (int k = 0; k < data.dim; ++k) {
        const auto& h = histograms[static_cast<std::size_t>(k)];
        std::string csv = "lo,hi,count\n";
        for (std::size_t b = 0; b < h.counts.size(); ++b) {
            csv += format_double(h.edges[b]);
            csv += ',';
            csv += format_double(h.edges[b + 1]);
            csv += ',';
            csv += std::to_string(h.counts[b]);
            csv += '\n';
        }
        write_text_file(dir + "/histogram_x" + std::to_string(k + 1) + ".csv", csv);
    }

    // Overlay series: a handful of data trajectories next to their
    // paired-noise replays under the fitted drift.
    dynamics::Ensemble head;
    head.grid = data.grid;
    head.dim = data.dim;
    head.seed = data.seed;
    const std::size_t count = std::min(kOverlayTrajectories, data.paths.size());
    head.paths.assign(data.paths.begin(),
                      data.paths.begin() + static_cast<std::ptrdiff_t>(count));
    const dynamics::Ensemble replayed = metrics::replay_trajectories(fitted, head);
    for (int k = 0; k < data.dim; ++k) {
        std::string csv = "t";
        for (std::size_t m = 0; m < count; ++m)
            csv += ",data_m" + std::to_string(m) + ",fit_m" + std::to_string(m);
        csv += '\n';
        for (std::size_t l = 0; l < data.grid.size(); ++l) {
            csv += format_double(data.grid.time(l));
            for (std::size_t m = 0; m < count; ++m) {
                csv += ',';
                csv += format_double(head.paths[m].states(static_cast<Eigen::Index>(l), k));
                csv += ',';
                csv += format_double(replayed.paths[m].states(static_cast<Eigen::Index>(l), k));
            }
            csv += '\n';
        }
        write_text_file(dir + "/overlay_x" + std::to_string(k + 1) + ".csv", csv);
    }
}

} // namespace

std::vector<HistogramSeries> density_histogram(const dynamics::Ensemble& ensemble, int bins) {
    if (bins < 1)
        throw Error("histogram needs at least one bin");
    if (ensemble.paths.empty())
        throw Error("cannot bin an empty ensemble");
    std::vector<HistogramSeries> out(static_cast<std::size_t>(ensemble.dim));
    for (int k = 0; k < ensemble.dim; ++k) {
        auto& h = out[static_cast<std::size_t>(k)];
        double lo = ensemble.paths.front().states(0, k);
        double hi = lo;
        for (const auto& p : ensemble.paths) {
            lo = std::min(lo, p.states.col(k).minCoeff());
            hi = std::max(hi, p.states.col(k).maxCoeff());
        }
        h.edges.resize(static_cast<std::size_t>(bins) + 1);
        for (int b = 0; b <= bins; ++b)
            h.edges[static_cast<std::size_t>(b)] =
                lo + (hi - lo) * static_cast<double>(b) / static_cast<double>(bins);
        h.counts.assign(static_cast<std::size_t>(bins), 0);
        const double width = hi - lo;
        for (const auto& p : ensemble.paths) {
            for (Eigen::Index l = 0; l < p.states.rows(); ++l) {
                int b = 0;
                if (width > 0.0) {
                    b = static_cast<int>((p.states(l, k) - lo) / width *
                                         static_cast<double>(bins));
                    b = std::clamp(b, 0, bins - 1);
                }
                ++h.counts[static_cast<std::size_t>(b)];
            }
        }
    }
    return out;
}

dynamics::DriftPtr fit_from_config(const ExperimentConfig& cfg, const dynamics::Ensemble& data,
                                   estimator::ConvergenceReport* training) {
    const dynamics::CovarianceModel cov = cfg.covariance();
    if (cfg.fit.type == FitSpec::Type::Basis) {
        const basis::Domain domain = basis::build_domain(data);
        const basis::TensorBasis tensor =
            basis::make_tensor_basis(domain, cfg.fit.family, cfg.fit.size, cfg.fit.degree);
        if (cov.is_diagonal()) {
            auto fitted = std::make_shared<estimator::BasisDrift>(
                estimator::fit_basis_drift(data, tensor, cov, cfg.ridge, cfg.threads));
            if (training)
                *training = estimator::ConvergenceReport{};
            return fitted;
        }
        estimator::GradientFitResult result = estimator::fit_general(data, tensor, cov,
                                                                     cfg.fit.optimizer);
        if (training)
            *training = result.report;
        return std::make_shared<estimator::BasisDrift>(tensor, std::move(result.coefficients));
    }

    std::vector<int> widths;
    widths.push_back(cfg.dim);
    widths.insert(widths.end(), cfg.fit.hidden.begin(), cfg.fit.hidden.end());
    widths.push_back(cfg.dim);
    estimator::MlpDrift skeleton(widths, cfg.fit.activation);
    auto fitted = std::make_shared<estimator::MlpDrift>(
        estimator::fit_mlp(data, cov, skeleton, cfg.fit.optimizer));
    if (training)
        *training = fitted->training_report();
    return fitted;
}

bool bands_pass(const AcceptanceBands& bands, const metrics::MetricReport& report) {
    bool pass = true;
    if (bands.l2 >= 0.0)
        pass = pass && report.l2_rho.value <= bands.l2;
    if (bands.trajectory_mean >= 0.0)
        pass = pass && report.trajectory.mean <= bands.trajectory_mean;
    if (bands.wasserstein >= 0.0)
        for (const auto& w : report.wasserstein)
            pass = pass && w.distance <= bands.wasserstein;
    if (bands.central_l2 >= 0.0)
        pass = pass && report.central_fraction > 0.0 && report.central_l2.value <= bands.central_l2;
    return pass;
}

std::string render_report(const ExperimentConfig& cfg, const ExperimentResult& result,
                          const Preset* preset) {
    json doc;
    if (!cfg.drift_preset.empty())
        doc["preset"] = cfg.drift_preset;
    else if (preset)
        doc["preset"] = preset->name;
    doc["config"] = {{"seed", cfg.seed},
                     {"dim", cfg.dim},
                     {"horizon", cfg.horizon},
                     {"dt", cfg.dt},
                     {"trajectories", cfg.trajectories}};
    if (cfg.fit.type == FitSpec::Type::Basis) {
        const char* family = cfg.fit.family == basis::BasisFamily::ClampedBSpline ? "bspline"
                             : cfg.fit.family == basis::BasisFamily::PiecewisePolynomial
                                 ? "piecewise"
                                 : "fourier";
        doc["fit"] = {{"type", "basis"},
                      {"family", family},
                      {"size", cfg.fit.size},
                      {"degree", cfg.fit.degree}};
    } else {
        doc["fit"] = {{"type", "mlp"},
                      {"hidden", cfg.fit.hidden},
                      {"activation", cfg.fit.activation},
                      {"epochs", result.training.iterations},
                      {"final_loss", result.training.final_loss},
                      {"converged", result.training.converged}};
    }
    doc["metrics"] = metrics_json(result.metrics);

    if (preset) {
        const ReferenceMetrics& ref = preset->reference;
        if (ref.l2 >= 0.0 || !ref.wasserstein.empty()) {
            // Published results at full scale (M = 10000) for comparison.
            json reference;
            reference["trajectories"] = 10000;
            if (ref.l2 >= 0.0)
                reference["l2_rho"] = ref.l2;
            if (ref.trajectory_mean >= 0.0)
                reference["trajectory_mean"] = ref.trajectory_mean;
            if (ref.trajectory_std >= 0.0)
                reference["trajectory_std"] = ref.trajectory_std;
            if (!ref.wasserstein.empty()) {
                json snaps = json::array();
                for (const auto& [t, v] : ref.wasserstein)
                    snaps.push_back({{"t", t}, {"value", v}});
                reference["wasserstein"] = std::move(snaps);
            }
            doc["reference"] = std::move(reference);
        }
        const AcceptanceBands& bands = preset->bands;
        json checks;
        if (bands.l2 >= 0.0)
            checks["l2_rho"] = {{"bound", bands.l2},
                                {"value", result.metrics.l2_rho.value},
                                {"pass", result.metrics.l2_rho.value <= bands.l2}};
        if (bands.trajectory_mean >= 0.0)
            checks["trajectory_mean"] = {
                {"bound", bands.trajectory_mean},
                {"value", result.metrics.trajectory.mean},
                {"pass", result.metrics.trajectory.mean <= bands.trajectory_mean}};
        if (bands.wasserstein >= 0.0) {
            double worst = 0.0;
            for (const auto& w : result.metrics.wasserstein)
                worst = std::max(worst, w.distance);
            checks["wasserstein"] = {{"bound", bands.wasserstein},
                                     {"value", worst},
                                     {"pass", worst <= bands.wasserstein}};
        }
        if (bands.central_l2 >= 0.0)
            checks["central_l2"] = {{"bound", bands.central_l2},
                                    {"value", result.metrics.central_l2.value},
                                    {"pass", result.metrics.central_l2.value <= bands.central_l2}};
        if (!checks.empty()) {
            checks["all_pass"] = bands_pass(bands, result.metrics);
            doc["bands"] = std::move(checks);
        }
    }
    return doc.dump(2) + "\n";
}

ExperimentResult run_experiment(const ExperimentConfig& cfg, const Preset* preset) {
    cfg.validate();
    ExperimentResult result;

    dynamics::Ensemble data;
    try {
        result.truth = expression_drift(cfg.drift);
        const dynamics::CovarianceModel cov = cfg.covariance();
        data = dynamics::simulate_ensemble(*result.truth, cov, cfg.grid(),
                                           static_cast<std::size_t>(cfg.trajectories),
                                           cfg.initial(), cfg.seed, /*record_noise=*/true,
                                           cfg.threads);
    } catch (...) {
        rethrow_tagged("simulate");
    }

    try {
        result.fitted = fit_from_config(cfg, data, &result.training);
    } catch (...) {
        rethrow_tagged("fit");
    }

    try {
        result.metrics = metrics::compute_metrics(*result.truth, *result.fitted, data,
                                                  cfg.snapshots, cfg.central_fraction);
    } catch (...) {
        rethrow_tagged("evaluate");
    }

    try {
        if (!cfg.output.trajectories.empty())
            save_ensemble(data, cfg.output.trajectories);
        if (!cfg.output.model.empty())
            save_model(*result.fitted, cfg.output.model);
        if (!cfg.output.report.empty())
            write_text_file(cfg.output.report, render_report(cfg, result, preset));
        if (!cfg.output.plots.empty())
            write_plot_data(cfg.output.plots, data, *result.fitted);
    } catch (...) {
        rethrow_tagged("write");
    }
    return result;
}

} // namespace driftfit::harness
