#pragma once

#include <string>
#include <vector>

#include "driftfit/config.hpp"
#include "driftfit/drift.hpp"
#include "driftfit/ensemble.hpp"
#include "driftfit/estimator.hpp"
#include "driftfit/metrics.hpp"
#include "driftfit/presets.hpp"

namespace driftfit::harness {

/// Per-dimension histogram of the pooled states.
struct HistogramSeries {
    std::vector<double> edges;        // bins + 1 ascending edges
    std::vector<long long> counts;    // bins entries, summing to M * L
};

/// Pools every state of every trajectory and bins each dimension
/// separately. A dimension with zero extent puts all mass into bin 0.
std::vector<HistogramSeries> density_histogram(const dynamics::Ensemble& ensemble, int bins);

/// The drift-fitting stage of an experiment: basis solve or MLP training,
/// per the config. `training` reports iterations for iterative fits.
dynamics::DriftPtr fit_from_config(const ExperimentConfig& cfg, const dynamics::Ensemble& data,
                                   estimator::ConvergenceReport* training = nullptr);

struct ExperimentResult {
    metrics::MetricReport metrics;
    dynamics::DriftPtr truth;
    dynamics::DriftPtr fitted;
    estimator::ConvergenceReport training;
};

/// Simulate -> fit -> score, writing whichever output files the config
/// names. Identical configs produce byte-identical outputs. `preset` links
/// the published reference values and bands into the report file.
ExperimentResult run_experiment(const ExperimentConfig& cfg, const Preset* preset = nullptr);

/// Serializes a metric report (plus config echo and, optionally, the
/// preset's reference values with band checks) as JSON text.
std::string render_report(const ExperimentConfig& cfg, const ExperimentResult& result,
                          const Preset* preset = nullptr);

/// True when every band the preset defines is met by the report.
bool bands_pass(const AcceptanceBands& bands, const metrics::MetricReport& report);

} // namespace driftfit::harness
