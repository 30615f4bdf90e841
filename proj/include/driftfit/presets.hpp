#pragma once

#include <string>
#include <utility>
#include <vector>

#include "driftfit/config.hpp"

namespace driftfit::harness {

/// Published full-scale (M = 10000) results for a preset; negative values
/// mean "not published".
struct ReferenceMetrics {
    double l2 = -1.0;
    double trajectory_mean = -1.0;
    double trajectory_std = -1.0;
    std::vector<std::pair<double, double>> wasserstein;  // (time, value)
};

/// Upper bounds the desk-scale run of a preset must stay within; negative
/// values are unchecked.
struct AcceptanceBands {
    double l2 = -1.0;
    double trajectory_mean = -1.0;
    double wasserstein = -1.0;  // applied at every snapshot
    double central_l2 = -1.0;   // bound on the central-band error
};

/// A ready-to-run experiment: desk-scale config plus the full-scale
/// reference numbers it is compared against.
struct Preset {
    std::string name;
    std::string summary;
    ExperimentConfig config;
    ReferenceMetrics reference;
    AcceptanceBands bands;
};

std::vector<std::string> preset_names();

/// Throws ConfigError for an unknown name.
const Preset& get_preset(const std::string& name);

} // namespace driftfit::harness
