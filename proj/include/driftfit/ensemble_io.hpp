#pragma once

#include <string>

#include "driftfit/ensemble.hpp"

namespace driftfit::harness {

/// Writes the ensemble as CSV with header m,l,t,x1..xd[,dw1..dwd]. One row
/// per state; the dw columns carry the realized increment of step l -> l+1
/// and are blank on each trajectory's final row. Values are rendered with
/// 17 significant digits, so the round-trip is lossless.
void save_ensemble(const dynamics::Ensemble& ensemble, const std::string& path);

/// Reads a trajectory CSV back. Noise columns are optional. When
/// expect_dim >= 0, a differing file dimension is a FormatError.
dynamics::Ensemble load_ensemble(const std::string& path, int expect_dim = -1);

} // namespace driftfit::harness
