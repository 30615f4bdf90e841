#pragma once

#include <string>

#include "driftfit/drift.hpp"

namespace driftfit::harness {

/// Persists a fitted drift (basis expansion or MLP) as structured text with
/// a format_version field. Throws Error for drift types without a
/// serialization.
void save_model(const dynamics::Drift& model, const std::string& path);

/// Loads a model saved by save_model; the result evaluates identically to
/// the saved drift. Throws VersionMismatchError for unknown versions and
/// FormatError naming the offending field otherwise.
dynamics::DriftPtr load_model(const std::string& path);

} // namespace driftfit::harness
