#pragma once

#include <filesystem>

namespace hapticforge {

/// Root of the shipped data files (prompt templates, label parameter table,
/// fixtures). `HAPTICFORGE_DATA_DIR` overrides the build-time default.
std::filesystem::path data_dir();

} // namespace hapticforge
