#pragma once

#include <filesystem>
#include <vector>

namespace kacov {

/// Reads a report.json and writes gnuplot data (.dat) plus a script (.gp) per
/// figure into `out_dir`. Nothing is rendered. Returns the files written.
std::vector<std::filesystem::path> emit_plots(const std::filesystem::path& report,
                                              const std::filesystem::path& out_dir);

}  // namespace kacov
