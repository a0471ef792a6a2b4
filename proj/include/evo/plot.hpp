#pragma once

#include <filesystem>
#include <string>

#include "evo/training.hpp"

namespace evo::plot {

/// Action step curve (thick), per-step total loss (thin) and dashed phase
/// boundaries. Output depends only on the log, so it is byte-stable.
std::string render_trajectory_svg(const sim::TrajectoryLog& log);

/// Reads a trajectory log and writes its SVG. Throws Parse with the line
/// number of a malformed record.
void plot_trajectory_file(const std::filesystem::path& log_path, const std::filesystem::path& svg_path);

}  // namespace evo::plot
