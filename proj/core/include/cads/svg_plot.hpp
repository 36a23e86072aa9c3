#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "cads/sampler.hpp"

namespace cads {

struct ScatterPanel {
  std::string title;
  std::vector<ChainResult> points;
};

// Standalone SVG 1.1 scatter figure: one panel per input, identical axis
// ranges [-extent, extent]^2, points colored by label, no external
// references.
void write_scatter_svg(const std::filesystem::path& path,
                       const std::vector<ScatterPanel>& panels,
                       double axis_extent, const std::string& figure_title);

}  // namespace cads
