// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "depthdiff/core/types.hpp"

namespace depthdiff::plot {

/// Renders a scalar grid as a color-mapped PNG (blue = low, red = high).
/// vmin == vmax autoscales to the data range.
void save_heatmap(const std::filesystem::path& path, const std::vector<double>& grid, int h,
                  int w, double vmin = 0.0, double vmax = 0.0, int upscale = 4);

void save_depth_heatmap(const std::filesystem::path& path, const DepthMap& depth,
                        int upscale = 4);

/// |pred - gt| error heatmap, optionally restricted to the mask.
void save_error_heatmap(const std::filesystem::path& path, const DepthMap& pred,
                        const DepthMap& gt, const TransparencyMask* mask, int upscale = 4);

struct Curve {
    std::string label;
    std::vector<double> xs;
    std::vector<double> ys;
};

/// Line chart with axes and numeric tick labels (tiny bitmap digits).
void save_line_chart(const std::filesystem::path& path, const std::vector<Curve>& curves,
                     const std::string& title, int width = 640, int height = 420);

}  // namespace depthdiff::plot
