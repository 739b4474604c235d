#pragma once

#include <array>

#include "graspkit/geom.hpp"
#include "graspkit/image.hpp"

namespace gk {

using Rgb = std::array<uint8_t, 3>;

/// Hue-wheel color for an angle bin (the paper colors rectangles by angle).
Rgb angle_bin_color(int64_t bin, int64_t k_angle);
Rgb category_color(int category);

void draw_segment(ImageU8& img, Vec2 a, Vec2 b, Rgb color, int thickness = 1);

/// Outlines the grasp rectangle; the two plate edges (the h sides) draw in
/// `color`, the opening edges in a dimmed shade, matching the usual grasp
/// visualization.
void draw_grasp(ImageU8& img, const GraspRect& g, Rgb color, int thickness = 1);

/// Alpha-blends a hot colormap of heat (values in [0, 1], one cell per
/// stride x stride block) over the image.
void overlay_heatmap(ImageU8& img, const Tensor& heat, int64_t stride, double alpha = 0.45);

}  // namespace gk
