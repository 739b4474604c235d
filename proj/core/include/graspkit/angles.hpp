#pragma once

#include <cmath>
#include <cstdint>

#include "graspkit/geom.hpp"

namespace gk {

/// Uniform angle bins over [0, 180). bin_angle rounds down into one of
/// k_angle bins; bin_center is its inverse up to the +-90/k_angle
/// quantization.
inline int64_t bin_angle(double theta_deg, int64_t k_angle) {
    const double t = normalize_angle_deg(theta_deg);
    int64_t b = static_cast<int64_t>(std::floor(t / (180.0 / static_cast<double>(k_angle))));
    if (b >= k_angle) b = k_angle - 1;  // t just below 180 with fp round-up
    return b;
}

inline double bin_center_deg(int64_t bin, int64_t k_angle) {
    return (static_cast<double>(bin) + 0.5) * 180.0 / static_cast<double>(k_angle);
}

}  // namespace gk
