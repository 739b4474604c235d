#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "graspkit/tensor.hpp"

namespace gk {

/// Row-major interleaved RGB, 8 bits per channel.
struct ImageU8 {
    int64_t width = 0;
    int64_t height = 0;
    std::vector<uint8_t> rgb;

    uint8_t* px(int64_t row, int64_t col) { return rgb.data() + (row * width + col) * 3; }
    const uint8_t* px(int64_t row, int64_t col) const {
        return rgb.data() + (row * width + col) * 3;
    }
};

/// PNG or binary PPM (P6), chosen by file magic.
ImageU8 load_image(const std::string& path);
void save_png(const std::string& path, const ImageU8& img);
void save_ppm(const std::string& path, const ImageU8& img);
/// Dispatches on the output extension (.png / .ppm).
void save_image(const std::string& path, const ImageU8& img);

/// [3, H, W] float tensor in [0, 1].
Tensor image_to_tensor(const ImageU8& img);
ImageU8 tensor_to_image(const Tensor& t);

/// Bilinear resample with half-integer pixel centers; identity when the
/// extents already match.
Tensor bilinear_resize(const Tensor& img, int64_t out_h, int64_t out_w);

/// Rotates the image counter-clockwise (in the y-down pixel frame) by the
/// given angle about the geometric center (W/2, H/2); samples outside the
/// frame clamp to the nearest edge pixel.
Tensor rotate_bilinear(const Tensor& img, double degrees);

}  // namespace gk
