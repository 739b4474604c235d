#include "graspkit/render.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace gk {

namespace {

Rgb hsv_to_rgb(double h, double s, double v) {
    h = std::fmod(std::fmod(h, 360.0) + 360.0, 360.0) / 60.0;
    const int i = static_cast<int>(h) % 6;
    const double f = h - std::floor(h);
    const double p = v * (1 - s), q = v * (1 - s * f), t = v * (1 - s * (1 - f));
    double r = 0, g = 0, b = 0;
    switch (i) {
        case 0: r = v; g = t; b = p; break;
        case 1: r = q; g = v; b = p; break;
        case 2: r = p; g = v; b = t; break;
        case 3: r = p; g = q; b = v; break;
        case 4: r = t; g = p; b = v; break;
        default: r = v; g = p; b = q; break;
    }
    return {static_cast<uint8_t>(std::lround(r * 255)),
            static_cast<uint8_t>(std::lround(g * 255)),
            static_cast<uint8_t>(std::lround(b * 255))};
}

void put_pixel(ImageU8& img, int64_t i, int64_t j, Rgb c) {
    if (i < 0 || i >= img.height || j < 0 || j >= img.width) return;
    uint8_t* p = img.px(i, j);
    p[0] = c[0];
    p[1] = c[1];
    p[2] = c[2];
}

}  // namespace

Rgb angle_bin_color(int64_t bin, int64_t k_angle) {
    return hsv_to_rgb(360.0 * static_cast<double>(bin) / static_cast<double>(k_angle), 0.9, 1.0);
}

Rgb category_color(int category) {
    static constexpr Rgb palette[] = {
        {230, 70, 60},  {60, 200, 90},  {70, 110, 230}, {230, 200, 50},
        {200, 80, 220}, {60, 210, 210}, {240, 140, 40}, {160, 160, 160},
    };
    return palette[static_cast<size_t>(category) % (sizeof(palette) / sizeof(palette[0]))];
}

void draw_segment(ImageU8& img, Vec2 a, Vec2 b, Rgb color, int thickness) {
    const double len = std::hypot(b.x - a.x, b.y - a.y);
    const int steps = std::max(1, static_cast<int>(std::ceil(len * 2)));
    const double nx = len > 0 ? -(b.y - a.y) / len : 0.0;
    const double ny = len > 0 ? (b.x - a.x) / len : 0.0;
    for (int s = 0; s <= steps; ++s) {
        const double t = static_cast<double>(s) / steps;
        const double x = a.x + t * (b.x - a.x);
        const double y = a.y + t * (b.y - a.y);
        for (int o = -(thickness - 1); o <= thickness - 1; ++o) {
            const double off = 0.5 * o;
            put_pixel(img, static_cast<int64_t>(std::lround(y + ny * off - 0.5)),
                      static_cast<int64_t>(std::lround(x + nx * off - 0.5)), color);
        }
    }
}

void draw_grasp(ImageU8& img, const GraspRect& g, Rgb color, int thickness) {
    const Quad q = rect_to_quad(g);
    const Rgb dim{static_cast<uint8_t>(color[0] / 2), static_cast<uint8_t>(color[1] / 2),
                  static_cast<uint8_t>(color[2] / 2)};
    // v0->v1 and v2->v3 run along the closing direction (opening edges)
    draw_segment(img, q[0], q[1], dim, thickness);
    draw_segment(img, q[2], q[3], dim, thickness);
    // plate edges
    draw_segment(img, q[1], q[2], color, thickness);
    draw_segment(img, q[3], q[0], color, thickness);
}

void overlay_heatmap(ImageU8& img, const Tensor& heat, int64_t stride, double alpha) {
    if (heat.rank() != 2) throw std::invalid_argument("overlay_heatmap: expected [H', W']");
    const int64_t gh = heat.dim(0), gw = heat.dim(1);
    for (int64_t i = 0; i < img.height; ++i)
        for (int64_t j = 0; j < img.width; ++j) {
            const int64_t ci = std::min(i / stride, gh - 1);
            const int64_t cj = std::min(j / stride, gw - 1);
            const double v = std::clamp(heat.at({ci, cj}), 0.0, 1.0);
            // hot map: black -> red -> yellow
            const double r = std::min(1.0, 2.0 * v);
            const double g = std::max(0.0, 2.0 * v - 1.0);
            uint8_t* p = img.px(i, j);
            p[0] = static_cast<uint8_t>(std::lround((1 - alpha) * p[0] + alpha * r * 255));
            p[1] = static_cast<uint8_t>(std::lround((1 - alpha) * p[1] + alpha * g * 255));
            p[2] = static_cast<uint8_t>(std::lround((1 - alpha) * p[2]));
        }
}

}  // namespace gk
