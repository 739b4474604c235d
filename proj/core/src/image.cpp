#include "graspkit/image.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>

#include <png.h>

#include "graspkit/error.hpp"

namespace gk {

namespace {

ImageU8 load_ppm(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open image: " + path);
    std::string magic;
    in >> magic;
    if (magic != "P6") throw DataError("unsupported PPM variant in " + path);
    auto next_int = [&]() {
        // skip whitespace and '#' comments
        for (;;) {
            int c = in.peek();
            if (c == '#') {
                std::string line;
                std::getline(in, line);
            } else if (std::isspace(c)) {
                in.get();
            } else {
                break;
            }
        }
        long v = 0;
        in >> v;
        return v;
    };
    const long w = next_int();
    const long h = next_int();
    const long maxval = next_int();
    in.get();  // single whitespace after header
    if (w <= 0 || h <= 0 || maxval != 255)
        throw DataError("bad PPM header in " + path);
    ImageU8 img;
    img.width = w;
    img.height = h;
    img.rgb.resize(static_cast<size_t>(w) * static_cast<size_t>(h) * 3);
    in.read(reinterpret_cast<char*>(img.rgb.data()), static_cast<std::streamsize>(img.rgb.size()));
    if (!in) throw DataError("truncated PPM payload in " + path);
    return img;
}

ImageU8 load_png_file(const std::string& path) {
    png_image image;
    std::memset(&image, 0, sizeof(image));
    image.version = PNG_IMAGE_VERSION;
    if (!png_image_begin_read_from_file(&image, path.c_str()))
        throw DataError("cannot read PNG " + path + ": " + image.message);
    image.format = PNG_FORMAT_RGB;
    ImageU8 img;
    img.width = image.width;
    img.height = image.height;
    img.rgb.resize(PNG_IMAGE_SIZE(image));
    if (!png_image_finish_read(&image, nullptr, img.rgb.data(), 0, nullptr)) {
        png_image_free(&image);
        throw DataError("cannot decode PNG " + path + ": " + image.message);
    }
    return img;
}

}  // namespace

ImageU8 load_image(const std::string& path) {
    std::ifstream probe(path, std::ios::binary);
    if (!probe) throw DataError("cannot open image: " + path);
    unsigned char magic[2] = {0, 0};
    probe.read(reinterpret_cast<char*>(magic), 2);
    probe.close();
    if (magic[0] == 'P' && magic[1] == '6') return load_ppm(path);
    if (magic[0] == 0x89 && magic[1] == 'P') return load_png_file(path);
    throw DataError("unrecognized image format (want PNG or P6 PPM): " + path);
}

void save_png(const std::string& path, const ImageU8& img) {
    png_image image;
    std::memset(&image, 0, sizeof(image));
    image.version = PNG_IMAGE_VERSION;
    image.width = static_cast<png_uint_32>(img.width);
    image.height = static_cast<png_uint_32>(img.height);
    image.format = PNG_FORMAT_RGB;
    if (!png_image_write_to_file(&image, path.c_str(), 0, img.rgb.data(), 0, nullptr))
        throw DataError("cannot write PNG " + path + ": " + image.message);
}

void save_ppm(const std::string& path, const ImageU8& img) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot open for writing: " + path);
    out << "P6\n" << img.width << " " << img.height << "\n255\n";
    out.write(reinterpret_cast<const char*>(img.rgb.data()),
              static_cast<std::streamsize>(img.rgb.size()));
    if (!out) throw DataError("short write: " + path);
}

void save_image(const std::string& path, const ImageU8& img) {
    if (path.size() >= 4 && path.substr(path.size() - 4) == ".ppm")
        save_ppm(path, img);
    else
        save_png(path, img);
}

Tensor image_to_tensor(const ImageU8& img) {
    Tensor t = Tensor::zeros({3, img.height, img.width});
    double* p = t.data();
    const int64_t hw = img.height * img.width;
    for (int64_t i = 0; i < hw; ++i)
        for (int64_t c = 0; c < 3; ++c)
            p[c * hw + i] = static_cast<double>(img.rgb[static_cast<size_t>(i * 3 + c)]) / 255.0;
    return t;
}

ImageU8 tensor_to_image(const Tensor& t) {
    if (t.rank() != 3 || t.dim(0) != 3)
        throw std::invalid_argument("tensor_to_image: expected [3, H, W]");
    ImageU8 img;
    img.height = t.dim(1);
    img.width = t.dim(2);
    img.rgb.resize(static_cast<size_t>(img.height * img.width * 3));
    const double* p = t.data();
    const int64_t hw = img.height * img.width;
    for (int64_t i = 0; i < hw; ++i)
        for (int64_t c = 0; c < 3; ++c) {
            const double v = std::clamp(p[c * hw + i], 0.0, 1.0);
            img.rgb[static_cast<size_t>(i * 3 + c)] = static_cast<uint8_t>(std::lround(v * 255.0));
        }
    return img;
}

namespace {

// Bilinear sample at continuous (x, y) with pixel centers at half-integers
// and edge clamping.
double sample_bilinear(const double* plane, int64_t h, int64_t w, double x, double y) {
    const double u = x - 0.5;
    const double v = y - 0.5;
    const double fj = std::floor(u);
    const double fi = std::floor(v);
    const double ax = u - fj;
    const double ay = v - fi;
    auto at = [&](int64_t i, int64_t j) {
        i = std::clamp<int64_t>(i, 0, h - 1);
        j = std::clamp<int64_t>(j, 0, w - 1);
        return plane[i * w + j];
    };
    const int64_t i0 = static_cast<int64_t>(fi);
    const int64_t j0 = static_cast<int64_t>(fj);
    return (1 - ay) * ((1 - ax) * at(i0, j0) + ax * at(i0, j0 + 1)) +
           ay * ((1 - ax) * at(i0 + 1, j0) + ax * at(i0 + 1, j0 + 1));
}

}  // namespace

Tensor bilinear_resize(const Tensor& img, int64_t out_h, int64_t out_w) {
    if (img.rank() != 3) throw std::invalid_argument("bilinear_resize: expected [C, H, W]");
    const int64_t C = img.dim(0), H = img.dim(1), W = img.dim(2);
    if (out_h == H && out_w == W) return img.clone();
    if (out_h < 1 || out_w < 1) throw std::invalid_argument("bilinear_resize: bad extents");
    Tensor out = Tensor::zeros({C, out_h, out_w});
    const double sx = static_cast<double>(W) / static_cast<double>(out_w);
    const double sy = static_cast<double>(H) / static_cast<double>(out_h);
    for (int64_t c = 0; c < C; ++c) {
        const double* src = img.data() + c * H * W;
        double* dst = out.data() + c * out_h * out_w;
        for (int64_t i = 0; i < out_h; ++i)
            for (int64_t j = 0; j < out_w; ++j)
                dst[i * out_w + j] = sample_bilinear(src, H, W,
                                                     (static_cast<double>(j) + 0.5) * sx,
                                                     (static_cast<double>(i) + 0.5) * sy);
    }
    return out;
}

Tensor rotate_bilinear(const Tensor& img, double degrees) {
    if (img.rank() != 3) throw std::invalid_argument("rotate_bilinear: expected [C, H, W]");
    const int64_t C = img.dim(0), H = img.dim(1), W = img.dim(2);
    const double rad = degrees * 3.14159265358979323846 / 180.0;
    const double cs = std::cos(rad), sn = std::sin(rad);
    const double cx = static_cast<double>(W) / 2.0;
    const double cy = static_cast<double>(H) / 2.0;
    Tensor out = Tensor::zeros({C, H, W});
    for (int64_t c = 0; c < C; ++c) {
        const double* src = img.data() + c * H * W;
        double* dst = out.data() + c * H * W;
        for (int64_t i = 0; i < H; ++i)
            for (int64_t j = 0; j < W; ++j) {
                const double dx = static_cast<double>(j) + 0.5 - cx;
                const double dy = static_cast<double>(i) + 0.5 - cy;
                // inverse map: rotate by -degrees
                const double sxp = cx + cs * dx + sn * dy;
                const double syp = cy - sn * dx + cs * dy;
                dst[i * W + j] = sample_bilinear(src, H, W, sxp, syp);
            }
    }
    return out;
}

}  // namespace gk
