#include <stdexcept>
#include <string>

#include "graspkit/tensor.hpp"
#include "op_common.hpp"

namespace gk {

Tensor conv2d(const Tensor& x, const Tensor& kernel, int64_t stride, int64_t padding) {
    if (x.rank() != 4 || kernel.rank() != 4)
        throw std::invalid_argument("conv2d: expected x[B,C,H,W] and kernel[O,C,kh,kw], got " +
                                    detail::shape_str(x.shape()) + " and " +
                                    detail::shape_str(kernel.shape()));
    const int64_t B = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
    const int64_t O = kernel.dim(0), KC = kernel.dim(1), kh = kernel.dim(2), kw = kernel.dim(3);
    if (KC != C)
        throw std::invalid_argument("conv2d: channel mismatch, input has " + std::to_string(C) +
                                    " kernel wants " + std::to_string(KC));
    if (stride < 1) throw std::invalid_argument("conv2d: stride must be >= 1");
    const int64_t Hn = H + 2 * padding - kh;
    const int64_t Wn = W + 2 * padding - kw;
    if (Hn < 0 || Wn < 0 || Hn % stride != 0 || Wn % stride != 0)
        throw std::invalid_argument("conv2d: non-integral output extent for input " +
                                    detail::shape_str(x.shape()) + " kernel " +
                                    detail::shape_str(kernel.shape()) + " stride " +
                                    std::to_string(stride) + " padding " + std::to_string(padding));
    const int64_t Ho = Hn / stride + 1;
    const int64_t Wo = Wn / stride + 1;

    Tensor out = Tensor::zeros({B, O, Ho, Wo});
    const double* px = x.data();
    const double* pk = kernel.data();
    double* po = out.data();

    for (int64_t b = 0; b < B; ++b)
        for (int64_t o = 0; o < O; ++o)
            for (int64_t i = 0; i < Ho; ++i)
                for (int64_t j = 0; j < Wo; ++j) {
                    double acc = 0.0;
                    for (int64_t c = 0; c < C; ++c)
                        for (int64_t r = 0; r < kh; ++r) {
                            const int64_t ih = i * stride - padding + r;
                            if (ih < 0 || ih >= H) continue;
                            const double* xrow = px + ((b * C + c) * H + ih) * W;
                            const double* krow = pk + ((o * C + c) * kh + r) * kw;
                            for (int64_t s = 0; s < kw; ++s) {
                                const int64_t iw = j * stride - padding + s;
                                if (iw < 0 || iw >= W) continue;
                                acc += xrow[iw] * krow[s];
                            }
                        }
                    po[((b * O + o) * Ho + i) * Wo + j] = acc;
                }

    if (Tape* tp = detail::merge_tapes({&x, &kernel})) {
        auto xi = x.impl(), ki = kernel.impl(), oi = out.impl();
        tp->record(oi, [xi, ki, oi, B, C, H, W, O, kh, kw, Ho, Wo, stride, padding] {
            for (int64_t b = 0; b < B; ++b)
                for (int64_t o = 0; o < O; ++o)
                    for (int64_t i = 0; i < Ho; ++i)
                        for (int64_t j = 0; j < Wo; ++j) {
                            const double g = oi->grad[static_cast<size_t>(((b * O + o) * Ho + i) * Wo + j)];
                            if (g == 0.0) continue;
                            for (int64_t c = 0; c < C; ++c)
                                for (int64_t r = 0; r < kh; ++r) {
                                    const int64_t ih = i * stride - padding + r;
                                    if (ih < 0 || ih >= H) continue;
                                    for (int64_t s = 0; s < kw; ++s) {
                                        const int64_t iw = j * stride - padding + s;
                                        if (iw < 0 || iw >= W) continue;
                                        const size_t xoff =
                                            static_cast<size_t>(((b * C + c) * H + ih) * W + iw);
                                        const size_t koff =
                                            static_cast<size_t>(((o * C + c) * kh + r) * kw + s);
                                        if (xi->tracked) xi->grad[xoff] += g * ki->value[koff];
                                        if (ki->tracked) ki->grad[koff] += g * xi->value[xoff];
                                    }
                                }
                        }
        });
    }
    detail::check_finite(out, "conv2d");
    return out;
}

Tensor upsample_nearest(const Tensor& x, int64_t factor) {
    if (x.rank() != 4)
        throw std::invalid_argument("upsample_nearest: expected x[B,C,H,W], got " +
                                    detail::shape_str(x.shape()));
    if (factor < 1) throw std::invalid_argument("upsample_nearest: factor must be >= 1");
    const int64_t B = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
    const int64_t Ho = H * factor, Wo = W * factor;
    Tensor out = Tensor::zeros({B, C, Ho, Wo});
    const double* px = x.data();
    double* po = out.data();
    for (int64_t bc = 0; bc < B * C; ++bc)
        for (int64_t i = 0; i < Ho; ++i) {
            const double* xrow = px + (bc * H + i / factor) * W;
            double* orow = po + (bc * Ho + i) * Wo;
            for (int64_t j = 0; j < Wo; ++j) orow[j] = xrow[j / factor];
        }
    if (Tape* tp = detail::merge_tapes({&x})) {
        auto xi = x.impl(), oi = out.impl();
        tp->record(oi, [xi, oi, B, C, H, W, Ho, Wo, factor] {
            for (int64_t bc = 0; bc < B * C; ++bc)
                for (int64_t i = 0; i < Ho; ++i) {
                    const double* grow = oi->grad.data() + (bc * Ho + i) * Wo;
                    double* gxrow = xi->grad.data() + (bc * H + i / factor) * W;
                    for (int64_t j = 0; j < Wo; ++j) gxrow[j / factor] += grow[j];
                }
        });
    }
    return out;
}

}  // namespace gk
