#include <cmath>
#include <stdexcept>

#include "graspkit/tensor.hpp"
#include "op_common.hpp"

namespace gk {

namespace {

constexpr double kInvSqrt2 = 0.70710678118654752440;
constexpr double kInvSqrt2Pi = 0.39894228040143267794;

// Broadcasting binary op. fwd(a, b) -> out; dfa/dfb give d(out)/da and
// d(out)/db evaluated at the forward inputs.
template <typename F, typename Da, typename Db>
Tensor binary_op(const char* name, const Tensor& a, const Tensor& b, F fwd, Da dfa, Db dfb) {
    const Shape os = detail::broadcast_shape(a.shape(), b.shape(), name);
    Tensor out = Tensor::zeros(os);
    const double* pa = a.data();
    const double* pb = b.data();
    double* po = out.data();
    detail::for_each_broadcast2(os, a.shape(), b.shape(), [&](int64_t lo, int64_t la, int64_t lb) {
        po[lo] = fwd(pa[la], pb[lb]);
    });
    if (Tape* tp = detail::merge_tapes({&a, &b})) {
        auto ai = a.impl(), bi = b.impl(), oi = out.impl();
        tp->record(oi, [ai, bi, oi, os, dfa, dfb] {
            detail::for_each_broadcast2(os, ai->shape, bi->shape,
                                        [&](int64_t lo, int64_t la, int64_t lb) {
                const double g = oi->grad[static_cast<size_t>(lo)];
                const double va = ai->value[static_cast<size_t>(la)];
                const double vb = bi->value[static_cast<size_t>(lb)];
                if (ai->tracked) ai->grad[static_cast<size_t>(la)] += g * dfa(va, vb);
                if (bi->tracked) bi->grad[static_cast<size_t>(lb)] += g * dfb(va, vb);
            });
        });
    }
    detail::check_finite(out, name);
    return out;
}

template <typename F, typename D>
Tensor unary_op(const char* name, const Tensor& x, F fwd, D dfx) {
    Tensor out = Tensor::zeros(x.shape());
    const double* px = x.data();
    double* po = out.data();
    const int64_t n = x.numel();
    for (int64_t i = 0; i < n; ++i) po[i] = fwd(px[i]);
    if (Tape* tp = detail::merge_tapes({&x})) {
        auto xi = x.impl(), oi = out.impl();
        tp->record(oi, [xi, oi, dfx] {
            for (size_t i = 0; i < xi->grad.size(); ++i)
                xi->grad[i] += oi->grad[i] * dfx(xi->value[i], oi->value[i]);
        });
    }
    detail::check_finite(out, name);
    return out;
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) {
    return binary_op("add", a, b, [](double x, double y) { return x + y; },
                     [](double, double) { return 1.0; }, [](double, double) { return 1.0; });
}

Tensor sub(const Tensor& a, const Tensor& b) {
    return binary_op("sub", a, b, [](double x, double y) { return x - y; },
                     [](double, double) { return 1.0; }, [](double, double) { return -1.0; });
}

Tensor mul(const Tensor& a, const Tensor& b) {
    return binary_op("mul", a, b, [](double x, double y) { return x * y; },
                     [](double, double y) { return y; }, [](double x, double) { return x; });
}

Tensor div(const Tensor& a, const Tensor& b) {
    return binary_op("div", a, b, [](double x, double y) { return x / y; },
                     [](double, double y) { return 1.0 / y; },
                     [](double x, double y) { return -x / (y * y); });
}

Tensor maximum(const Tensor& a, const Tensor& b) {
    // Subgradient: ties route to `a`.
    return binary_op("maximum", a, b, [](double x, double y) { return x >= y ? x : y; },
                     [](double x, double y) { return x >= y ? 1.0 : 0.0; },
                     [](double x, double y) { return x >= y ? 0.0 : 1.0; });
}

Tensor minimum(const Tensor& a, const Tensor& b) {
    return binary_op("minimum", a, b, [](double x, double y) { return x <= y ? x : y; },
                     [](double x, double y) { return x <= y ? 1.0 : 0.0; },
                     [](double x, double y) { return x <= y ? 0.0 : 1.0; });
}

Tensor add_scalar(const Tensor& x, double s) {
    return unary_op("add_scalar", x, [s](double v) { return v + s; },
                    [](double, double) { return 1.0; });
}

Tensor mul_scalar(const Tensor& x, double s) {
    return unary_op("mul_scalar", x, [s](double v) { return v * s; },
                    [s](double, double) { return s; });
}

Tensor neg(const Tensor& x) { return mul_scalar(x, -1.0); }

Tensor exp(const Tensor& x) {
    return unary_op("exp", x, [](double v) { return std::exp(v); },
                    [](double, double y) { return y; });
}

Tensor log(const Tensor& x) {
    return unary_op("log", x, [](double v) { return std::log(v); },
                    [](double v, double) { return 1.0 / v; });
}

Tensor sqrt(const Tensor& x) {
    return unary_op("sqrt", x, [](double v) { return std::sqrt(v); },
                    [](double, double y) { return 0.5 / y; });
}

Tensor square(const Tensor& x) {
    return unary_op("square", x, [](double v) { return v * v; },
                    [](double v, double) { return 2.0 * v; });
}

Tensor tanh(const Tensor& x) {
    return unary_op("tanh", x, [](double v) { return std::tanh(v); },
                    [](double, double y) { return 1.0 - y * y; });
}

Tensor atan(const Tensor& x) {
    return unary_op("atan", x, [](double v) { return std::atan(v); },
                    [](double v, double) { return 1.0 / (1.0 + v * v); });
}

Tensor sigmoid(const Tensor& x) {
    return unary_op("sigmoid", x,
                    [](double v) { return v >= 0.0 ? 1.0 / (1.0 + std::exp(-v))
                                                   : std::exp(v) / (1.0 + std::exp(v)); },
                    [](double, double y) { return y * (1.0 - y); });
}

Tensor relu(const Tensor& x) {
    return unary_op("relu", x, [](double v) { return v > 0.0 ? v : 0.0; },
                    [](double v, double) { return v > 0.0 ? 1.0 : 0.0; });
}

Tensor gelu(const Tensor& x) {
    // Exact form: 0.5 x (1 + erf(x / sqrt 2)).
    return unary_op("gelu", x,
                    [](double v) { return 0.5 * v * (1.0 + std::erf(v * kInvSqrt2)); },
                    [](double v, double) {
                        const double cdf = 0.5 * (1.0 + std::erf(v * kInvSqrt2));
                        return cdf + v * kInvSqrt2Pi * std::exp(-0.5 * v * v);
                    });
}

Tensor softplus(const Tensor& x) {
    // Stable log(1 + e^x) = max(x, 0) + log1p(e^{-|x|}).
    return unary_op("softplus", x,
                    [](double v) { return std::max(v, 0.0) + std::log1p(std::exp(-std::abs(v))); },
                    [](double v, double) { return v >= 0.0 ? 1.0 / (1.0 + std::exp(-v))
                                                           : std::exp(v) / (1.0 + std::exp(v)); });
}

Tensor sum_all(const Tensor& x) {
    double s = 0.0;
    for (double v : x.values()) s += v;
    Tensor out = Tensor::scalar(s);
    if (Tape* tp = detail::merge_tapes({&x})) {
        auto xi = x.impl(), oi = out.impl();
        tp->record(oi, [xi, oi] {
            const double g = oi->grad[0];
            for (double& gv : xi->grad) gv += g;
        });
    }
    detail::check_finite(out, "sum_all");
    return out;
}

Tensor mean_all(const Tensor& x) {
    if (x.numel() == 0) throw std::invalid_argument("mean_all: empty tensor");
    return mul_scalar(sum_all(x), 1.0 / static_cast<double>(x.numel()));
}

}  // namespace gk
