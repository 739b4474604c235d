#include <cmath>
#include <stdexcept>

#include "graspkit/tensor.hpp"
#include "op_common.hpp"

namespace gk {

namespace {

// Splits [..., r0, r1] into (batch dims, r0, r1).
void split_batched(const Shape& s, const char* op, Shape& batch, int64_t& r0, int64_t& r1) {
    if (s.size() < 2)
        throw std::invalid_argument(std::string(op) + ": rank must be >= 2, got shape " +
                                    detail::shape_str(s));
    batch.assign(s.begin(), s.end() - 2);
    r0 = s[s.size() - 2];
    r1 = s[s.size() - 1];
}

}  // namespace

Tensor matmul(const Tensor& a, const Tensor& b) {
    Shape ba, bb;
    int64_t m, ka, kb, n;
    split_batched(a.shape(), "matmul", ba, m, ka);
    split_batched(b.shape(), "matmul", bb, kb, n);
    if (ka != kb)
        throw std::invalid_argument("matmul: inner dimensions disagree, " +
                                    detail::shape_str(a.shape()) + " x " +
                                    detail::shape_str(b.shape()));
    const int64_t k = ka;
    const Shape batch = detail::broadcast_shape(ba, bb, "matmul");
    Shape os = batch;
    os.push_back(m);
    os.push_back(n);
    Tensor out = Tensor::zeros(os);

    const int64_t nbatch = detail::shape_numel(batch);
    const auto sa = detail::broadcast_strides(ba, batch);
    const auto sb = detail::broadcast_strides(bb, batch);
    const int64_t a_mat = m * k, b_mat = k * n, o_mat = m * n;

    // Per-batch base offsets into a and b (element units).
    std::vector<int64_t> offa(static_cast<size_t>(nbatch)), offb(static_cast<size_t>(nbatch));
    {
        std::vector<int64_t> idx(batch.size(), 0);
        int64_t la = 0, lb = 0;
        for (int64_t bi = 0; bi < nbatch; ++bi) {
            offa[static_cast<size_t>(bi)] = la * a_mat;
            offb[static_cast<size_t>(bi)] = lb * b_mat;
            for (size_t d = batch.size(); d-- > 0;) {
                ++idx[d];
                la += sa[d];
                lb += sb[d];
                if (idx[d] < batch[d]) break;
                la -= sa[d] * batch[d];
                lb -= sb[d] * batch[d];
                idx[d] = 0;
            }
        }
    }

    {
        const double* pa = a.data();
        const double* pb = b.data();
        double* po = out.data();
        for (int64_t bi = 0; bi < nbatch; ++bi) {
            const double* A = pa + offa[static_cast<size_t>(bi)];
            const double* B = pb + offb[static_cast<size_t>(bi)];
            double* O = po + bi * o_mat;
            for (int64_t i = 0; i < m; ++i)
                for (int64_t kk = 0; kk < k; ++kk) {
                    const double av = A[i * k + kk];
                    if (av == 0.0) continue;
                    const double* Brow = B + kk * n;
                    double* Orow = O + i * n;
                    for (int64_t j = 0; j < n; ++j) Orow[j] += av * Brow[j];
                }
        }
    }

    if (Tape* tp = detail::merge_tapes({&a, &b})) {
        auto ai = a.impl(), bi_ = b.impl(), oi = out.impl();
        tp->record(oi, [ai, bi_, oi, offa, offb, nbatch, m, n, k, a_mat, b_mat, o_mat] {
            for (int64_t bi = 0; bi < nbatch; ++bi) {
                const double* G = oi->grad.data() + bi * o_mat;
                const double* A = ai->value.data() + offa[static_cast<size_t>(bi)];
                const double* B = bi_->value.data() + offb[static_cast<size_t>(bi)];
                if (ai->tracked) {
                    double* GA = ai->grad.data() + offa[static_cast<size_t>(bi)];
                    for (int64_t i = 0; i < m; ++i)
                        for (int64_t j = 0; j < n; ++j) {
                            const double g = G[i * n + j];
                            if (g == 0.0) continue;
                            const double* Brow = B + j;  // column j, stride n
                            double* GArow = GA + i * k;
                            for (int64_t kk = 0; kk < k; ++kk) GArow[kk] += g * Brow[kk * n];
                        }
                }
                if (bi_->tracked) {
                    double* GB = bi_->grad.data() + offb[static_cast<size_t>(bi)];
                    for (int64_t kk = 0; kk < k; ++kk)
                        for (int64_t i = 0; i < m; ++i) {
                            const double av = A[i * k + kk];
                            if (av == 0.0) continue;
                            const double* Grow = G + i * n;
                            double* GBrow = GB + kk * n;
                            for (int64_t j = 0; j < n; ++j) GBrow[j] += av * Grow[j];
                        }
                }
            }
        });
    }
    detail::check_finite(out, "matmul");
    return out;
}

Tensor transpose_last2(const Tensor& x) {
    Shape batch;
    int64_t r, c;
    split_batched(x.shape(), "transpose_last2", batch, r, c);
    Shape os = batch;
    os.push_back(c);
    os.push_back(r);
    Tensor out = Tensor::zeros(os);
    const int64_t nb = detail::shape_numel(batch);
    const double* px = x.data();
    double* po = out.data();
    for (int64_t b = 0; b < nb; ++b)
        for (int64_t i = 0; i < r; ++i)
            for (int64_t j = 0; j < c; ++j)
                po[b * r * c + j * r + i] = px[b * r * c + i * c + j];
    if (Tape* tp = detail::merge_tapes({&x})) {
        auto xi = x.impl(), oi = out.impl();
        tp->record(oi, [xi, oi, nb, r, c] {
            for (int64_t b = 0; b < nb; ++b)
                for (int64_t i = 0; i < r; ++i)
                    for (int64_t j = 0; j < c; ++j)
                        xi->grad[static_cast<size_t>(b * r * c + i * c + j)] +=
                            oi->grad[static_cast<size_t>(b * r * c + j * r + i)];
        });
    }
    return out;
}

Tensor softmax_lastdim(const Tensor& x) {
    const int64_t c = x.rank() >= 1 ? x.dim(-1) : 0;
    if (c < 1) throw std::invalid_argument("softmax_lastdim: last dim must be >= 1");
    const int64_t rows = x.numel() / c;
    Tensor out = Tensor::zeros(x.shape());
    const double* px = x.data();
    double* po = out.data();
    for (int64_t r = 0; r < rows; ++r) {
        const double* xr = px + r * c;
        double* yr = po + r * c;
        double mx = xr[0];
        for (int64_t i = 1; i < c; ++i) mx = std::max(mx, xr[i]);
        double s = 0.0;
        for (int64_t i = 0; i < c; ++i) {
            yr[i] = std::exp(xr[i] - mx);
            s += yr[i];
        }
        for (int64_t i = 0; i < c; ++i) yr[i] /= s;
    }
    if (Tape* tp = detail::merge_tapes({&x})) {
        auto xi = x.impl(), oi = out.impl();
        tp->record(oi, [xi, oi, rows, c] {
            for (int64_t r = 0; r < rows; ++r) {
                const double* y = oi->value.data() + r * c;
                const double* g = oi->grad.data() + r * c;
                double dot = 0.0;
                for (int64_t i = 0; i < c; ++i) dot += g[i] * y[i];
                double* gx = xi->grad.data() + r * c;
                for (int64_t i = 0; i < c; ++i) gx[i] += y[i] * (g[i] - dot);
            }
        });
    }
    detail::check_finite(out, "softmax_lastdim");
    return out;
}

Tensor log_softmax_lastdim(const Tensor& x) {
    const int64_t c = x.rank() >= 1 ? x.dim(-1) : 0;
    if (c < 1) throw std::invalid_argument("log_softmax_lastdim: last dim must be >= 1");
    const int64_t rows = x.numel() / c;
    Tensor out = Tensor::zeros(x.shape());
    const double* px = x.data();
    double* po = out.data();
    for (int64_t r = 0; r < rows; ++r) {
        const double* xr = px + r * c;
        double* yr = po + r * c;
        double mx = xr[0];
        for (int64_t i = 1; i < c; ++i) mx = std::max(mx, xr[i]);
        double s = 0.0;
        for (int64_t i = 0; i < c; ++i) s += std::exp(xr[i] - mx);
        const double lse = mx + std::log(s);
        for (int64_t i = 0; i < c; ++i) yr[i] = xr[i] - lse;
    }
    if (Tape* tp = detail::merge_tapes({&x})) {
        auto xi = x.impl(), oi = out.impl();
        tp->record(oi, [xi, oi, rows, c] {
            for (int64_t r = 0; r < rows; ++r) {
                const double* y = oi->value.data() + r * c;
                const double* g = oi->grad.data() + r * c;
                double gsum = 0.0;
                for (int64_t i = 0; i < c; ++i) gsum += g[i];
                double* gx = xi->grad.data() + r * c;
                for (int64_t i = 0; i < c; ++i) gx[i] += g[i] - std::exp(y[i]) * gsum;
            }
        });
    }
    detail::check_finite(out, "log_softmax_lastdim");
    return out;
}

Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& bias, double eps) {
    const int64_t c = x.rank() >= 1 ? x.dim(-1) : 0;
    if (c < 1) throw std::invalid_argument("layer_norm: normalized dim must be >= 1");
    if (gain.numel() != c || bias.numel() != c)
        throw std::invalid_argument("layer_norm: gain/bias must have " + std::to_string(c) +
                                    " elements");
    const int64_t rows = x.numel() / c;
    Tensor out = Tensor::zeros(x.shape());
    auto xhat = std::make_shared<std::vector<double>>(static_cast<size_t>(x.numel()));
    auto inv_sigma = std::make_shared<std::vector<double>>(static_cast<size_t>(rows));
    const double* px = x.data();
    const double* pg = gain.data();
    const double* pb = bias.data();
    double* po = out.data();
    for (int64_t r = 0; r < rows; ++r) {
        const double* xr = px + r * c;
        double mu = 0.0;
        for (int64_t i = 0; i < c; ++i) mu += xr[i];
        mu /= static_cast<double>(c);
        double var = 0.0;
        for (int64_t i = 0; i < c; ++i) var += (xr[i] - mu) * (xr[i] - mu);
        var /= static_cast<double>(c);
        const double inv = 1.0 / std::sqrt(var + eps);
        (*inv_sigma)[static_cast<size_t>(r)] = inv;
        for (int64_t i = 0; i < c; ++i) {
            const double xh = (xr[i] - mu) * inv;
            (*xhat)[static_cast<size_t>(r * c + i)] = xh;
            po[r * c + i] = xh * pg[i] + pb[i];
        }
    }
    if (Tape* tp = detail::merge_tapes({&x, &gain, &bias})) {
        auto xi = x.impl(), gi = gain.impl(), bi = bias.impl(), oi = out.impl();
        tp->record(oi, [xi, gi, bi, oi, xhat, inv_sigma, rows, c] {
            for (int64_t r = 0; r < rows; ++r) {
                const double* g = oi->grad.data() + r * c;
                const double* xh = xhat->data() + r * c;
                if (gi->tracked)
                    for (int64_t i = 0; i < c; ++i) gi->grad[static_cast<size_t>(i)] += g[i] * xh[i];
                if (bi->tracked)
                    for (int64_t i = 0; i < c; ++i) bi->grad[static_cast<size_t>(i)] += g[i];
                if (xi->tracked) {
                    const double inv = (*inv_sigma)[static_cast<size_t>(r)];
                    double sum1 = 0.0, sum2 = 0.0;
                    for (int64_t i = 0; i < c; ++i) {
                        const double dxh = g[i] * gi->value[static_cast<size_t>(i)];
                        sum1 += dxh;
                        sum2 += dxh * xh[i];
                    }
                    const double invc = 1.0 / static_cast<double>(c);
                    double* gx = xi->grad.data() + r * c;
                    for (int64_t i = 0; i < c; ++i) {
                        const double dxh = g[i] * gi->value[static_cast<size_t>(i)];
                        gx[i] += inv * (dxh - sum1 * invc - xh[i] * sum2 * invc);
                    }
                }
            }
        });
    }
    detail::check_finite(out, "layer_norm");
    return out;
}

}  // namespace gk
