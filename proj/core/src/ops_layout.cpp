#include <algorithm>
#include <stdexcept>
#include <string>

#include "graspkit/tensor.hpp"
#include "op_common.hpp"

namespace gk {

Tensor reshape(const Tensor& x, Shape shape) {
    if (detail::shape_numel(shape) != x.numel())
        throw std::invalid_argument("reshape: cannot view " + detail::shape_str(x.shape()) +
                                    " as " + detail::shape_str(shape));
    Tensor out = Tensor::from_data(std::move(shape), x.values());
    if (Tape* tp = detail::merge_tapes({&x})) {
        auto xi = x.impl(), oi = out.impl();
        tp->record(oi, [xi, oi] {
            for (size_t i = 0; i < xi->grad.size(); ++i) xi->grad[i] += oi->grad[i];
        });
    }
    return out;
}

Tensor permute(const Tensor& x, const std::vector<int64_t>& dims) {
    const size_t r = x.shape().size();
    if (dims.size() != r) throw std::invalid_argument("permute: dims rank mismatch");
    std::vector<bool> seen(r, false);
    Shape os(r);
    for (size_t i = 0; i < r; ++i) {
        const int64_t d = dims[i];
        if (d < 0 || d >= static_cast<int64_t>(r) || seen[static_cast<size_t>(d)])
            throw std::invalid_argument("permute: invalid axis list");
        seen[static_cast<size_t>(d)] = true;
        os[i] = x.shape()[static_cast<size_t>(d)];
    }
    Tensor out = Tensor::zeros(os);
    const auto in_strides = detail::row_major_strides(x.shape());
    // Stride into the input for each output axis.
    std::vector<int64_t> map(r);
    for (size_t i = 0; i < r; ++i) map[i] = in_strides[static_cast<size_t>(dims[i])];

    const int64_t n = x.numel();
    const double* px = x.data();
    double* po = out.data();
    auto scatter = [&](const double* src, double* dst, bool accumulate) {
        std::vector<int64_t> idx(r, 0);
        int64_t src_lin = 0;
        for (int64_t lin = 0; lin < n; ++lin) {
            if (accumulate)
                dst[src_lin] += src[lin];
            else
                dst[lin] = src[src_lin];
            for (size_t d = r; d-- > 0;) {
                ++idx[d];
                src_lin += map[d];
                if (idx[d] < os[d]) break;
                src_lin -= map[d] * os[d];
                idx[d] = 0;
            }
        }
    };
    scatter(px, po, false);

    if (Tape* tp = detail::merge_tapes({&x})) {
        auto xi = x.impl(), oi = out.impl();
        tp->record(oi, [xi, oi, os, map, n, r] {
            std::vector<int64_t> idx(r, 0);
            int64_t src_lin = 0;
            for (int64_t lin = 0; lin < n; ++lin) {
                xi->grad[static_cast<size_t>(src_lin)] += oi->grad[static_cast<size_t>(lin)];
                for (size_t d = r; d-- > 0;) {
                    ++idx[d];
                    src_lin += map[d];
                    if (idx[d] < os[d]) break;
                    src_lin -= map[d] * os[d];
                    idx[d] = 0;
                }
            }
        });
    }
    return out;
}

Tensor concat(const std::vector<Tensor>& xs, int64_t dim) {
    if (xs.empty()) throw std::invalid_argument("concat: no inputs");
    const size_t r = xs[0].shape().size();
    if (dim < 0) dim += static_cast<int64_t>(r);
    if (dim < 0 || dim >= static_cast<int64_t>(r)) throw std::invalid_argument("concat: bad dim");
    Shape os = xs[0].shape();
    int64_t total = 0;
    for (const Tensor& t : xs) {
        if (t.shape().size() != r) throw std::invalid_argument("concat: rank mismatch");
        for (size_t d = 0; d < r; ++d)
            if (d != static_cast<size_t>(dim) && t.shape()[d] != os[d])
                throw std::invalid_argument("concat: shape mismatch on non-concat axis");
        total += t.shape()[static_cast<size_t>(dim)];
    }
    os[static_cast<size_t>(dim)] = total;
    Tensor out = Tensor::zeros(os);

    // outer x (concat axis) x inner layout
    int64_t outer = 1, inner = 1;
    for (size_t d = 0; d < static_cast<size_t>(dim); ++d) outer *= os[d];
    for (size_t d = static_cast<size_t>(dim) + 1; d < r; ++d) inner *= os[d];

    double* po = out.data();
    int64_t off = 0;
    for (const Tensor& t : xs) {
        const int64_t c = t.shape()[static_cast<size_t>(dim)];
        const double* pt = t.data();
        for (int64_t u = 0; u < outer; ++u)
            std::copy(pt + u * c * inner, pt + (u + 1) * c * inner,
                      po + (u * total + off) * inner);
        off += c;
    }

    Tape* tp = nullptr;
    for (const Tensor& t : xs)
        if (t.tracked()) {
            if (tp && t.tape() != tp)
                throw std::invalid_argument("concat: inputs tracked on different tapes");
            tp = t.tape();
        }
    if (tp) {
        std::vector<std::shared_ptr<detail::TensorImpl>> ins;
        for (const Tensor& t : xs) ins.push_back(t.impl());
        auto oi = out.impl();
        tp->record(oi, [ins, oi, outer, inner, total, dim] {
            int64_t off2 = 0;
            for (const auto& im : ins) {
                const int64_t c = im->shape[static_cast<size_t>(dim)];
                if (im->tracked)
                    for (int64_t u = 0; u < outer; ++u) {
                        const double* g = oi->grad.data() + (u * total + off2) * inner;
                        double* gi = im->grad.data() + u * c * inner;
                        for (int64_t i = 0; i < c * inner; ++i) gi[i] += g[i];
                    }
                off2 += c;
            }
        });
    }
    return out;
}

Tensor slice_lastdim(const Tensor& x, int64_t start, int64_t len) {
    const int64_t c = x.dim(-1);
    if (start < 0 || len <= 0 || start + len > c)
        throw std::invalid_argument("slice_lastdim: range [" + std::to_string(start) + ", " +
                                    std::to_string(start + len) + ") out of " + std::to_string(c));
    Shape os = x.shape();
    os.back() = len;
    Tensor out = Tensor::zeros(os);
    const int64_t rows = x.numel() / c;
    const double* px = x.data();
    double* po = out.data();
    for (int64_t r = 0; r < rows; ++r)
        std::copy(px + r * c + start, px + r * c + start + len, po + r * len);
    if (Tape* tp = detail::merge_tapes({&x})) {
        auto xi = x.impl(), oi = out.impl();
        tp->record(oi, [xi, oi, rows, c, start, len] {
            for (int64_t r = 0; r < rows; ++r)
                for (int64_t i = 0; i < len; ++i)
                    xi->grad[static_cast<size_t>(r * c + start + i)] +=
                        oi->grad[static_cast<size_t>(r * len + i)];
        });
    }
    return out;
}

Tensor gather_rows(const Tensor& x, const std::vector<int64_t>& idx) {
    if (x.rank() != 2) throw std::invalid_argument("gather_rows: expected 2-D input, got " +
                                                   detail::shape_str(x.shape()));
    const int64_t rows = x.dim(0), c = x.dim(1);
    for (int64_t i : idx)
        if (i < 0 || i >= rows) throw std::invalid_argument("gather_rows: index out of range");
    Tensor out = Tensor::zeros({static_cast<int64_t>(idx.size()), c});
    const double* px = x.data();
    double* po = out.data();
    for (size_t r = 0; r < idx.size(); ++r)
        std::copy(px + idx[r] * c, px + (idx[r] + 1) * c, po + static_cast<int64_t>(r) * c);
    if (Tape* tp = detail::merge_tapes({&x})) {
        auto xi = x.impl(), oi = out.impl();
        tp->record(oi, [xi, oi, idx, c] {
            for (size_t r = 0; r < idx.size(); ++r) {
                const double* g = oi->grad.data() + static_cast<int64_t>(r) * c;
                double* gx = xi->grad.data() + idx[r] * c;
                for (int64_t i = 0; i < c; ++i) gx[i] += g[i];
            }
        });
    }
    return out;
}

Tensor take_per_row(const Tensor& x, const std::vector<int64_t>& idx) {
    if (x.rank() != 2) throw std::invalid_argument("take_per_row: expected 2-D input");
    const int64_t rows = x.dim(0), c = x.dim(1);
    if (static_cast<int64_t>(idx.size()) != rows)
        throw std::invalid_argument("take_per_row: need one index per row");
    for (int64_t i : idx)
        if (i < 0 || i >= c) throw std::invalid_argument("take_per_row: index out of range");
    Tensor out = Tensor::zeros({rows, 1});
    const double* px = x.data();
    double* po = out.data();
    for (int64_t r = 0; r < rows; ++r) po[r] = px[r * c + idx[static_cast<size_t>(r)]];
    if (Tape* tp = detail::merge_tapes({&x})) {
        auto xi = x.impl(), oi = out.impl();
        tp->record(oi, [xi, oi, idx, c] {
            for (size_t r = 0; r < idx.size(); ++r)
                xi->grad[static_cast<size_t>(static_cast<int64_t>(r) * c + idx[r])] +=
                    oi->grad[r];
        });
    }
    return out;
}

}  // namespace gk
