#pragma once

// Internal helpers shared by the op translation units.

#include <cstdint>
#include <vector>

#include "graspkit/tensor.hpp"

namespace gk::detail {

inline std::vector<int64_t> row_major_strides(const Shape& s) {
    std::vector<int64_t> st(s.size(), 0);
    int64_t acc = 1;
    for (size_t i = s.size(); i-- > 0;) {
        st[i] = acc;
        acc *= s[i];
    }
    return st;
}

// Strides for reading a tensor of shape `in` as if broadcast to `out`
// (stride 0 on broadcast dims, aligned to the trailing axes).
inline std::vector<int64_t> broadcast_strides(const Shape& in, const Shape& out) {
    const std::vector<int64_t> st = row_major_strides(in);
    std::vector<int64_t> r(out.size(), 0);
    const size_t off = out.size() - in.size();
    for (size_t i = 0; i < in.size(); ++i)
        r[off + i] = in[i] == 1 && out[off + i] != 1 ? 0 : st[i];
    return r;
}

// Walks every linear index of `out_shape`, producing the linear offsets into
// two broadcast inputs. fn(out_lin, a_lin, b_lin).
template <typename Fn>
void for_each_broadcast2(const Shape& out_shape, const Shape& a_shape, const Shape& b_shape, Fn&& fn) {
    const int64_t n = shape_numel(out_shape);
    const size_t r = out_shape.size();
    const auto sa = broadcast_strides(a_shape, out_shape);
    const auto sb = broadcast_strides(b_shape, out_shape);
    std::vector<int64_t> idx(r, 0);
    int64_t la = 0, lb = 0;
    for (int64_t lin = 0; lin < n; ++lin) {
        fn(lin, la, lb);
        for (size_t d = r; d-- > 0;) {
            ++idx[d];
            la += sa[d];
            lb += sb[d];
            if (idx[d] < out_shape[d]) break;
            la -= sa[d] * out_shape[d];
            lb -= sb[d] * out_shape[d];
            idx[d] = 0;
        }
    }
}

// Accumulates `g` (laid out as `out_shape`) into `dst` of shape `in_shape`,
// summing over broadcast dims. dst must be preallocated to in_shape's numel.
inline void accumulate_reduced(std::vector<double>& dst, const Shape& in_shape,
                               const std::vector<double>& g, const Shape& out_shape) {
    const int64_t n = shape_numel(out_shape);
    const size_t r = out_shape.size();
    const auto sd = broadcast_strides(in_shape, out_shape);
    std::vector<int64_t> idx(r, 0);
    int64_t ld = 0;
    for (int64_t lin = 0; lin < n; ++lin) {
        dst[static_cast<size_t>(ld)] += g[static_cast<size_t>(lin)];
        for (size_t d = r; d-- > 0;) {
            ++idx[d];
            ld += sd[d];
            if (idx[d] < out_shape[d]) break;
            ld -= sd[d] * out_shape[d];
            idx[d] = 0;
        }
    }
}

}  // namespace gk::detail
