#pragma once

// Brute-force shifted-window attention oracle: roll the grid, partition
// windows, then run plain softmax attention separately within each group of
// tokens that were adjacent before the shift. Mirrors the projection weights
// and relative position bias of the implementation exactly, without the
// additive-mask mechanism it validates.

#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

#include "graspkit/encoder.hpp"

namespace gktest {

inline gk::Tensor rand_tensor(gk::Shape shape, std::mt19937_64& rng, double lo = -1.0,
                              double hi = 1.0) {
    gk::Tensor t = gk::Tensor::zeros(std::move(shape));
    gk::fill_uniform(t, rng, lo, hi);
    return t;
}

inline gk::SwinBlockWeights random_block(int64_t c, int64_t m, int64_t heads,
                                         std::mt19937_64& rng) {
    gk::SwinBlockWeights w;
    w.ln1_g = gk::Tensor::full({c}, 1.0);
    w.ln1_b = gk::Tensor::zeros({c});
    w.wq = rand_tensor({c, c}, rng, -0.3, 0.3);
    w.bq = rand_tensor({c}, rng, -0.1, 0.1);
    w.wk = rand_tensor({c, c}, rng, -0.3, 0.3);
    w.bk = rand_tensor({c}, rng, -0.1, 0.1);
    w.wv = rand_tensor({c, c}, rng, -0.3, 0.3);
    w.bv = rand_tensor({c}, rng, -0.1, 0.1);
    w.proj_w = rand_tensor({c, c}, rng, -0.3, 0.3);
    w.proj_b = rand_tensor({c}, rng, -0.1, 0.1);
    w.bias_table = rand_tensor({(2 * m - 1) * (2 * m - 1), heads}, rng, -0.5, 0.5);
    w.ln2_g = gk::Tensor::full({c}, 1.0);
    w.ln2_b = gk::Tensor::zeros({c});
    const int64_t hid = 2 * c;
    w.mlp_w1 = rand_tensor({c, hid}, rng, -0.3, 0.3);
    w.mlp_b1 = rand_tensor({hid}, rng, -0.1, 0.1);
    w.mlp_w2 = rand_tensor({hid, c}, rng, -0.3, 0.3);
    w.mlp_b2 = rand_tensor({c}, rng, -0.1, 0.1);
    return w;
}

inline gk::Tensor grouped_attention_oracle(const gk::Tensor& tokens, int64_t g, int64_t m,
                                           int64_t shift, int64_t heads,
                                           const gk::SwinBlockWeights& w) {
    using gk::Tensor;
    const int64_t c = tokens.dim(1);
    const int64_t d = c / heads;
    const int64_t win = m * m;
    const int64_t nw = (g / m) * (g / m);

    auto linear = [&](const Tensor& x, const Tensor& wt, const Tensor& bt) {
        Tensor y = gk::matmul(x, wt);
        for (int64_t i = 0; i < y.dim(0); ++i)
            for (int64_t j = 0; j < c; ++j) y.at_mut({i, j}) += bt.data()[j];
        return y;
    };
    const Tensor q = linear(tokens, w.wq, w.bq);
    const Tensor k = linear(tokens, w.wk, w.bk);
    const Tensor v = linear(tokens, w.wv, w.bv);

    const auto roll = gk::cyclic_shift_indices(g, g, shift, shift);
    const auto part = gk::window_partition_indices(g, g, m);
    const auto rel = gk::relative_bias_indices(m);

    Tensor out = Tensor::zeros({g * g, c});
    for (int64_t wi = 0; wi < nw; ++wi) {
        std::vector<int64_t> tok(static_cast<size_t>(win));
        std::vector<int64_t> group(static_cast<size_t>(win));
        for (int64_t p = 0; p < win; ++p) {
            const int64_t shifted_pos = part[static_cast<size_t>(wi * win + p)];
            const int64_t orig = roll[static_cast<size_t>(shifted_pos)];
            tok[static_cast<size_t>(p)] = orig;
            const int64_t oi = orig / g, oj = orig % g;
            group[static_cast<size_t>(p)] = (oi < shift ? 2 : 0) + (oj < shift ? 1 : 0);
        }
        for (int64_t h = 0; h < heads; ++h)
            for (int64_t p = 0; p < win; ++p) {
                std::vector<int64_t> members;
                for (int64_t q2 = 0; q2 < win; ++q2)
                    if (group[static_cast<size_t>(q2)] == group[static_cast<size_t>(p)])
                        members.push_back(q2);
                std::vector<double> scores;
                for (int64_t q2 : members) {
                    double s = 0.0;
                    for (int64_t t = 0; t < d; ++t)
                        s += q.at({tok[static_cast<size_t>(p)], h * d + t}) *
                             k.at({tok[static_cast<size_t>(q2)], h * d + t});
                    s /= std::sqrt(static_cast<double>(d));
                    s += w.bias_table.at({rel[static_cast<size_t>(p * win + q2)], h});
                    scores.push_back(s);
                }
                double mx = scores[0];
                for (double s : scores) mx = std::max(mx, s);
                double z = 0.0;
                for (double& s : scores) {
                    s = std::exp(s - mx);
                    z += s;
                }
                for (size_t mi = 0; mi < members.size(); ++mi) {
                    const double a = scores[mi] / z;
                    for (int64_t t = 0; t < d; ++t)
                        out.at_mut({tok[static_cast<size_t>(p)], h * d + t}) +=
                            a * v.at({tok[static_cast<size_t>(members[mi])], h * d + t});
                }
            }
    }
    return linear(out, w.proj_w, w.proj_b);
}

}  // namespace gktest
