#include "graspkit/encoder.hpp"

#include <cmath>
#include <stdexcept>

namespace gk {

void EncoderConfig::validate() const {
    if (image_size <= 0 || patch_size <= 0 || image_size % patch_size != 0)
        throw std::invalid_argument("EncoderConfig: image_size must be a positive multiple of "
                                    "patch_size");
    if (embed_dim <= 0) throw std::invalid_argument("EncoderConfig: embed_dim must be positive");
    if (window <= 0) throw std::invalid_argument("EncoderConfig: window must be positive");
    if (mlp_ratio <= 0) throw std::invalid_argument("EncoderConfig: mlp_ratio must be positive");
    for (int s = 0; s < 4; ++s) {
        if (depths[static_cast<size_t>(s)] < 1)
            throw std::invalid_argument("EncoderConfig: every stage needs at least one block");
        if (grid(s) < 1)
            throw std::invalid_argument("EncoderConfig: token grid vanishes at stage " +
                                        std::to_string(s + 1) + "; image too small");
        const int64_t m = effective_window(s);
        if (grid(s) % m != 0)
            throw std::invalid_argument("EncoderConfig: stage " + std::to_string(s + 1) +
                                        " grid " + std::to_string(grid(s)) +
                                        " not divisible by window " + std::to_string(m));
        if (channels(s) % num_heads[static_cast<size_t>(s)] != 0)
            throw std::invalid_argument("EncoderConfig: stage " + std::to_string(s + 1) +
                                        " channels not divisible by num_heads");
    }
}

// ---- window bookkeeping --------------------------------------------------------

std::vector<int64_t> window_partition_indices(int64_t grid_h, int64_t grid_w, int64_t m) {
    if (grid_h % m != 0 || grid_w % m != 0)
        throw std::invalid_argument("window_partition_indices: grid not divisible by window");
    std::vector<int64_t> idx;
    idx.reserve(static_cast<size_t>(grid_h * grid_w));
    for (int64_t wi = 0; wi < grid_h / m; ++wi)
        for (int64_t wj = 0; wj < grid_w / m; ++wj)
            for (int64_t r = 0; r < m; ++r)
                for (int64_t c = 0; c < m; ++c)
                    idx.push_back((wi * m + r) * grid_w + (wj * m + c));
    return idx;
}

std::vector<int64_t> inverse_permutation(const std::vector<int64_t>& p) {
    std::vector<int64_t> inv(p.size(), 0);
    for (size_t i = 0; i < p.size(); ++i) inv[static_cast<size_t>(p[i])] = static_cast<int64_t>(i);
    return inv;
}

std::vector<int64_t> cyclic_shift_indices(int64_t grid_h, int64_t grid_w, int64_t shift_r,
                                          int64_t shift_c) {
    auto wrap = [](int64_t v, int64_t n) { return ((v % n) + n) % n; };
    std::vector<int64_t> idx;
    idx.reserve(static_cast<size_t>(grid_h * grid_w));
    for (int64_t i = 0; i < grid_h; ++i)
        for (int64_t j = 0; j < grid_w; ++j)
            idx.push_back(wrap(i + shift_r, grid_h) * grid_w + wrap(j + shift_c, grid_w));
    return idx;
}

std::vector<int64_t> relative_bias_indices(int64_t m) {
    const int64_t span = 2 * m - 1;
    std::vector<int64_t> idx;
    idx.reserve(static_cast<size_t>(m * m * m * m));
    for (int64_t p = 0; p < m * m; ++p)
        for (int64_t q = 0; q < m * m; ++q) {
            const int64_t dr = p / m - q / m + m - 1;
            const int64_t dc = p % m - q % m + m - 1;
            idx.push_back(dr * span + dc);
        }
    return idx;
}

Tensor shifted_window_mask(int64_t grid_h, int64_t grid_w, int64_t m, int64_t shift) {
    if (shift <= 0 || shift >= m)
        throw std::invalid_argument("shifted_window_mask: shift must be in (0, window)");
    // Band ids on the unshifted grid; windows of this id grid have the same
    // group structure as the cyclically shifted feature windows.
    auto band = [&](int64_t i, int64_t n) {
        if (i < n - m) return 0;
        if (i < n - shift) return 1;
        return 2;
    };
    std::vector<int> id(static_cast<size_t>(grid_h * grid_w));
    for (int64_t i = 0; i < grid_h; ++i)
        for (int64_t j = 0; j < grid_w; ++j)
            id[static_cast<size_t>(i * grid_w + j)] = band(i, grid_h) * 3 + band(j, grid_w);

    const auto part = window_partition_indices(grid_h, grid_w, m);
    const int64_t win = m * m;
    const int64_t n_windows = grid_h * grid_w / win;
    Tensor mask = Tensor::zeros({n_windows, 1, win, win});
    double* pm = mask.data();
    for (int64_t w = 0; w < n_windows; ++w)
        for (int64_t p = 0; p < win; ++p)
            for (int64_t q = 0; q < win; ++q) {
                const int ip = id[static_cast<size_t>(part[static_cast<size_t>(w * win + p)])];
                const int iq = id[static_cast<size_t>(part[static_cast<size_t>(w * win + q)])];
                pm[(w * win + p) * win + q] = ip == iq ? 0.0 : kAttnMaskValue;
            }
    return mask;
}

// ---- attention pieces ------------------------------------------------------------

std::array<Tensor, 3> qkv_project(const Tensor& tokens, const Tensor& wq, const Tensor& bq,
                                  const Tensor& wk, const Tensor& bk, const Tensor& wv,
                                  const Tensor& bv, int64_t heads) {
    const int64_t n = tokens.dim(0);
    const int64_t c = tokens.dim(1);
    if (c % heads != 0)
        throw std::invalid_argument("qkv_project: channels not divisible by heads");
    const int64_t d = c / heads;
    auto proj = [&](const Tensor& w, const Tensor& b) {
        Tensor y = add(matmul(tokens, w), reshape(b, {1, c}));
        // [N, C] -> [N, heads, d] -> [heads, N, d]
        return permute(reshape(y, {n, heads, d}), {1, 0, 2});
    };
    return {proj(wq, bq), proj(wk, bk), proj(wv, bv)};
}

Tensor window_attention(const Tensor& q, const Tensor& k, const Tensor& v, const Tensor& bias,
                        const Tensor& mask) {
    const int64_t d = q.dim(-1);
    Tensor scores =
        mul_scalar(matmul(q, transpose_last2(k)), 1.0 / std::sqrt(static_cast<double>(d)));
    if (bias.defined()) scores = add(scores, bias);
    if (mask.defined()) scores = add(scores, mask);
    return matmul(softmax_lastdim(scores), v);
}

Tensor grid_attention(const Tensor& tokens, int64_t grid_h, int64_t grid_w, int64_t m,
                      int64_t shift, int64_t heads, const SwinBlockWeights& w) {
    const int64_t c = tokens.dim(1);
    const int64_t d = c / heads;
    const int64_t win = m * m;
    const int64_t n_windows = grid_h * grid_w / win;

    Tensor x = tokens;
    if (shift > 0) x = gather_rows(x, cyclic_shift_indices(grid_h, grid_w, shift, shift));
    const auto part = window_partition_indices(grid_h, grid_w, m);
    x = gather_rows(x, part);  // [nW*win, C] window-major

    auto project = [&](const Tensor& wt, const Tensor& bt) {
        Tensor y = add(matmul(x, wt), reshape(bt, {1, c}));
        // [nW*win, C] -> [nW, win, heads, d] -> [nW, heads, win, d]
        return permute(reshape(y, {n_windows, win, heads, d}), {0, 2, 1, 3});
    };
    const Tensor q = project(w.wq, w.bq);
    const Tensor k = project(w.wk, w.bk);
    const Tensor v = project(w.wv, w.bv);

    // Relative position bias, shared across windows: [1, heads, win, win].
    Tensor bias = gather_rows(w.bias_table, relative_bias_indices(m));  // [win*win, heads]
    bias = reshape(permute(reshape(bias, {win, win, heads}), {2, 0, 1}), {1, heads, win, win});

    Tensor mask;
    if (shift > 0) mask = shifted_window_mask(grid_h, grid_w, m, shift);

    Tensor attn = window_attention(q, k, v, bias, mask);  // [nW, heads, win, d]
    attn = reshape(permute(attn, {0, 2, 1, 3}), {n_windows * win, c});
    attn = add(matmul(attn, w.proj_w), reshape(w.proj_b, {1, c}));

    attn = gather_rows(attn, inverse_permutation(part));
    if (shift > 0)
        attn = gather_rows(attn, cyclic_shift_indices(grid_h, grid_w, -shift, -shift));
    return attn;
}

Tensor swin_block(const Tensor& tokens, int64_t grid_h, int64_t grid_w, int64_t m, int64_t shift,
                  int64_t heads, const SwinBlockWeights& w) {
    if (shift < 0 || shift >= m)
        throw std::invalid_argument("swin_block: shift must be in [0, window)");
    Tensor x = layer_norm(tokens, w.ln1_g, w.ln1_b);
    x = grid_attention(x, grid_h, grid_w, m, shift, heads, w);
    Tensor h = add(tokens, x);
    Tensor y = layer_norm(h, w.ln2_g, w.ln2_b);
    y = add(matmul(y, w.mlp_w1), reshape(w.mlp_b1, {1, w.mlp_b1.numel()}));
    y = gelu(y);
    y = add(matmul(y, w.mlp_w2), reshape(w.mlp_b2, {1, w.mlp_b2.numel()}));
    return add(h, y);
}

Tensor patch_merge(const Tensor& tokens, int64_t grid_h, int64_t grid_w,
                   const PatchMergeWeights& w) {
    if (grid_h % 2 != 0 || grid_w % 2 != 0)
        throw std::invalid_argument("patch_merge: grid extents must be even");
    const int64_t oh = grid_h / 2, ow = grid_w / 2;
    std::vector<int64_t> i00, i01, i10, i11;
    for (int64_t i = 0; i < oh; ++i)
        for (int64_t j = 0; j < ow; ++j) {
            i00.push_back((2 * i) * grid_w + 2 * j);
            i01.push_back((2 * i) * grid_w + 2 * j + 1);
            i10.push_back((2 * i + 1) * grid_w + 2 * j);
            i11.push_back((2 * i + 1) * grid_w + 2 * j + 1);
        }
    Tensor cat = concat({gather_rows(tokens, i00), gather_rows(tokens, i01),
                         gather_rows(tokens, i10), gather_rows(tokens, i11)},
                        1);
    cat = layer_norm(cat, w.ln_g, w.ln_b);
    return matmul(cat, w.w);
}

Tensor patchify(const Tensor& image, int64_t patch) {
    if (image.rank() != 3 || image.dim(0) != 3)
        throw std::invalid_argument("patchify: expected image [3, H, W]");
    const int64_t h = image.dim(1), w = image.dim(2);
    if (h % patch != 0 || w % patch != 0)
        throw std::invalid_argument("patchify: image extents not divisible by patch size");
    const int64_t gh = h / patch, gw = w / patch;
    const int64_t feat = patch * patch * 3;
    Tensor out = Tensor::zeros({gh * gw, feat});
    const double* px = image.data();
    double* po = out.data();
    for (int64_t gi = 0; gi < gh; ++gi)
        for (int64_t gj = 0; gj < gw; ++gj) {
            double* row = po + (gi * gw + gj) * feat;
            int64_t t = 0;
            for (int64_t c = 0; c < 3; ++c)
                for (int64_t r = 0; r < patch; ++r)
                    for (int64_t s = 0; s < patch; ++s)
                        row[t++] = px[(c * h + gi * patch + r) * w + gj * patch + s];
        }
    return out;
}

// ---- SwinEncoder ---------------------------------------------------------------

SwinEncoder::SwinEncoder(EncoderConfig cfg) : cfg_(cfg) {
    cfg_.validate();
    const int64_t feat = cfg_.patch_size * cfg_.patch_size * 3;
    patch_w_ = Tensor::zeros({feat, cfg_.embed_dim});
    patch_b_ = Tensor::zeros({cfg_.embed_dim});
    pos_embed_ = Tensor::zeros({cfg_.num_tokens(), cfg_.embed_dim});
    embed_ln_g_ = Tensor::full({cfg_.embed_dim}, 1.0);
    embed_ln_b_ = Tensor::zeros({cfg_.embed_dim});
    for (int s = 1; s < 4; ++s) {
        out_ln_g_[static_cast<size_t>(s - 1)] = Tensor::full({cfg_.channels(s)}, 1.0);
        out_ln_b_[static_cast<size_t>(s - 1)] = Tensor::zeros({cfg_.channels(s)});
    }
    for (int s = 0; s < 4; ++s) {
        const int64_t c = cfg_.channels(s);
        const int64_t m = cfg_.effective_window(s);
        const int64_t hidden =
            static_cast<int64_t>(std::llround(cfg_.mlp_ratio * static_cast<double>(c)));
        auto& blocks = stages_[static_cast<size_t>(s)];
        for (int64_t b = 0; b < cfg_.depths[static_cast<size_t>(s)]; ++b) {
            SwinBlockWeights w;
            w.ln1_g = Tensor::full({c}, 1.0);
            w.ln1_b = Tensor::zeros({c});
            w.wq = Tensor::zeros({c, c});
            w.bq = Tensor::zeros({c});
            w.wk = Tensor::zeros({c, c});
            w.bk = Tensor::zeros({c});
            w.wv = Tensor::zeros({c, c});
            w.bv = Tensor::zeros({c});
            w.proj_w = Tensor::zeros({c, c});
            w.proj_b = Tensor::zeros({c});
            w.bias_table = Tensor::zeros({(2 * m - 1) * (2 * m - 1),
                                          cfg_.num_heads[static_cast<size_t>(s)]});
            w.ln2_g = Tensor::full({c}, 1.0);
            w.ln2_b = Tensor::zeros({c});
            w.mlp_w1 = Tensor::zeros({c, hidden});
            w.mlp_b1 = Tensor::zeros({hidden});
            w.mlp_w2 = Tensor::zeros({hidden, c});
            w.mlp_b2 = Tensor::zeros({c});
            blocks.push_back(std::move(w));
        }
        if (s < 3) {
            auto& mw = merges_[static_cast<size_t>(s)];
            mw.ln_g = Tensor::full({4 * c}, 1.0);
            mw.ln_b = Tensor::zeros({4 * c});
            mw.w = Tensor::zeros({4 * c, 2 * c});
        }
    }
}

void SwinEncoder::init(std::mt19937_64& rng) {
    fill_trunc_normal(patch_w_, rng);
    fill_trunc_normal(pos_embed_, rng);
    for (auto& stage : stages_)
        for (auto& w : stage) {
            fill_trunc_normal(w.wq, rng);
            fill_trunc_normal(w.wk, rng);
            fill_trunc_normal(w.wv, rng);
            fill_trunc_normal(w.proj_w, rng);
            fill_trunc_normal(w.mlp_w1, rng);
            fill_trunc_normal(w.mlp_w2, rng);
        }
    for (auto& mw : merges_) fill_trunc_normal(mw.w, rng);
}

void SwinEncoder::collect_params(NamedParams& out, const std::string& prefix) const {
    out.emplace_back(prefix + ".patch.w", patch_w_);
    out.emplace_back(prefix + ".patch.b", patch_b_);
    out.emplace_back(prefix + ".pos_embed", pos_embed_);
    out.emplace_back(prefix + ".embed_ln.g", embed_ln_g_);
    out.emplace_back(prefix + ".embed_ln.b", embed_ln_b_);
    for (int i = 0; i < 3; ++i) {
        out.emplace_back(prefix + ".out_ln" + std::to_string(i) + ".g",
                         out_ln_g_[static_cast<size_t>(i)]);
        out.emplace_back(prefix + ".out_ln" + std::to_string(i) + ".b",
                         out_ln_b_[static_cast<size_t>(i)]);
    }
    for (int s = 0; s < 4; ++s) {
        const std::string sp = prefix + ".stage" + std::to_string(s);
        int b = 0;
        for (const auto& w : stages_[static_cast<size_t>(s)]) {
            const std::string bp = sp + ".block" + std::to_string(b++);
            out.emplace_back(bp + ".ln1.g", w.ln1_g);
            out.emplace_back(bp + ".ln1.b", w.ln1_b);
            out.emplace_back(bp + ".attn.wq", w.wq);
            out.emplace_back(bp + ".attn.bq", w.bq);
            out.emplace_back(bp + ".attn.wk", w.wk);
            out.emplace_back(bp + ".attn.bk", w.bk);
            out.emplace_back(bp + ".attn.wv", w.wv);
            out.emplace_back(bp + ".attn.bv", w.bv);
            out.emplace_back(bp + ".attn.proj.w", w.proj_w);
            out.emplace_back(bp + ".attn.proj.b", w.proj_b);
            out.emplace_back(bp + ".attn.bias_table", w.bias_table);
            out.emplace_back(bp + ".ln2.g", w.ln2_g);
            out.emplace_back(bp + ".ln2.b", w.ln2_b);
            out.emplace_back(bp + ".mlp.w1", w.mlp_w1);
            out.emplace_back(bp + ".mlp.b1", w.mlp_b1);
            out.emplace_back(bp + ".mlp.w2", w.mlp_w2);
            out.emplace_back(bp + ".mlp.b2", w.mlp_b2);
        }
        if (s < 3) {
            const auto& mw = merges_[static_cast<size_t>(s)];
            out.emplace_back(sp + ".merge.ln.g", mw.ln_g);
            out.emplace_back(sp + ".merge.ln.b", mw.ln_b);
            out.emplace_back(sp + ".merge.w", mw.w);
        }
    }
}

Tensor SwinEncoder::embed(const Tensor& image) const {
    if (image.dim(1) != cfg_.image_size || image.dim(2) != cfg_.image_size)
        throw std::invalid_argument("encoder: image extent does not match config image_size");
    Tensor tokens = matmul(patchify(image, cfg_.patch_size), patch_w_);
    tokens = add(tokens, reshape(patch_b_, {1, cfg_.embed_dim}));
    tokens = add(tokens, pos_embed_);
    return layer_norm(tokens, embed_ln_g_, embed_ln_b_);
}

FeaturePyramid SwinEncoder::forward(const Tensor& image) const {
    Tensor x = embed(image);
    FeaturePyramid pyr;
    for (int s = 0; s < 4; ++s) {
        const int64_t g = cfg_.grid(s);
        const int64_t m = cfg_.effective_window(s);
        const int64_t heads = cfg_.num_heads[static_cast<size_t>(s)];
        int b = 0;
        for (const auto& w : stages_[static_cast<size_t>(s)]) {
            const int64_t shift = (b % 2 == 1) ? cfg_.shift(s) : 0;
            x = swin_block(x, g, g, m, shift, heads, w);
            ++b;
        }
        if (s >= 1) {
            // Stages 2..4 export at strides 8/16/32 as [C, H, W] maps.
            const int64_t c = cfg_.channels(s);
            const Tensor normed = layer_norm(x, out_ln_g_[static_cast<size_t>(s - 1)],
                                             out_ln_b_[static_cast<size_t>(s - 1)]);
            pyr.maps[static_cast<size_t>(s - 1)] = reshape(transpose_last2(normed), {c, g, g});
            pyr.channels[static_cast<size_t>(s - 1)] = c;
        }
        if (s < 3) x = patch_merge(x, g, g, merges_[static_cast<size_t>(s)]);
    }
    return pyr;
}

}  // namespace gk
