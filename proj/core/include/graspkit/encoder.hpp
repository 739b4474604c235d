#pragma once

#include <array>
#include <random>
#include <string>
#include <vector>

#include "graspkit/tensor.hpp"

namespace gk {

/// Hierarchical encoder hyperparameters. Four stages; the token grid halves
/// and channels double at each stage boundary. Stages whose grid is smaller
/// than `window` fall back to a grid-sized window with no shift.
struct EncoderConfig {
    int64_t image_size = 224;
    int64_t patch_size = 4;
    int64_t embed_dim = 32;
    std::array<int64_t, 4> depths{2, 2, 6, 2};
    std::array<int64_t, 4> num_heads{2, 4, 8, 16};
    int64_t window = 7;
    double mlp_ratio = 4.0;

    void validate() const;
    int64_t grid(int stage) const { return (image_size / patch_size) >> stage; }
    int64_t channels(int stage) const { return embed_dim << stage; }
    int64_t effective_window(int stage) const { return std::min(window, grid(stage)); }
    int64_t shift(int stage) const {
        const int64_t m = effective_window(stage);
        return m < grid(stage) && m > 1 ? m / 2 : 0;
    }
    int64_t num_tokens() const { return grid(0) * grid(0); }
};

/// Encoder output: feature maps [C, H, W] at strides {8, 16, 32} relative to
/// the input image, with channels doubling per scale.
struct FeaturePyramid {
    std::array<Tensor, 3> maps;
    std::array<int64_t, 3> strides{8, 16, 32};
    std::array<int64_t, 3> channels{0, 0, 0};
};

// ---- window bookkeeping (exposed for tests) ---------------------------------

/// Token order that groups each m x m window contiguously, windows row-major.
std::vector<int64_t> window_partition_indices(int64_t grid_h, int64_t grid_w, int64_t m);
std::vector<int64_t> inverse_permutation(const std::vector<int64_t>& p);
/// out token (i, j) = in token ((i + shift_r) mod H, (j + shift_c) mod W).
std::vector<int64_t> cyclic_shift_indices(int64_t grid_h, int64_t grid_w, int64_t shift_r,
                                          int64_t shift_c);
/// Flat [m^2 * m^2] lookup into the (2m-1)^2 relative-offset bias table for
/// every in-window token pair; pairs with equal (drow, dcol) share an entry.
std::vector<int64_t> relative_bias_indices(int64_t m);
/// Additive attention mask [nW, 1, m^2, m^2]: 0 within a group, -1e9 between
/// tokens originating from non-adjacent image regions after a cyclic shift.
Tensor shifted_window_mask(int64_t grid_h, int64_t grid_w, int64_t m, int64_t shift);

inline constexpr double kAttnMaskValue = -1e9;

// ---- learned pieces ----------------------------------------------------------

struct SwinBlockWeights {
    Tensor ln1_g, ln1_b;
    Tensor wq, bq, wk, bk, wv, bv;  // [C, C], [C]
    Tensor proj_w, proj_b;
    Tensor bias_table;  // [(2m-1)^2, heads]
    Tensor ln2_g, ln2_b;
    Tensor mlp_w1, mlp_b1, mlp_w2, mlp_b2;
};

struct PatchMergeWeights {
    Tensor ln_g, ln_b;  // [4C]
    Tensor w;           // [4C, 2C]
};

/// Q/K/V projection of Eq. 2 split per head: returns three [heads, N, C/heads]
/// tensors.
std::array<Tensor, 3> qkv_project(const Tensor& tokens, const Tensor& wq, const Tensor& bq,
                                  const Tensor& wk, const Tensor& bk, const Tensor& wv,
                                  const Tensor& bv, int64_t heads);

/// Scaled dot-product attention over window-partitioned heads:
/// softmax(QK^T / sqrt(d) + B [+ mask]) V with Q,K,V of [nW, heads, m^2, d],
/// bias [1, heads, m^2, m^2], optional mask [nW, 1, m^2, m^2].
Tensor window_attention(const Tensor& q, const Tensor& k, const Tensor& v, const Tensor& bias,
                        const Tensor& mask = Tensor());

/// (Shifted-)window multi-head attention over a [H*W, C] token grid: QKV
/// projection, per-window biased attention, masking when shift > 0, output
/// projection, grid reassembly. shift = 0 gives plain window attention.
Tensor grid_attention(const Tensor& tokens, int64_t grid_h, int64_t grid_w, int64_t m,
                      int64_t shift, int64_t heads, const SwinBlockWeights& w);

/// One Swin block on a [H*W, C] token grid: LN -> (shifted-)window attention
/// -> residual -> LN -> MLP -> residual. shift = 0 gives plain windows.
Tensor swin_block(const Tensor& tokens, int64_t grid_h, int64_t grid_w, int64_t m, int64_t shift,
                  int64_t heads, const SwinBlockWeights& w);

/// Concatenates each 2x2 token neighborhood and projects 4C -> 2C.
Tensor patch_merge(const Tensor& tokens, int64_t grid_h, int64_t grid_w,
                   const PatchMergeWeights& w);

/// Row-major patch flattening of an image [3, H, W] into [N, P*P*3]; the
/// image is treated as a constant (no gradient into pixels).
Tensor patchify(const Tensor& image, int64_t patch);

class SwinEncoder {
public:
    explicit SwinEncoder(EncoderConfig cfg);

    void init(std::mt19937_64& rng);
    void collect_params(NamedParams& out, const std::string& prefix) const;

    /// Linear patch embedding plus learned absolute position embedding.
    Tensor embed(const Tensor& image) const;

    FeaturePyramid forward(const Tensor& image) const;

    const EncoderConfig& config() const { return cfg_; }

private:
    EncoderConfig cfg_;
    Tensor patch_w_, patch_b_;  // [P*P*3, D], [D]
    Tensor pos_embed_;          // [N, D]
    Tensor embed_ln_g_, embed_ln_b_;
    std::array<std::vector<SwinBlockWeights>, 4> stages_;
    std::array<PatchMergeWeights, 3> merges_;
    // per-exported-scale norms keep the pyramid magnitudes comparable
    std::array<Tensor, 3> out_ln_g_, out_ln_b_;
};

}  // namespace gk
