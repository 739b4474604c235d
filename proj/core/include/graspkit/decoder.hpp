#pragma once

#include <random>
#include <string>
#include <vector>

#include "graspkit/encoder.hpp"
#include "graspkit/geom.hpp"
#include "graspkit/tensor.hpp"

namespace gk {

struct DecoderConfig {
    int64_t fusion_channels = 64;
    int64_t k_angle = 18;
    int64_t k_obj = 4;

    void validate() const;
    /// dx, dy, log-w, log-h, angle logits, object logits, graspability.
    int64_t map_channels() const { return 4 + k_angle + k_obj + 1; }
};

/// Per-pixel head output on the stride-8 grid. Channel layout:
/// [dx, dy, log-w, log-h, angle logits (k_angle), object logits (k_obj),
/// graspability logit].
struct DenseGraspMap {
    Tensor map;  // [map_channels, H', W']
    int64_t k_angle = 0;
    int64_t k_obj = 0;
    int64_t stride = 8;

    int64_t grid_h() const { return map.dim(1); }
    int64_t grid_w() const { return map.dim(2); }
};

struct GraspCandidate {
    GraspRect rect;
    int64_t angle_class = 0;
    double score = 0.0;  // sigmoid of the graspability logit
};

/// Per-cell decode: centers at (col + 0.5 + tanh(dx)) * stride and the row
/// analogue, sizes exp(log-size) * stride, angle at the argmax bin center,
/// category by argmax. Cells below score_threshold are dropped; the result is
/// sorted by score descending.
std::vector<GraspCandidate> decode_candidates(const DenseGraspMap& map, double score_threshold);

/// Greedy non-maximum suppression on a score-sorted candidate list: keep the
/// best, drop later candidates overlapping a kept one above iou_threshold.
/// With category_aware set, suppression applies only within a category.
std::vector<GraspCandidate> nms_filter(const std::vector<GraspCandidate>& cands,
                                       double iou_threshold, bool category_aware = false);

/// Convolutional multi-scale fusion plus the pixel-level grasp head.
class GraspDecoder {
public:
    GraspDecoder(DecoderConfig cfg, const std::array<int64_t, 3>& pyramid_channels);

    void init(std::mt19937_64& rng);
    void collect_params(NamedParams& out, const std::string& prefix) const;

    /// Each scale is 1x1-convolved to the fusion width, upsampled to stride 8,
    /// and summed; the path is linear so a zero pyramid fuses to zero.
    Tensor fuse_scales(const FeaturePyramid& pyramid) const;

    /// Two 3x3 conv + gelu layers then a 1x1 conv to the map channel layout.
    Tensor head(const Tensor& fused) const;

    DenseGraspMap forward(const FeaturePyramid& pyramid) const;

    const DecoderConfig& config() const { return cfg_; }

private:
    DecoderConfig cfg_;
    std::array<Tensor, 3> lat_w_;
    std::array<Tensor, 3> lat_b_;
    Tensor head_w1_, head_b1_, head_w2_, head_b2_, head_w3_, head_b3_;
};

}  // namespace gk
