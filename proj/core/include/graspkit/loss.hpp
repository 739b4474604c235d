#pragma once

#include <cstdint>
#include <vector>

#include "graspkit/data.hpp"
#include "graspkit/decoder.hpp"
#include "graspkit/geom.hpp"
#include "graspkit/tensor.hpp"

namespace gk {

struct LossWeights {
    double box = 0.05;      // omega
    double angle = 0.25;    // beta
    double obj_class = 0.5; // lambda
    // Graspability BCE weight on positive cells; counters the one-positive-
    // per-grasp imbalance against the dense negatives.
    double graspability_pos_weight = 1.0;
};

/// Per-term training losses. `total` combines the three weighted terms; the
/// graspability binary cross-entropy is reported separately and added to the
/// optimized `objective`.
struct LossBreakdown {
    double grasp_box = 0.0;
    double angle = 0.0;
    double obj_class = 0.0;
    double graspability = 0.0;
    double total = 0.0;
    LossWeights weights;
    Tensor objective;  // tracked scalar when the map is on a tape
};

/// Complete-IoU between axis-aligned boxes, vectorized over [P, 1] columns:
/// 1 - IoU + rho^2/c^2 + alpha*nu, with nu the arctan aspect penalty and
/// alpha = nu / ((1 - IoU) + nu) treated as a constant during backward.
Tensor ciou_loss_aligned(const Tensor& px, const Tensor& py, const Tensor& pw, const Tensor& ph,
                         const Tensor& gx, const Tensor& gy, const Tensor& gw, const Tensor& gh);

/// CIoU of a predicted box against a ground-truth grasp, both rotated into
/// the ground truth's angle-free frame (the angle itself is supervised by
/// classification). pred.theta is ignored.
double ciou_loss(const GraspRect& pred, const GraspRect& gt);

/// Softmax cross-entropy against a one-hot target: -log softmax(logits)[gt].
Tensor cross_entropy_onehot(const Tensor& logits, int64_t gt_index);

/// Row-wise cross-entropy for [P, K] logits -> [P, 1] losses.
Tensor cross_entropy_rows(const Tensor& logits, const std::vector<int64_t>& gt);

/// Elementwise binary cross-entropy on logits: softplus(z) - z * y.
Tensor bce_with_logits(const Tensor& logits, const Tensor& targets);

/// The training objective over one dense map: CIoU + angle CE + category CE
/// averaged over positive cells (zero when there are none), graspability BCE
/// over all cells, combined per the configured weights.
LossBreakdown total_loss(const DenseGraspMap& map, const TargetMaps& targets,
                         const LossWeights& weights = {});

}  // namespace gk
