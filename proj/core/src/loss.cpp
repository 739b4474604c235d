#include "graspkit/loss.hpp"

#include <cmath>
#include <stdexcept>

namespace gk {

namespace {
constexpr double kPi = 3.14159265358979323846;
}

Tensor ciou_loss_aligned(const Tensor& px, const Tensor& py, const Tensor& pw, const Tensor& ph,
                         const Tensor& gx, const Tensor& gy, const Tensor& gw, const Tensor& gh) {
    for (const Tensor* t : {&pw, &ph, &gw, &gh})
        for (double v : t->values())
            if (!(v > 0.0)) throw std::invalid_argument("ciou_loss: box sizes must be positive");

    const Tensor ph2 = mul_scalar(ph, 0.5), pw2 = mul_scalar(pw, 0.5);
    const Tensor gh2 = mul_scalar(gh, 0.5), gw2 = mul_scalar(gw, 0.5);
    const Tensor p_l = sub(px, pw2), p_r = add(px, pw2);
    const Tensor p_t = sub(py, ph2), p_b = add(py, ph2);
    const Tensor g_l = sub(gx, gw2), g_r = add(gx, gw2);
    const Tensor g_t = sub(gy, gh2), g_b = add(gy, gh2);

    const Tensor iw = relu(sub(minimum(p_r, g_r), maximum(p_l, g_l)));
    const Tensor ih = relu(sub(minimum(p_b, g_b), maximum(p_t, g_t)));
    const Tensor inter = mul(iw, ih);
    const Tensor uni = sub(add(mul(pw, ph), mul(gw, gh)), inter);
    const Tensor iou = div(inter, uni);

    const Tensor rho2 = add(square(sub(px, gx)), square(sub(py, gy)));
    const Tensor cw = sub(maximum(p_r, g_r), minimum(p_l, g_l));
    const Tensor chh = sub(maximum(p_b, g_b), minimum(p_t, g_t));
    const Tensor c2 = add(square(cw), square(chh));

    const Tensor nu = mul_scalar(square(sub(atan(div(gw, gh)), atan(div(pw, ph)))),
                                 4.0 / (kPi * kPi));

    // alpha = nu / ((1 - IoU) + nu), differentiated through with an epsilon
    // guard; the denominator vanishes only at the global minimum, where the
    // guard pins the alpha*nu gradient to zero.
    const Tensor alpha = div(nu, add_scalar(add(add_scalar(neg(iou), 1.0), nu), 1e-9));

    Tensor loss = add_scalar(neg(iou), 1.0);
    loss = add(loss, div(rho2, c2));
    loss = add(loss, mul(alpha, nu));
    return loss;
}

double ciou_loss(const GraspRect& pred, const GraspRect& gt) {
    validate_rect(pred);
    validate_rect(gt);
    // Rotate the predicted center into the ground truth's angle-free frame.
    const double rad = gt.theta * kPi / 180.0;
    const double cs = std::cos(rad), sn = std::sin(rad);
    const double dx = pred.x - gt.x, dy = pred.y - gt.y;
    const double rx = cs * dx + sn * dy;
    const double ry = -sn * dx + cs * dy;
    const Tensor loss = ciou_loss_aligned(
        Tensor::scalar(rx), Tensor::scalar(ry), Tensor::scalar(pred.w), Tensor::scalar(pred.h),
        Tensor::scalar(0.0), Tensor::scalar(0.0), Tensor::scalar(gt.w), Tensor::scalar(gt.h));
    return loss.item();
}

Tensor cross_entropy_onehot(const Tensor& logits, int64_t gt_index) {
    if (logits.rank() != 1 || logits.numel() < 2)
        throw std::invalid_argument("cross_entropy_onehot: expected [K] logits with K >= 2");
    if (gt_index < 0 || gt_index >= logits.numel())
        throw std::invalid_argument("cross_entropy_onehot: class index out of range");
    Tensor lp = log_softmax_lastdim(reshape(logits, {1, logits.numel()}));
    return neg(reshape(take_per_row(lp, {gt_index}), {1}));
}

Tensor cross_entropy_rows(const Tensor& logits, const std::vector<int64_t>& gt) {
    if (logits.rank() != 2) throw std::invalid_argument("cross_entropy_rows: expected [P, K]");
    return neg(take_per_row(log_softmax_lastdim(logits), gt));
}

Tensor bce_with_logits(const Tensor& logits, const Tensor& targets) {
    return sub(softplus(logits), mul(logits, targets));
}

LossBreakdown total_loss(const DenseGraspMap& map, const TargetMaps& targets,
                         const LossWeights& weights) {
    const int64_t ka = map.k_angle, ko = map.k_obj;
    const int64_t ch = 4 + ka + ko + 1;
    const int64_t h = map.grid_h(), w = map.grid_w();
    if (h != targets.grid_h || w != targets.grid_w || map.stride != targets.stride)
        throw std::invalid_argument("total_loss: map and targets are not aligned");

    // [ch, H, W] -> [H*W, ch] rows per cell
    const Tensor cells = transpose_last2(reshape(map.map, {ch, h * w}));

    // graspability over every cell, positives up-weighted per config
    Tensor y = Tensor::zeros({h * w, 1});
    Tensor cell_w = Tensor::full({h * w, 1}, 1.0);
    for (const auto& c : targets.cells) {
        y.at_mut({c.row * w + c.col, 0}) = 1.0;
        cell_w.at_mut({c.row * w + c.col, 0}) = weights.graspability_pos_weight;
    }
    const Tensor grasp_logits = slice_lastdim(cells, ch - 1, 1);
    const Tensor bce = mean_all(mul(bce_with_logits(grasp_logits, y), cell_w));

    LossBreakdown out;
    out.weights = weights;
    out.graspability = bce.item();

    if (targets.cells.empty()) {
        // degenerate batch: no positives, box/angle/class are zero by definition
        out.objective = bce;
        out.total = 0.0;
        return out;
    }

    const int64_t n = static_cast<int64_t>(targets.cells.size());
    std::vector<int64_t> pos_idx;
    std::vector<int64_t> angle_gt, cat_gt;
    std::vector<double> col_c(static_cast<size_t>(n)), row_c(static_cast<size_t>(n));
    std::vector<double> gx(static_cast<size_t>(n)), gy(static_cast<size_t>(n));
    std::vector<double> gw(static_cast<size_t>(n)), gh(static_cast<size_t>(n));
    std::vector<double> cs(static_cast<size_t>(n)), sn(static_cast<size_t>(n));
    for (int64_t i = 0; i < n; ++i) {
        const auto& c = targets.cells[static_cast<size_t>(i)];
        pos_idx.push_back(c.row * w + c.col);
        angle_gt.push_back(c.angle_bin);
        cat_gt.push_back(c.category);
        col_c[static_cast<size_t>(i)] = static_cast<double>(c.col) + 0.5;
        row_c[static_cast<size_t>(i)] = static_cast<double>(c.row) + 0.5;
        gx[static_cast<size_t>(i)] = c.gt.x;
        gy[static_cast<size_t>(i)] = c.gt.y;
        gw[static_cast<size_t>(i)] = c.gt.w;
        gh[static_cast<size_t>(i)] = c.gt.h;
        const double rad = c.gt.theta * kPi / 180.0;
        cs[static_cast<size_t>(i)] = std::cos(rad);
        sn[static_cast<size_t>(i)] = std::sin(rad);
    }
    const Tensor pos = gather_rows(cells, pos_idx);  // [n, ch]
    const double stride = static_cast<double>(map.stride);

    // decode centers/sizes in image pixels
    const Tensor px = mul_scalar(add(tanh(slice_lastdim(pos, 0, 1)),
                                     Tensor::from_data({n, 1}, col_c)), stride);
    const Tensor py = mul_scalar(add(tanh(slice_lastdim(pos, 1, 1)),
                                     Tensor::from_data({n, 1}, row_c)), stride);
    const Tensor pw = mul_scalar(exp(slice_lastdim(pos, 2, 1)), stride);
    const Tensor ph = mul_scalar(exp(slice_lastdim(pos, 3, 1)), stride);

    // rotate offsets into each ground truth's angle-free frame
    const Tensor tgx = Tensor::from_data({n, 1}, gx);
    const Tensor tgy = Tensor::from_data({n, 1}, gy);
    const Tensor tcs = Tensor::from_data({n, 1}, cs);
    const Tensor tsn = Tensor::from_data({n, 1}, sn);
    const Tensor dx = sub(px, tgx);
    const Tensor dy = sub(py, tgy);
    const Tensor rx = add(mul(tcs, dx), mul(tsn, dy));
    const Tensor ry = sub(mul(tcs, dy), mul(tsn, dx));
    const Tensor zero = Tensor::zeros({n, 1});

    const Tensor box = mean_all(ciou_loss_aligned(rx, ry, pw, ph, zero, zero,
                                                  Tensor::from_data({n, 1}, gw),
                                                  Tensor::from_data({n, 1}, gh)));
    const Tensor angle = mean_all(cross_entropy_rows(slice_lastdim(pos, 4, ka), angle_gt));
    const Tensor cls = mean_all(cross_entropy_rows(slice_lastdim(pos, 4 + ka, ko), cat_gt));

    out.grasp_box = box.item();
    out.angle = angle.item();
    out.obj_class = cls.item();
    out.total = weights.box * out.grasp_box + weights.angle * out.angle +
                weights.obj_class * out.obj_class;
    Tensor obj = mul_scalar(box, weights.box);
    obj = add(obj, mul_scalar(angle, weights.angle));
    obj = add(obj, mul_scalar(cls, weights.obj_class));
    out.objective = add(obj, bce);
    return out;
}

}  // namespace gk
