#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "graspkit/loss.hpp"
#include "helpers/gradcheck.hpp"

using namespace gk;

namespace {
constexpr double kPi = 3.14159265358979323846;
}

TEST_CASE("ciou analytic fixtures") {
    SUBCASE("identical boxes give zero loss") {
        const GraspRect g = make_rect(10, 12, 8, 4, 30);
        CHECK(ciou_loss(g, g) == doctest::Approx(0.0).epsilon(1e-9));
    }
    SUBCASE("concentric half-size same-aspect boxes give 0.75") {
        const GraspRect gt = make_rect(0, 0, 8, 4, 0);
        const GraspRect pred = make_rect(0, 0, 4, 2, 0);
        // IoU = 0.25, rho = 0, nu = 0
        CHECK(ciou_loss(pred, gt) == doctest::Approx(0.75).epsilon(1e-9));
    }
    SUBCASE("nu fixture: (2,1) vs gt (1,2)") {
        const double nu = 4.0 / (kPi * kPi) *
                          std::pow(std::atan(1.0 / 2.0) - std::atan(2.0 / 1.0), 2);
        CHECK(nu == doctest::Approx(0.1678).epsilon(1e-3));
        // embed in the full loss: concentric boxes w=2,h=1 vs gt w=1,h=2
        const GraspRect gt = make_rect(0, 0, 1, 2, 0);
        const GraspRect pred = make_rect(0, 0, 2, 1, 0);
        // IoU = 1/3 on the 1x1 overlap of areas 2; alpha = nu/((1-IoU)+nu)
        const double iou = 1.0 / 3.0;
        const double alpha = nu / ((1.0 - iou) + nu);
        CHECK(ciou_loss(pred, gt) == doctest::Approx(1.0 - iou + alpha * nu).epsilon(1e-9));
    }
    SUBCASE("non-positive sizes rejected") {
        CHECK_THROWS_AS(ciou_loss(GraspRect{0, 0, -1, 1, 0}, make_rect(0, 0, 1, 1, 0)),
                        std::invalid_argument);
    }
}

TEST_CASE("ciou bounds and identity over random rects") {
    std::mt19937_64 rng(1);
    std::uniform_real_distribution<double> pos(-20, 20), size(0.5, 12), ang(0, 180);
    for (int i = 0; i < 300; ++i) {
        const GraspRect a = make_rect(pos(rng), pos(rng), size(rng), size(rng), ang(rng));
        const GraspRect b = make_rect(pos(rng), pos(rng), size(rng), size(rng), ang(rng));
        CHECK(ciou_loss(a, a) == doctest::Approx(0.0).epsilon(1e-9));
        const double l = ciou_loss(a, b);
        CHECK(l >= 0.0);
        CHECK(l < 3.0);
    }
}

TEST_CASE("ciou strictly increases with center displacement along a ray") {
    const GraspRect gt = make_rect(0, 0, 10, 6, 0);
    double prev = -1.0;
    for (int k = 0; k < 10; ++k) {
        const double r = 0.5 * static_cast<double>(k);
        const GraspRect pred = make_rect(r * 0.8, r * 0.6, 10, 6, 0);
        const double l = ciou_loss(pred, gt);
        CHECK(l > prev);
        prev = l;
    }
}

TEST_CASE("ciou gradient wrt pred box matches finite differences") {
    std::mt19937_64 rng(2);
    std::uniform_real_distribution<double> off(-1.5, 1.5), size(4.0, 8.0);
    int checked = 0;
    while (checked < 5) {
        const double gw = size(rng), gh = size(rng);
        std::vector<Tensor> leaves{Tensor::scalar(off(rng)), Tensor::scalar(off(rng)),
                                   Tensor::scalar(size(rng)), Tensor::scalar(size(rng))};
        auto fwd = [&](Tape&) {
            return ciou_loss_aligned(reshape(leaves[0], {1, 1}), reshape(leaves[1], {1, 1}),
                                     reshape(leaves[2], {1, 1}), reshape(leaves[3], {1, 1}),
                                     Tensor::zeros({1, 1}), Tensor::zeros({1, 1}),
                                     Tensor::full({1, 1}, gw), Tensor::full({1, 1}, gh));
        };
        // keep test points away from the IoU-nonsmooth boundary: IoU in (0.05, 0.95)
        const double px = leaves[0].item(), py = leaves[1].item();
        const double pw = leaves[2].item(), ph = leaves[3].item();
        const double iw = std::max(0.0, std::min(px + pw / 2, gw / 2) - std::max(px - pw / 2, -gw / 2));
        const double ih = std::max(0.0, std::min(py + ph / 2, gh / 2) - std::max(py - ph / 2, -gh / 2));
        const double iou = iw * ih / (pw * ph + gw * gh - iw * ih);
        if (iou < 0.05 || iou > 0.95) continue;
        auto res = gktest::grad_check(leaves, fwd);
        CHECK_MESSAGE(res.ok(1e-4), res.worst);
        ++checked;
    }
}

TEST_CASE("cross_entropy_onehot") {
    SUBCASE("confident correct logits give ~0") {
        const double ce = cross_entropy_onehot(Tensor::from_data({2}, {10, -10}), 0).item();
        CHECK(ce <= 1e-8 + 2e-9);
        CHECK(ce >= 0.0);
    }
    SUBCASE("uniform logits give ln K") {
        for (int64_t k : {2, 5, 9}) {
            const double ce = cross_entropy_onehot(Tensor::zeros({k}), 1).item();
            CHECK(ce == doctest::Approx(std::log(static_cast<double>(k))).epsilon(1e-12));
        }
    }
    SUBCASE("two zero logits, gt 1 gives ln 2") {
        CHECK(cross_entropy_onehot(Tensor::from_data({2}, {0, 0}), 1).item() ==
              doctest::Approx(std::log(2.0)).epsilon(1e-12));
    }
    SUBCASE("index out of range rejected") {
        CHECK_THROWS_AS(cross_entropy_onehot(Tensor::zeros({3}), 3), std::invalid_argument);
    }
    SUBCASE("matches the direct -log softmax oracle within 1e-12") {
        std::mt19937_64 rng(3);
        for (int rep = 0; rep < 50; ++rep) {
            Tensor logits = Tensor::zeros({7});
            fill_uniform(logits, rng, -4, 4);
            const int64_t gt = static_cast<int64_t>(rng() % 7);
            double mx = logits.data()[0];
            for (int64_t i = 1; i < 7; ++i) mx = std::max(mx, logits.data()[i]);
            double z = 0.0;
            for (int64_t i = 0; i < 7; ++i) z += std::exp(logits.data()[i] - mx);
            const double want = -(logits.data()[gt] - mx - std::log(z));
            CHECK(cross_entropy_onehot(logits, gt).item() == doctest::Approx(want).epsilon(1e-12));
        }
    }
    SUBCASE("gradient matches finite differences") {
        std::mt19937_64 rng(4);
        for (int rep = 0; rep < 5; ++rep) {
            std::vector<Tensor> leaves{Tensor::zeros({6})};
            fill_uniform(leaves[0], rng, -2, 2);
            auto res = gktest::grad_check(leaves, [&](Tape&) {
                return cross_entropy_onehot(leaves[0], 2);
            });
            CHECK_MESSAGE(res.ok(1e-4), res.worst);
        }
    }
}

TEST_CASE("total_loss") {
    const int64_t ka = 18, ko = 4, stride = 8;

    auto scene_with = [&](std::vector<GraspRect> grasps) {
        LabeledScene s;
        s.image = Tensor::zeros({3, 32, 32});
        s.grasps = std::move(grasps);
        return s;
    };

    SUBCASE("perfect predictions at every positive cell give ~0 box/angle/class") {
        const LabeledScene scene = scene_with({make_rect(12, 20, 8, 6, 42, 2),
                                               make_rect(26, 6, 10, 4, 140, 1)});
        const TargetMaps t = build_targets(scene, stride, ka, ko);
        const DenseGraspMap m{targets_to_map(t, ka, ko), ka, ko, stride};
        const LossBreakdown lb = total_loss(m, t);
        CHECK(lb.grasp_box == doctest::Approx(0.0).epsilon(1e-6));
        CHECK(lb.angle < 1e-6);
        CHECK(lb.obj_class < 1e-6);
        CHECK(lb.total < 1e-6);
        CHECK(lb.graspability < 1e-4);  // saturated +-12 logits
    }

    SUBCASE("zero weights zero the total regardless of predictions") {
        const LabeledScene scene = scene_with({make_rect(12, 20, 8, 6, 42, 2)});
        const TargetMaps t = build_targets(scene, stride, ka, ko);
        std::mt19937_64 rng(5);
        Tensor raw = Tensor::zeros({4 + ka + ko + 1, 4, 4});
        fill_uniform(raw, rng, -1, 1);
        const DenseGraspMap m{raw, ka, ko, stride};
        const LossBreakdown lb = total_loss(m, t, LossWeights{0, 0, 0});
        CHECK(lb.total == 0.0);
        CHECK(lb.grasp_box > 0.0);
    }

    SUBCASE("single positive cell combines exactly as 0.05 box + 0.25 angle + 0.5 class") {
        const LabeledScene scene = scene_with({make_rect(12, 20, 8, 6, 42, 2)});
        const TargetMaps t = build_targets(scene, stride, ka, ko);
        std::mt19937_64 rng(6);
        Tensor raw = Tensor::zeros({4 + ka + ko + 1, 4, 4});
        fill_uniform(raw, rng, -1, 1);
        const DenseGraspMap m{raw, ka, ko, stride};
        const LossBreakdown lb = total_loss(m, t);
        CHECK(lb.total == 0.05 * lb.grasp_box + 0.25 * lb.angle + 0.5 * lb.obj_class);
        // linearity in each weight: doubling omega doubles the box share
        const LossBreakdown lb2 = total_loss(m, t, LossWeights{0.10, 0.25, 0.5});
        CHECK(lb2.total - lb.total == doctest::Approx(0.05 * lb.grasp_box).epsilon(1e-12));
    }

    SUBCASE("no positive cells: box/angle/class are zero by definition") {
        const LabeledScene scene = scene_with({});
        const TargetMaps t = build_targets(scene, stride, ka, ko);
        const DenseGraspMap m{Tensor::zeros({4 + ka + ko + 1, 4, 4}), ka, ko, stride};
        const LossBreakdown lb = total_loss(m, t);
        CHECK(lb.grasp_box == 0.0);
        CHECK(lb.angle == 0.0);
        CHECK(lb.obj_class == 0.0);
        CHECK(lb.total == 0.0);
        CHECK(lb.graspability == doctest::Approx(std::log1p(std::exp(0.0))).epsilon(1e-12));
    }

    SUBCASE("objective gradient flows through the dense map") {
        const LabeledScene scene = scene_with({make_rect(12, 20, 8, 6, 42, 2)});
        const TargetMaps t = build_targets(scene, stride, ka, ko);
        std::mt19937_64 rng(7);
        std::vector<Tensor> leaves{Tensor::zeros({4 + ka + ko + 1, 4, 4})};
        fill_uniform(leaves[0], rng, -0.5, 0.5);
        auto res = gktest::grad_check(leaves, [&](Tape&) {
            const DenseGraspMap m{leaves[0], ka, ko, stride};
            return total_loss(m, t).objective;
        });
        CHECK_MESSAGE(res.ok(1e-4), res.worst);
    }
}
