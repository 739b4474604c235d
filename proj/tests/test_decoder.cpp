#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "graspkit/data.hpp"
#include "graspkit/decoder.hpp"

using namespace gk;

namespace {

FeaturePyramid make_pyramid(int64_t base, std::mt19937_64* rng) {
    // strides 8/16/32 with channel doubling, stride-8 extent = base
    FeaturePyramid p;
    p.channels = {8, 16, 32};
    const int64_t exts[3] = {base, base / 2, base / 4};
    for (int i = 0; i < 3; ++i) {
        Tensor t = Tensor::zeros({p.channels[static_cast<size_t>(i)], exts[i], exts[i]});
        if (rng) fill_uniform(t, *rng, -1.0, 1.0);
        p.maps[static_cast<size_t>(i)] = t;
    }
    return p;
}

DenseGraspMap map_from_tensor(Tensor t, int64_t ka, int64_t ko, int64_t stride) {
    DenseGraspMap m;
    m.map = std::move(t);
    m.k_angle = ka;
    m.k_obj = ko;
    m.stride = stride;
    return m;
}

}  // namespace

TEST_CASE("fuse_scales") {
    DecoderConfig cfg;
    cfg.fusion_channels = 16;
    GraspDecoder dec(cfg, {8, 16, 32});

    SUBCASE("zero pyramid fuses to zero (linear path, zero bias)") {
        const FeaturePyramid p = make_pyramid(8, nullptr);
        const Tensor fused = dec.fuse_scales(p);
        CHECK(fused.shape() == Shape{1, 16, 8, 8});
        for (double v : fused.values()) CHECK(v == 0.0);
    }

    SUBCASE("stride-32 pixel perturbation touches exactly a 4x4 fused block") {
        std::mt19937_64 rng(1);
        GraspDecoder d2(cfg, {8, 16, 32});
        d2.init(rng);
        FeaturePyramid p = make_pyramid(8, &rng);
        const Tensor base = d2.fuse_scales(p);
        p.maps[2].at_mut({3, 1, 1}) += 1.0;
        const Tensor bumped = d2.fuse_scales(p);
        for (int64_t c = 0; c < 16; ++c)
            for (int64_t i = 0; i < 8; ++i)
                for (int64_t j = 0; j < 8; ++j) {
                    const double diff = std::abs(bumped.at({0, c, i, j}) - base.at({0, c, i, j}));
                    const bool in_block = i >= 4 && i < 8 && j >= 4 && j < 8;
                    if (!in_block) CHECK(diff == 0.0);
                }
        double total = 0.0;
        for (int64_t c = 0; c < 16; ++c)
            for (int64_t i = 4; i < 8; ++i)
                for (int64_t j = 4; j < 8; ++j)
                    total += std::abs(bumped.at({0, c, i, j}) - base.at({0, c, i, j}));
        CHECK(total > 0.0);
    }

    SUBCASE("fused extent is image/8 across configs") {
        for (int64_t base : {4, 8, 16}) {
            const FeaturePyramid p = make_pyramid(base, nullptr);
            CHECK(dec.fuse_scales(p).shape() == Shape{1, 16, base, base});
        }
    }
}

TEST_CASE("grasp_head layout and determinism") {
    DecoderConfig cfg;
    cfg.fusion_channels = 16;
    cfg.k_angle = 18;
    cfg.k_obj = 5;
    CHECK(cfg.map_channels() == 4 + 18 + 5 + 1);

    GraspDecoder dec(cfg, {8, 16, 32});
    SUBCASE("zero weights give zero logits, graspability probability 0.5") {
        const FeaturePyramid p = make_pyramid(8, nullptr);
        const DenseGraspMap m = dec.forward(p);
        CHECK(m.map.shape() == Shape{cfg.map_channels(), 8, 8});
        for (double v : m.map.values()) CHECK(v == 0.0);
        const auto cands = decode_candidates(m, 0.5);
        // sigmoid(0) = 0.5 meets the threshold everywhere
        CHECK(cands.size() == 64);
        for (const auto& c : cands) CHECK(c.score == doctest::Approx(0.5));
    }
    SUBCASE("repeated calls agree") {
        std::mt19937_64 rng(2);
        GraspDecoder d2(cfg, {8, 16, 32});
        d2.init(rng);
        const FeaturePyramid p = make_pyramid(8, &rng);
        const DenseGraspMap a = d2.forward(p);
        const DenseGraspMap b = d2.forward(p);
        CHECK(a.map.values() == b.map.values());
    }
}

TEST_CASE("decode_candidates formulas") {
    const int64_t ka = 18, ko = 4;
    const int64_t ch = 4 + ka + ko + 1;
    SUBCASE("all graspability logits -10 decode to an empty list") {
        Tensor t = Tensor::zeros({ch, 4, 4});
        for (int64_t i = 0; i < 16; ++i) t.data()[(ch - 1) * 16 + i] = -10.0;
        const auto cands = decode_candidates(map_from_tensor(t, ka, ko, 8), 0.5);
        CHECK(cands.empty());
    }
    SUBCASE("single cell with zero offsets decodes to the cell center") {
        Tensor t = Tensor::zeros({ch, 4, 4});
        for (int64_t i = 0; i < 16; ++i) t.data()[(ch - 1) * 16 + i] = -10.0;
        // cell (row 2, col 3)
        const int64_t off = 2 * 4 + 3;
        t.data()[(ch - 1) * 16 + off] = 10.0;
        t.data()[2 * 16 + off] = std::log(2.0);  // log-w
        const auto cands = decode_candidates(map_from_tensor(t, ka, ko, 8), 0.5);
        REQUIRE(cands.size() == 1);
        CHECK(cands[0].rect.x == doctest::Approx(28.0));
        CHECK(cands[0].rect.y == doctest::Approx(20.0));
        CHECK(cands[0].rect.w == doctest::Approx(16.0));  // exp(ln 2) * 8
        CHECK(cands[0].rect.h == doctest::Approx(8.0));
        CHECK(cands[0].angle_class == 0);
        CHECK(cands[0].rect.theta == doctest::Approx(5.0));  // center of bin 0
    }
    SUBCASE("candidate count is monotone non-increasing in the threshold") {
        std::mt19937_64 rng(3);
        Tensor t = Tensor::zeros({ch, 6, 6});
        fill_uniform(t, rng, -2.0, 2.0);
        const DenseGraspMap m = map_from_tensor(t, ka, ko, 8);
        size_t prev = decode_candidates(m, 0.0).size();
        for (double thr : {0.25, 0.5, 0.75, 0.9, 1.1}) {
            const size_t n = decode_candidates(m, thr).size();
            CHECK(n <= prev);
            prev = n;
        }
    }
    SUBCASE("results sorted by score descending") {
        std::mt19937_64 rng(4);
        Tensor t = Tensor::zeros({ch, 6, 6});
        fill_uniform(t, rng, -2.0, 2.0);
        const auto cands = decode_candidates(map_from_tensor(t, ka, ko, 8), 0.3);
        for (size_t i = 1; i < cands.size(); ++i) CHECK(cands[i - 1].score >= cands[i].score);
    }
}

TEST_CASE("nms_filter") {
    auto cand = [](double x, double y, double score, int cat = 0) {
        GraspCandidate c;
        c.rect = make_rect(x, y, 10, 6, 0, cat, score);
        c.score = score;
        return c;
    };
    SUBCASE("single candidate kept") {
        const auto out = nms_filter({cand(10, 10, 0.9)}, 0.25);
        CHECK(out.size() == 1);
    }
    SUBCASE("duplicate suppressed, best kept") {
        const auto out = nms_filter({cand(10, 10, 0.9), cand(10, 10, 0.8)}, 0.25);
        REQUIRE(out.size() == 1);
        CHECK(out[0].score == doctest::Approx(0.9));
    }
    SUBCASE("disjoint candidates both kept") {
        const auto out = nms_filter({cand(10, 10, 0.9), cand(100, 100, 0.8)}, 0.25);
        CHECK(out.size() == 2);
    }
    SUBCASE("category-aware mode only suppresses within a category") {
        const auto out =
            nms_filter({cand(10, 10, 0.9, 0), cand(10, 10, 0.8, 1), cand(10, 10, 0.7, 0)}, 0.25,
                       true);
        REQUIRE(out.size() == 2);
        CHECK(out[0].rect.category == 0);
        CHECK(out[1].rect.category == 1);
    }
    SUBCASE("output is a non-overlapping score-ordered subset of the input") {
        std::mt19937_64 rng(5);
        std::uniform_real_distribution<double> pos(0, 64), score(0, 1);
        std::vector<GraspCandidate> cands;
        for (int i = 0; i < 40; ++i) cands.push_back(cand(pos(rng), pos(rng), score(rng)));
        std::sort(cands.begin(), cands.end(),
                  [](const GraspCandidate& a, const GraspCandidate& b) { return a.score > b.score; });
        const auto out = nms_filter(cands, 0.25);
        CHECK(out.size() <= cands.size());
        for (size_t i = 1; i < out.size(); ++i) {
            CHECK(out[i - 1].score >= out[i].score);
            for (size_t j = 0; j < i; ++j) CHECK(jaccard(out[j].rect, out[i].rect) <= 0.25);
        }
    }
}

TEST_CASE("target build -> decode round trip recovers the grasp") {
    std::mt19937_64 rng(6);
    std::uniform_real_distribution<double> pos(6.0, 58.0), size(4.0, 16.0), ang(0.0, 180.0);
    const int64_t ka = 18, ko = 4, stride = 8;
    for (int rep = 0; rep < 50; ++rep) {
        LabeledScene scene;
        scene.image = Tensor::zeros({3, 64, 64});
        scene.grasps.push_back(
            make_rect(pos(rng), pos(rng), size(rng), size(rng), ang(rng), rep % 4));
        const TargetMaps t = build_targets(scene, stride, ka, ko);
        REQUIRE(t.cells.size() == 1);
        const DenseGraspMap m{targets_to_map(t, ka, ko), ka, ko, stride};
        const auto cands = decode_candidates(m, 0.5);
        REQUIRE(cands.size() == 1);
        const GraspRect& got = cands[0].rect;
        const GraspRect& want = scene.grasps[0];
        CHECK(std::abs(got.x - want.x) <= stride / 2.0);
        CHECK(std::abs(got.y - want.y) <= stride / 2.0);
        CHECK(std::abs(got.w / want.w - 1.0) <= 1e-6);
        CHECK(std::abs(got.h / want.h - 1.0) <= 1e-6);
        CHECK(cands[0].angle_class == bin_angle(want.theta, ka));
        CHECK(got.category == want.category);
    }
}
