#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <random>
#include <set>

#include "graspkit/data.hpp"
#include "graspkit/error.hpp"
#include "graspkit/image.hpp"

using namespace gk;

TEST_CASE("parse_cornell_rect_file") {
    SUBCASE("axis-aligned 20x10 rect at (50,50)") {
        const std::string text =
            "40 45\n"
            "60 45\n"
            "60 55\n"
            "40 55\n";
        const CornellParse p = parse_cornell_rect_file(text);
        REQUIRE(p.grasps.size() == 1);
        CHECK(p.skipped == 0);
        const GraspRect& g = p.grasps[0];
        CHECK(g.x == doctest::Approx(50.0));
        CHECK(g.y == doctest::Approx(50.0));
        CHECK(g.w == doctest::Approx(20.0));
        CHECK(g.h == doctest::Approx(10.0));
        CHECK(angle_diff_deg(g.theta, 0.0) < 1e-9);
    }
    SUBCASE("same text parses identically twice") {
        std::mt19937_64 rng(1);
        std::uniform_real_distribution<double> pos(30, 200), size(5, 40), ang(0, 180);
        std::vector<GraspRect> gs;
        for (int i = 0; i < 8; ++i)
            gs.push_back(make_rect(pos(rng), pos(rng), size(rng), size(rng), ang(rng)));
        const std::string text = cornell_serialize(gs);
        const CornellParse a = parse_cornell_rect_file(text);
        const CornellParse b = parse_cornell_rect_file(text);
        REQUIRE(a.grasps.size() == b.grasps.size());
        for (size_t i = 0; i < a.grasps.size(); ++i) {
            CHECK(a.grasps[i].x == b.grasps[i].x);
            CHECK(a.grasps[i].theta == b.grasps[i].theta);
        }
    }
    SUBCASE("empty file gives empty list") {
        const CornellParse p = parse_cornell_rect_file("");
        CHECK(p.grasps.empty());
        CHECK(p.skipped == 0);
    }
    SUBCASE("NaN vertices skip the grasp with a warning count") {
        const std::string text =
            "40 45\nNaN NaN\n60 55\n40 55\n"
            "10 10\n20 10\n20 20\n10 20\n";
        const CornellParse p = parse_cornell_rect_file(text);
        CHECK(p.grasps.size() == 1);
        CHECK(p.skipped == 1);
    }
    SUBCASE("trailing partial rectangle counts as skipped") {
        const CornellParse p = parse_cornell_rect_file("1 1\n2 1\n");
        CHECK(p.grasps.empty());
        CHECK(p.skipped == 1);
    }
}

TEST_CASE("cornell round trip within 0.5 px / 0.5 deg") {
    std::mt19937_64 rng(2);
    std::uniform_real_distribution<double> pos(30, 200), size(5, 40), ang(0, 180);
    for (int i = 0; i < 200; ++i) {
        const GraspRect g = make_rect(pos(rng), pos(rng), size(rng), size(rng), ang(rng));
        const CornellParse p = parse_cornell_rect_file(cornell_serialize({g}));
        REQUIRE(p.grasps.size() == 1);
        const GraspRect& r = p.grasps[0];
        CHECK(std::abs(r.x - g.x) < 0.5);
        CHECK(std::abs(r.y - g.y) < 0.5);
        CHECK(std::abs(r.w - g.w) < 0.5);
        CHECK(std::abs(r.h - g.h) < 0.5);
        CHECK(angle_diff_deg(r.theta, g.theta) < 0.5);
    }
}

TEST_CASE("parse_scene_record") {
    SUBCASE("minimal one-grasp record") {
        const SceneRecord r = parse_scene_record(
            R"({"image_path":"imgs/a.png","grasps":[{"x":10,"y":20,"w":5,"h":3,"theta":45,"category":1}]})");
        CHECK(r.image_path == "imgs/a.png");
        CHECK(r.source_id == "a");
        REQUIRE(r.grasps.size() == 1);
        CHECK(r.grasps[0].category == 1);
    }
    SUBCASE("theta 270 normalizes to 90") {
        const SceneRecord r = parse_scene_record(
            R"({"image_path":"b.png","grasps":[{"x":1,"y":1,"w":2,"h":2,"theta":270}]})");
        CHECK(r.grasps[0].theta == doctest::Approx(90.0));
    }
    SUBCASE("non-positive w rejected naming the field") {
        CHECK_THROWS_WITH_AS(
            parse_scene_record(R"({"image_path":"c.png","grasps":[{"x":1,"y":1,"w":0,"h":2,"theta":0}]})"),
            doctest::Contains("'w'"), DataError);
    }
    SUBCASE("category out of range rejected when k_obj given") {
        CHECK_THROWS_AS(
            parse_scene_record(
                R"({"image_path":"d.png","grasps":[{"x":1,"y":1,"w":2,"h":2,"theta":0,"category":7}]})",
                4),
            DataError);
    }
    SUBCASE("missing image_path rejected") {
        CHECK_THROWS_AS(parse_scene_record(R"({"grasps":[]})"), DataError);
    }
    SUBCASE("record json round trip") {
        SceneRecord r;
        r.image_path = "x.png";
        r.source_id = "x";
        r.grasps.push_back(make_rect(3, 4, 5, 6, 70, 2));
        const SceneRecord back = parse_scene_record(scene_record_to_json(r));
        CHECK(back.image_path == r.image_path);
        CHECK(back.grasps[0].theta == doctest::Approx(70.0));
        CHECK(back.grasps[0].category == 2);
    }
}

TEST_CASE("synth_scene") {
    SUBCASE("deterministic per seed") {
        const LabeledScene a = synth_scene(42, 2, 64);
        const LabeledScene b = synth_scene(42, 2, 64);
        CHECK(a.image.values() == b.image.values());
        REQUIRE(a.grasps.size() == b.grasps.size());
        for (size_t i = 0; i < a.grasps.size(); ++i) {
            CHECK(a.grasps[i].x == b.grasps[i].x);
            CHECK(a.grasps[i].theta == b.grasps[i].theta);
        }
    }
    SUBCASE("one object yields one grasp") {
        const LabeledScene s = synth_scene(7, 1, 64);
        CHECK(s.grasps.size() == 1);
        CHECK(s.image.shape() == Shape{3, 64, 64});
    }
    SUBCASE("grasp overlaps its object-aligned oracle rect") {
        for (uint64_t seed = 0; seed < 30; ++seed) {
            const LabeledScene s = synth_scene(seed, 1, 96);
            REQUIRE(s.grasps.size() == 1);
            const GraspRect& g = s.grasps[0];
            // oracle: the object's own bounding rect in grasp convention, built
            // from the generator's parameterization (w = 2.6 b, h = 1.4 a)
            const GraspRect obj = make_rect(g.x, g.y, g.w / 2.6 * 2.0, g.h / 1.4 * 2.0, g.theta);
            CHECK(jaccard(g, obj) >= 0.5);
        }
    }
    SUBCASE("distinct seeds give distinct images") {
        std::set<size_t> hashes;
        for (uint64_t seed = 0; seed < 100; ++seed) {
            const LabeledScene s = synth_scene(seed, 2, 48);
            size_t h = 1469598103934665603ull;
            for (double v : s.image.values()) {
                uint64_t bits;
                std::memcpy(&bits, &v, 8);
                h = (h ^ bits) * 1099511628211ull;
            }
            hashes.insert(h);
        }
        CHECK(hashes.size() == 100);
    }
    SUBCASE("categories stay inside the synth palette") {
        const LabeledScene s = synth_scene(11, 4, 96);
        for (const GraspRect& g : s.grasps) {
            CHECK(g.category >= 0);
            CHECK(g.category < kSynthCategories);
        }
    }
}

TEST_CASE("resize_to_input") {
    SUBCASE("same size is the identity, labels exact") {
        const LabeledScene s = synth_scene(3, 1, 64);
        const LabeledScene r = resize_to_input(s, 64);
        CHECK(r.image.values() == s.image.values());
        CHECK(r.grasps[0].x == doctest::Approx(s.grasps[0].x).epsilon(1e-12));
        CHECK(r.grasps[0].theta == doctest::Approx(s.grasps[0].theta).epsilon(1e-12));
    }
    SUBCASE("isotropic halving scales centers and sizes, theta unchanged") {
        LabeledScene s;
        s.image = Tensor::zeros({3, 448, 448});
        s.grasps.push_back(make_rect(100, 200, 40, 20, 30));
        const LabeledScene r = resize_to_input(s, 224);
        CHECK(r.image.shape() == Shape{3, 224, 224});
        const GraspRect& g = r.grasps[0];
        CHECK(g.x == doctest::Approx(50.0).epsilon(1e-9));
        CHECK(g.y == doctest::Approx(100.0).epsilon(1e-9));
        CHECK(g.w == doctest::Approx(20.0).epsilon(1e-9));
        CHECK(g.h == doctest::Approx(10.0).epsilon(1e-9));
        CHECK(angle_diff_deg(g.theta, 30.0) < 1e-9);
    }
    SUBCASE("anisotropic scaling: refit rect tracks the transformed vertices") {
        LabeledScene s;
        s.image = Tensor::zeros({3, 224, 448});  // H=224, W=448 -> scales (0.5, 1)
        const GraspRect g0 = make_rect(200, 100, 2, 2, 45);
        s.grasps.push_back(g0);
        const LabeledScene r = resize_to_input(s, 224);
        Quad want = rect_to_quad(g0);
        for (Vec2& v : want) v.x *= 0.5;  // x scaled, y unchanged
        const Quad got = rect_to_quad(r.grasps[0]);
        // match vertices in the best cyclic pairing
        double best = 1e18;
        for (int off = 0; off < 4; ++off) {
            double worst = 0.0;
            for (int i = 0; i < 4; ++i) {
                const Vec2 d = got[static_cast<size_t>((i + off) % 4)] - want[static_cast<size_t>(i)];
                worst = std::max(worst, std::hypot(d.x, d.y));
            }
            best = std::min(best, worst);
        }
        CHECK(best < 0.5);
    }
}

TEST_CASE("rotate_augment") {
    SUBCASE("k=0 is the identity") {
        const LabeledScene s = synth_scene(5, 2, 64);
        const LabeledScene r = rotate_augment(s, 0);
        CHECK(r.image.values() == s.image.values());
        CHECK(r.grasps.size() == s.grasps.size());
        CHECK(r.grasps[0].x == doctest::Approx(s.grasps[0].x).epsilon(1e-12));
    }
    SUBCASE("k=9 (180 degrees) maps centers to (W-x, H-y), theta unchanged") {
        const LabeledScene s = synth_scene(6, 2, 64);
        const LabeledScene r = rotate_augment(s, 9);
        REQUIRE(r.grasps.size() == s.grasps.size());
        for (size_t i = 0; i < s.grasps.size(); ++i) {
            CHECK(r.grasps[i].x == doctest::Approx(64.0 - s.grasps[i].x).epsilon(1e-9));
            CHECK(r.grasps[i].y == doctest::Approx(64.0 - s.grasps[i].y).epsilon(1e-9));
            CHECK(angle_diff_deg(r.grasps[i].theta, s.grasps[i].theta) < 1e-9);
        }
    }
    SUBCASE("eighteen successive label rotations return to the original pose") {
        std::mt19937_64 rng(7);
        std::uniform_real_distribution<double> pos(20, 44), size(4, 10), ang(0, 180);
        for (int rep = 0; rep < 50; ++rep) {
            const GraspRect g0 = make_rect(pos(rng), pos(rng), size(rng), size(rng), ang(rng), 1);
            GraspRect g = g0;
            bool alive = true;
            for (int k = 0; k < kNumRotations; ++k) {
                auto r = rotate_grasp_label(g, 1, 64, 64);
                if (!r) {
                    alive = false;
                    break;
                }
                g = *r;
            }
            REQUIRE(alive);
            CHECK(std::abs(g.x - g0.x) < 1e-6);
            CHECK(std::abs(g.y - g0.y) < 1e-6);
            CHECK(angle_diff_deg(g.theta, g0.theta) < 1e-6);
            CHECK(g.w == g0.w);
            CHECK(g.h == g0.h);
        }
    }
    SUBCASE("grasp count preserved when centers stay well inside") {
        // centers at least w+h from the border survive every rotation
        LabeledScene s;
        s.image = Tensor::zeros({3, 64, 64});
        s.grasps.push_back(make_rect(30, 32, 6, 4, 10));
        s.grasps.push_back(make_rect(36, 30, 5, 5, 100));
        for (int k = 0; k < kNumRotations; ++k)
            CHECK(rotate_augment(s, k).grasps.size() == s.grasps.size());
    }
    SUBCASE("centers leaving the frame are dropped") {
        LabeledScene s;
        s.image = Tensor::zeros({3, 64, 64});
        s.grasps.push_back(make_rect(62, 2, 4, 3, 0));  // near the corner
        size_t smallest = 99;
        for (int k = 0; k < kNumRotations; ++k)
            smallest = std::min(smallest, rotate_augment(s, k).grasps.size());
        CHECK(smallest == 0);  // 45-degree-ish rotations push the corner out
    }
}

TEST_CASE("bin_angle") {
    CHECK(bin_angle(5.0, 18) == 0);
    CHECK(bin_angle(179.9, 18) == 17);
    CHECK(bin_angle(180.0, 18) == bin_angle(0.0, 18));
    std::mt19937_64 rng(8);
    std::uniform_real_distribution<double> ang(-360, 360);
    for (int i = 0; i < 300; ++i) {
        const double t = ang(rng);
        const int64_t b = bin_angle(t, 18);
        CHECK(b >= 0);
        CHECK(b < 18);
        CHECK(angle_diff_deg(t, bin_center_deg(b, 18)) <= 90.0 / 18.0 + 1e-9);
    }
}

TEST_CASE("build_targets") {
    SUBCASE("grasp at (28, 20) with stride 8 marks cell (2, 3)") {
        LabeledScene s;
        s.image = Tensor::zeros({3, 64, 64});
        s.grasps.push_back(make_rect(28, 20, 8, 6, 40, 1));
        const TargetMaps t = build_targets(s, 8, 18, 4);
        REQUIRE(t.cells.size() == 1);
        CHECK(t.cells[0].row == 2);
        CHECK(t.cells[0].col == 3);
        CHECK(t.is_positive(2, 3));
        CHECK_FALSE(t.is_positive(2, 2));
    }
    SUBCASE("empty scene gives all-negative maps") {
        LabeledScene s;
        s.image = Tensor::zeros({3, 64, 64});
        const TargetMaps t = build_targets(s, 8, 18, 4);
        CHECK(t.cells.empty());
        CHECK(t.collisions == 0);
    }
    SUBCASE("colliding centers keep the larger grasp and count the collision") {
        LabeledScene s;
        s.image = Tensor::zeros({3, 64, 64});
        s.grasps.push_back(make_rect(26, 18, 4, 4, 0, 0));
        s.grasps.push_back(make_rect(28, 20, 10, 8, 90, 1));  // same cell, larger
        const TargetMaps t = build_targets(s, 8, 18, 4);
        REQUIRE(t.cells.size() == 1);
        CHECK(t.collisions == 1);
        CHECK(t.cells[0].category == 1);
        CHECK(t.cells[0].gt.w == doctest::Approx(10.0));
    }
}

TEST_CASE("image io round trips") {
    std::mt19937_64 rng(9);
    ImageU8 img;
    img.width = 17;
    img.height = 13;
    img.rgb.resize(17 * 13 * 3);
    for (auto& b : img.rgb) b = static_cast<uint8_t>(rng() % 256);

    SUBCASE("ppm") {
        save_ppm("t_io.ppm", img);
        const ImageU8 back = load_image("t_io.ppm");
        CHECK(back.width == img.width);
        CHECK(back.height == img.height);
        CHECK(back.rgb == img.rgb);
        std::remove("t_io.ppm");
    }
    SUBCASE("png") {
        save_png("t_io.png", img);
        const ImageU8 back = load_image("t_io.png");
        CHECK(back.width == img.width);
        CHECK(back.height == img.height);
        CHECK(back.rgb == img.rgb);
        std::remove("t_io.png");
    }
    SUBCASE("tensor conversion round trip") {
        const Tensor t = image_to_tensor(img);
        CHECK(t.shape() == Shape{3, 13, 17});
        const ImageU8 back = tensor_to_image(t);
        CHECK(back.rgb == img.rgb);
    }
}

TEST_CASE("scene file io") {
    std::vector<SceneRecord> recs(2);
    recs[0].image_path = "a.png";
    recs[0].source_id = "a";
    recs[0].grasps.push_back(make_rect(5, 6, 7, 8, 15, 0));
    recs[1].image_path = "b.png";
    recs[1].source_id = "b";
    write_scene_file("t_scenes.jsonl", recs);
    const auto back = read_scene_file("t_scenes.jsonl");
    REQUIRE(back.size() == 2);
    CHECK(back[0].grasps.size() == 1);
    CHECK(back[1].grasps.empty());
    CHECK(back[1].source_id == "b");
    std::remove("t_scenes.jsonl");
    CHECK_THROWS_AS(read_scene_file("no_such_file.jsonl"), DataError);
}
