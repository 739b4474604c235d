#include "graspkit/data.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <random>
#include <sstream>

#include <json.hpp>

#include "graspkit/error.hpp"
#include "graspkit/image.hpp"

namespace gk {

// ---- Cornell files ---------------------------------------------------------------

CornellParse parse_cornell_rect_file(const std::string& text) {
    CornellParse out;
    std::istringstream in(text);
    std::string line;
    std::vector<Vec2> quad;
    bool quad_bad = false;
    while (std::getline(in, line)) {
        if (line.find_first_not_of(" \t\r\n") == std::string::npos) continue;
        std::istringstream ls(line);
        double x = 0, y = 0;
        std::string trailing;
        if (!(ls >> x >> y) || (ls >> trailing) || !std::isfinite(x) || !std::isfinite(y))
            quad_bad = true;
        quad.push_back({x, y});
        if (quad.size() == 4) {
            if (quad_bad) {
                ++out.skipped;
            } else {
                try {
                    out.grasps.push_back(
                        fit_rect_to_quad(Quad{quad[0], quad[1], quad[2], quad[3]}));
                } catch (const std::invalid_argument&) {
                    ++out.skipped;  // degenerate annotation
                }
            }
            quad.clear();
            quad_bad = false;
        }
    }
    if (!quad.empty()) ++out.skipped;  // trailing partial rectangle
    return out;
}

std::string cornell_serialize(const std::vector<GraspRect>& grasps) {
    std::ostringstream out;
    out.precision(10);
    for (const GraspRect& g : grasps) {
        const Quad q = rect_to_quad(g);
        for (const Vec2& v : q) out << v.x << " " << v.y << "\n";
    }
    return out.str();
}

// ---- scene JSON lines ---------------------------------------------------------------

namespace {

std::string stem_of(const std::string& path) {
    const size_t slash = path.find_last_of("/\\");
    const size_t start = slash == std::string::npos ? 0 : slash + 1;
    const size_t dot = path.find_last_of('.');
    return path.substr(start, dot == std::string::npos || dot < start ? std::string::npos
                                                                       : dot - start);
}

}  // namespace

SceneRecord parse_scene_record(const std::string& json_line, int64_t k_obj) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(json_line);
    } catch (const nlohmann::json::exception& e) {
        throw DataError(std::string("bad scene JSON: ") + e.what());
    }
    SceneRecord rec;
    if (!j.contains("image_path") || !j["image_path"].is_string())
        throw DataError("scene record missing string field 'image_path'");
    rec.image_path = j["image_path"].get<std::string>();
    rec.source_id = j.value("source_id", stem_of(rec.image_path));
    if (!j.contains("grasps") || !j["grasps"].is_array())
        throw DataError("scene record missing array field 'grasps'");
    for (const auto& gj : j["grasps"]) {
        for (const char* f : {"x", "y", "w", "h", "theta"})
            if (!gj.contains(f) || !gj[f].is_number())
                throw DataError("grasp record missing numeric field '" + std::string(f) + "'");
        const double w = gj["w"].get<double>();
        const double h = gj["h"].get<double>();
        if (w <= 0) throw DataError("grasp field 'w' must be positive");
        if (h <= 0) throw DataError("grasp field 'h' must be positive");
        const int cat = gj.value("category", 0);
        if (cat < 0) throw DataError("grasp field 'category' must be non-negative");
        if (k_obj > 0 && cat >= k_obj)
            throw DataError("grasp field 'category' out of range: " + std::to_string(cat) +
                            " >= " + std::to_string(k_obj));
        rec.grasps.push_back(make_rect(gj["x"].get<double>(), gj["y"].get<double>(), w, h,
                                       gj["theta"].get<double>(), cat));
    }
    return rec;
}

std::string scene_record_to_json(const SceneRecord& rec) {
    nlohmann::json j;
    j["image_path"] = rec.image_path;
    j["source_id"] = rec.source_id;
    auto& arr = j["grasps"] = nlohmann::json::array();
    for (const GraspRect& g : rec.grasps)
        arr.push_back({{"x", g.x}, {"y", g.y}, {"w", g.w}, {"h", g.h},
                       {"theta", g.theta}, {"category", g.category}});
    return j.dump();
}

std::vector<SceneRecord> read_scene_file(const std::string& path, int64_t k_obj) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open scene file: " + path);
    std::vector<SceneRecord> out;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        try {
            out.push_back(parse_scene_record(line, k_obj));
        } catch (const DataError& e) {
            throw DataError(path + ":" + std::to_string(lineno) + ": " + e.what());
        }
    }
    return out;
}

void write_scene_file(const std::string& path, const std::vector<SceneRecord>& recs) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw DataError("cannot open for writing: " + path);
    for (const SceneRecord& r : recs) out << scene_record_to_json(r) << "\n";
}

LabeledScene load_scene(const SceneRecord& rec, const std::string& base_dir) {
    std::string path = rec.image_path;
    if (!path.empty() && path[0] != '/' && !base_dir.empty()) path = base_dir + "/" + path;
    LabeledScene scene;
    scene.image = image_to_tensor(load_image(path));
    scene.grasps = rec.grasps;
    scene.source_id = rec.source_id;
    for (const GraspRect& g : scene.grasps)
        if (g.x < 0 || g.x > static_cast<double>(scene.width()) || g.y < 0 ||
            g.y > static_cast<double>(scene.height()))
            throw DataError("scene " + rec.source_id + ": grasp center outside image bounds");
    return scene;
}

// ---- synthetic scenes ------------------------------------------------------------------

namespace {

uint64_t mix64(uint64_t z) {
    z += 0x9E3779B97F4A7C15ull;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
}

double hash01(uint64_t seed, uint64_t x, uint64_t y) {
    const uint64_t h = mix64(seed ^ mix64(x ^ mix64(y)));
    return static_cast<double>(h >> 11) * (1.0 / 9007199254740992.0);
}

struct SynthShape {
    int category = 0;  // 0 bar, 1 ellipse, 2 capsule, 3 diamond
    double cx = 0, cy = 0;
    double a = 0, b = 0;      // major/minor half extents
    double phi_deg = 0;       // major axis angle
    double color[3] = {0, 0, 0};

    bool inside(double x, double y) const {
        const double rad = phi_deg * 3.14159265358979323846 / 180.0;
        const double dx = x - cx, dy = y - cy;
        const double u = std::cos(rad) * dx + std::sin(rad) * dy;
        const double v = -std::sin(rad) * dx + std::cos(rad) * dy;
        switch (category) {
            case 0: return std::abs(u) <= a && std::abs(v) <= b;
            case 1: return (u / a) * (u / a) + (v / b) * (v / b) <= 1.0;
            case 2: {
                const double uu = std::max(std::abs(u) - (a - b), 0.0);
                return uu * uu + v * v <= b * b;
            }
            default: return std::abs(u) / a + std::abs(v) / b <= 1.0;
        }
    }
};

constexpr double kPalette[kSynthCategories][3] = {
    {0.82, 0.25, 0.20},  // bar
    {0.22, 0.70, 0.30},  // ellipse
    {0.25, 0.40, 0.85},  // capsule
    {0.85, 0.75, 0.20},  // diamond
};

}  // namespace

LabeledScene synth_scene(uint64_t rng_seed, int n_objects, int64_t canvas) {
    if (n_objects < 1) throw std::invalid_argument("synth_scene: n_objects must be >= 1");
    std::mt19937_64 rng(rng_seed);
    std::uniform_real_distribution<double> u01(0.0, 1.0);
    const double cs = static_cast<double>(canvas);

    std::vector<SynthShape> shapes;
    for (int n = 0; n < n_objects; ++n) {
        SynthShape s;
        s.category = static_cast<int>(rng() % kSynthCategories);
        s.a = (0.10 + 0.09 * u01(rng)) * cs;
        s.b = std::min((0.035 + 0.02 * u01(rng)) * cs, 0.45 * s.a);
        s.phi_deg = 180.0 * u01(rng);
        for (int attempt = 0; attempt < 100; ++attempt) {
            s.cx = (0.22 + 0.56 * u01(rng)) * cs;
            s.cy = (0.22 + 0.56 * u01(rng)) * cs;
            bool clear = true;
            for (const SynthShape& o : shapes) {
                const double d = std::hypot(s.cx - o.cx, s.cy - o.cy);
                if (d < 0.28 * cs) clear = false;
            }
            if (clear) break;
        }
        for (int c = 0; c < 3; ++c)
            s.color[c] = std::clamp(kPalette[s.category][c] + 0.12 * (u01(rng) - 0.5), 0.0, 1.0);
        shapes.push_back(s);
    }

    LabeledScene scene;
    scene.source_id = "synth-" + std::to_string(rng_seed) + "-" + std::to_string(n_objects);
    scene.image = Tensor::zeros({3, canvas, canvas});
    double* img = scene.image.data();
    const int64_t hw = canvas * canvas;
    for (int64_t i = 0; i < canvas; ++i)
        for (int64_t j = 0; j < canvas; ++j) {
            const double x = static_cast<double>(j) + 0.5;
            const double y = static_cast<double>(i) + 0.5;
            const double speck =
                0.05 * (hash01(rng_seed, static_cast<uint64_t>(j), static_cast<uint64_t>(i)) - 0.5);
            double px[3];
            const double wave = 0.04 * std::sin(x * 0.37) * std::sin(y * 0.29);
            px[0] = 0.16 + wave + speck;
            px[1] = 0.15 + wave + speck;
            px[2] = 0.17 - wave + speck;
            for (const SynthShape& s : shapes)
                if (s.inside(x, y)) {
                    for (int c = 0; c < 3; ++c) px[c] = s.color[c] + 0.6 * speck;
                }
            for (int c = 0; c < 3; ++c)
                img[c * hw + i * canvas + j] = std::clamp(px[c], 0.0, 1.0);
        }

    for (const SynthShape& s : shapes) {
        // Close across the minor axis: opening just past the object width,
        // plates covering most of the major extent.
        scene.grasps.push_back(make_rect(s.cx, s.cy, 2.6 * s.b, 1.4 * s.a,
                                         s.phi_deg + 90.0, s.category));
    }
    return scene;
}

// ---- preprocessing ----------------------------------------------------------------------

LabeledScene resize_to_input(const LabeledScene& scene, int64_t size) {
    LabeledScene out;
    out.source_id = scene.source_id;
    const double sx = static_cast<double>(size) / static_cast<double>(scene.width());
    const double sy = static_cast<double>(size) / static_cast<double>(scene.height());
    out.image = bilinear_resize(scene.image, size, size);
    for (const GraspRect& g : scene.grasps) {
        Quad q = rect_to_quad(g);
        for (Vec2& v : q) {
            v.x *= sx;
            v.y *= sy;
        }
        GraspRect r = fit_rect_to_quad(q);
        r.category = g.category;
        r.confidence = g.confidence;
        out.grasps.push_back(r);
    }
    return out;
}

std::optional<GraspRect> rotate_grasp_label(const GraspRect& g, int k, int64_t width,
                                            int64_t height) {
    const double ang = kRotationStepDeg * static_cast<double>(k);
    const double rad = ang * 3.14159265358979323846 / 180.0;
    const double cs = std::cos(rad), sn = std::sin(rad);
    const double cx = static_cast<double>(width) / 2.0;
    const double cy = static_cast<double>(height) / 2.0;
    const double dx = g.x - cx, dy = g.y - cy;
    const double nx = cx + cs * dx - sn * dy;
    const double ny = cy + sn * dx + cs * dy;
    if (nx < 0 || nx > static_cast<double>(width) || ny < 0 || ny > static_cast<double>(height))
        return std::nullopt;
    return make_rect(nx, ny, g.w, g.h, g.theta + ang, g.category, g.confidence);
}

LabeledScene rotate_augment(const LabeledScene& scene, int k) {
    if (scene.width() != scene.height())
        throw std::invalid_argument("rotate_augment: image must be square");
    LabeledScene out;
    out.source_id = scene.source_id;
    out.image = k % kNumRotations == 0 ? scene.image.clone()
                                       : rotate_bilinear(scene.image,
                                                         kRotationStepDeg * static_cast<double>(k));
    for (const GraspRect& g : scene.grasps)
        if (auto r = rotate_grasp_label(g, k, scene.width(), scene.height()))
            out.grasps.push_back(*r);
    return out;
}

// ---- dense targets -------------------------------------------------------------------------

bool TargetMaps::is_positive(int64_t row, int64_t col) const {
    for (const PosCell& c : cells)
        if (c.row == row && c.col == col) return true;
    return false;
}

TargetMaps build_targets(const LabeledScene& scene, int64_t stride, int64_t k_angle,
                         int64_t k_obj) {
    if (scene.height() % stride != 0 || scene.width() % stride != 0)
        throw std::invalid_argument("build_targets: image extents not divisible by stride");
    TargetMaps t;
    t.stride = stride;
    t.grid_h = scene.height() / stride;
    t.grid_w = scene.width() / stride;
    const double fs = static_cast<double>(stride);
    for (const GraspRect& g : scene.grasps) {
        validate_rect(g);
        if (k_obj > 0 && g.category >= k_obj)
            throw std::invalid_argument("build_targets: category " +
                                        std::to_string(g.category) + " out of range");
        TargetMaps::PosCell cell;
        cell.col = std::min<int64_t>(static_cast<int64_t>(std::floor(g.x / fs)), t.grid_w - 1);
        cell.row = std::min<int64_t>(static_cast<int64_t>(std::floor(g.y / fs)), t.grid_h - 1);
        const double fx = g.x / fs - (static_cast<double>(cell.col) + 0.5);
        const double fy = g.y / fs - (static_cast<double>(cell.row) + 0.5);
        cell.t_dx = std::atanh(fx);
        cell.t_dy = std::atanh(fy);
        cell.t_logw = std::log(g.w / fs);
        cell.t_logh = std::log(g.h / fs);
        cell.angle_bin = bin_angle(g.theta, k_angle);
        cell.category = g.category;
        cell.gt = g;

        auto prev = std::find_if(t.cells.begin(), t.cells.end(), [&](const TargetMaps::PosCell& c) {
            return c.row == cell.row && c.col == cell.col;
        });
        if (prev != t.cells.end()) {
            ++t.collisions;
            if (g.w * g.h > prev->gt.w * prev->gt.h) *prev = cell;  // larger grasp wins
        } else {
            t.cells.push_back(cell);
        }
    }
    return t;
}

Tensor targets_to_map(const TargetMaps& t, int64_t k_angle, int64_t k_obj) {
    const int64_t ch = 4 + k_angle + k_obj + 1;
    const double sat = 30.0;  // saturated logits: residual CE/BCE ~ e^-30
    Tensor map = Tensor::zeros({ch, t.grid_h, t.grid_w});
    double* p = map.data();
    const int64_t hw = t.grid_h * t.grid_w;
    // graspability: confidently negative everywhere, positive at labeled cells
    for (int64_t i = 0; i < hw; ++i) p[(ch - 1) * hw + i] = -sat;
    for (const TargetMaps::PosCell& c : t.cells) {
        const int64_t off = c.row * t.grid_w + c.col;
        p[0 * hw + off] = c.t_dx;
        p[1 * hw + off] = c.t_dy;
        p[2 * hw + off] = c.t_logw;
        p[3 * hw + off] = c.t_logh;
        p[(4 + c.angle_bin) * hw + off] = sat;
        p[(4 + k_angle + c.category) * hw + off] = sat;
        p[(ch - 1) * hw + off] = sat;
    }
    return map;
}

}  // namespace gk
