#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "graspkit/angles.hpp"
#include "graspkit/geom.hpp"
#include "graspkit/tensor.hpp"

namespace gk {

/// One labeled image: pixels in [0, 1] plus its ground-truth grasps.
struct LabeledScene {
    Tensor image;  // [3, H, W]
    std::vector<GraspRect> grasps;
    std::string source_id;

    int64_t height() const { return image.dim(1); }
    int64_t width() const { return image.dim(2); }
};

/// Scene header from a JSON-lines dataset file; pixels load separately.
struct SceneRecord {
    std::string image_path;
    std::vector<GraspRect> grasps;
    std::string source_id;
};

// ---- Cornell-format grasp files -------------------------------------------------

struct CornellParse {
    std::vector<GraspRect> grasps;
    int skipped = 0;  // malformed or NaN vertex quadruples
};

/// Four "x y" lines per rectangle; quadruples with NaN or malformed lines are
/// skipped and counted.
CornellParse parse_cornell_rect_file(const std::string& text);
std::string cornell_serialize(const std::vector<GraspRect>& grasps);

// ---- scene JSON-lines format -----------------------------------------------------

/// One line: {"image_path": str, "grasps": [{"x","y","w","h","theta","category"}]}.
/// Throws DataError naming the offending field; theta is normalized to
/// [0, 180). Pass k_obj = 0 to skip the category range check.
SceneRecord parse_scene_record(const std::string& json_line, int64_t k_obj = 0);
std::string scene_record_to_json(const SceneRecord& rec);
std::vector<SceneRecord> read_scene_file(const std::string& path, int64_t k_obj = 0);
void write_scene_file(const std::string& path, const std::vector<SceneRecord>& recs);

/// Loads pixels for a record; relative image paths resolve against base_dir.
LabeledScene load_scene(const SceneRecord& rec, const std::string& base_dir);

// ---- synthetic desk-scale scenes ---------------------------------------------------

inline constexpr int kSynthCategories = 4;  // bar, ellipse, capsule, diamond

/// Renders n_objects elongated shapes (category = shape type) on a textured
/// background and labels one grasp across each shape's minor axis.
/// Deterministic per seed.
LabeledScene synth_scene(uint64_t rng_seed, int n_objects, int64_t canvas = 224);

// ---- preprocessing (resize + rotation augmentation) ---------------------------------

/// Bilinear resize to size x size; grasp labels transform through the
/// per-axis scaling with a least-squares rectangle re-fit of the mapped
/// vertices.
LabeledScene resize_to_input(const LabeledScene& scene, int64_t size = 224);

inline constexpr double kRotationStepDeg = 20.0;
inline constexpr int kNumRotations = 18;  // k in {0..17}

/// Label-only rotation by 20k degrees about the image center (W/2, H/2);
/// returns nothing when the rotated center leaves the frame.
std::optional<GraspRect> rotate_grasp_label(const GraspRect& g, int k, int64_t width,
                                            int64_t height);

/// Rotates image (bilinear, edge clamp) and labels by 20k degrees about the
/// image center; grasps whose centers leave the frame are dropped.
LabeledScene rotate_augment(const LabeledScene& scene, int k);

// ---- dense supervision targets --------------------------------------------------------

/// One positive cell per ground-truth grasp (the cell containing its center)
/// carrying exact channel targets, chosen so decoding reproduces the grasp.
struct TargetMaps {
    int64_t grid_h = 0;
    int64_t grid_w = 0;
    int64_t stride = 8;

    struct PosCell {
        int64_t row = 0;
        int64_t col = 0;
        double t_dx = 0, t_dy = 0;      // pre-tanh center offsets
        double t_logw = 0, t_logh = 0;  // log-scale sizes in strides
        int64_t angle_bin = 0;
        int64_t category = 0;
        GraspRect gt;
    };
    std::vector<PosCell> cells;
    int collisions = 0;  // center pairs landing in one cell (larger grasp won)

    bool is_positive(int64_t row, int64_t col) const;
};

TargetMaps build_targets(const LabeledScene& scene, int64_t stride, int64_t k_angle,
                         int64_t k_obj);

/// Dense map with the target values written at positive cells and saturated
/// graspability logits (+-12); decode_candidates over it reproduces the
/// grasps. The inverse pairing with build_targets backs the round-trip tests.
Tensor targets_to_map(const TargetMaps& t, int64_t k_angle, int64_t k_obj);

}  // namespace gk
