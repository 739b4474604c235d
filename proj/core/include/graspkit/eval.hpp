#pragma once

#include <map>
#include <string>
#include <vector>

#include "graspkit/geom.hpp"

namespace gk {

/// Scored grasps for one scene; rect.confidence carries the score.
struct ScenePrediction {
    std::string source_id;
    std::vector<GraspRect> grasps;
};

inline constexpr double kAngleToleranceDeg = 30.0;
inline constexpr double kJaccardThreshold = 0.25;

/// Rectangle metric: true iff the angle difference is strictly below 30
/// degrees AND the Jaccard index strictly exceeds 0.25 (and the categories
/// agree when check_category is set).
bool rect_match(const GraspRect& pred, const GraspRect& gt, bool check_category = false,
                double angle_tol_deg = kAngleToleranceDeg,
                double jaccard_thr = kJaccardThreshold);

struct CategoryStats {
    double ap = 0.0;
    double precision = 0.0;
    double recall = 0.0;
    int gt_count = 0;
    int tp = 0;
    int fp = 0;
};

struct EvalReport {
    std::string mode;  // "single" or "multi"
    double accuracy = 0.0;
    double map_g = 0.0;
    std::map<int, CategoryStats> per_category;
    int tp = 0, fp = 0, fn = 0;
    int total_scenes = 0;
    int matched_scenes = 0;
    int scenes_without_gt = 0;
    double mean_latency_ms = 0.0;  // forward+decode wall clock, informational only
    // mAPg averages over categories present in the ground truth; flagged here
    // because per-image averaging is the other defensible reading.
    std::string map_averaging = "per-category";
};

/// Ground-truth scene labels for evaluation (no pixels needed).
struct SceneTruth {
    std::string source_id;
    std::vector<GraspRect> grasps;
};

/// Fraction of scenes whose top-scoring prediction rect-matches any ground
/// truth. Scenes without ground truth are excluded from the denominator and
/// counted; scenes without predictions count as misses. preds[i] pairs with
/// scenes[i].
double scene_accuracy(const std::vector<ScenePrediction>& preds,
                      const std::vector<SceneTruth>& scenes, EvalReport* detail = nullptr);

/// Category-aware grasp mAP: per category, rank predictions by score across
/// the whole set, greedily match one-to-one via the rectangle metric (with
/// category), and average 11-point interpolated AP over categories present in
/// the ground truth.
double map_grasp(const std::vector<ScenePrediction>& preds,
                 const std::vector<SceneTruth>& scenes, bool check_category = true,
                 EvalReport* detail = nullptr);

/// Aligns predictions to scenes by source_id (DataError listing missing ids)
/// and runs the metric for the mode.
EvalReport evaluate(const std::vector<ScenePrediction>& preds,
                    const std::vector<SceneTruth>& scenes, const std::string& mode);

std::string report_to_json(const EvalReport& r);
std::string report_to_table(const EvalReport& r);

// Prediction JSON-lines: {"source_id", "grasps": [{x,y,w,h,theta,category,score}]}.
void write_predictions(const std::string& path, const std::vector<ScenePrediction>& preds);
std::vector<ScenePrediction> read_predictions(const std::string& path);

}  // namespace gk
