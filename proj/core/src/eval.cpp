#include "graspkit/eval.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "graspkit/error.hpp"

namespace gk {

bool rect_match(const GraspRect& pred, const GraspRect& gt, bool check_category,
                double angle_tol_deg, double jaccard_thr) {
    if (check_category && pred.category != gt.category) return false;
    if (!(angle_diff_deg(pred.theta, gt.theta) < angle_tol_deg)) return false;
    return jaccard(pred, gt) > jaccard_thr;
}

double scene_accuracy(const std::vector<ScenePrediction>& preds,
                      const std::vector<SceneTruth>& scenes, EvalReport* detail) {
    if (preds.size() != scenes.size())
        throw std::invalid_argument("scene_accuracy: prediction/scene count mismatch");
    int evaluated = 0, matched = 0, without_gt = 0;
    for (size_t i = 0; i < scenes.size(); ++i) {
        if (scenes[i].grasps.empty()) {
            ++without_gt;
            continue;
        }
        ++evaluated;
        const auto& gs = preds[i].grasps;
        if (gs.empty()) continue;
        const GraspRect* top = &gs[0];
        for (const GraspRect& g : gs)
            if (g.confidence > top->confidence) top = &g;
        for (const GraspRect& gt : scenes[i].grasps)
            if (rect_match(*top, gt, false)) {
                ++matched;
                break;
            }
    }
    const double acc = evaluated > 0 ? static_cast<double>(matched) / evaluated : 0.0;
    if (detail) {
        detail->accuracy = acc;
        detail->total_scenes = static_cast<int>(scenes.size());
        detail->matched_scenes = matched;
        detail->scenes_without_gt = without_gt;
    }
    return acc;
}

namespace {

double eleven_point_ap(const std::vector<double>& precision, const std::vector<double>& recall) {
    double sum = 0.0;
    for (int k = 0; k <= 10; ++k) {
        const double r = static_cast<double>(k) / 10.0;
        double best = 0.0;
        for (size_t i = 0; i < recall.size(); ++i)
            if (recall[i] >= r) best = std::max(best, precision[i]);
        sum += best;
    }
    return sum / 11.0;
}

}  // namespace

double map_grasp(const std::vector<ScenePrediction>& preds,
                 const std::vector<SceneTruth>& scenes, bool check_category, EvalReport* detail) {
    if (preds.size() != scenes.size())
        throw std::invalid_argument("map_grasp: prediction/scene count mismatch");

    // Class-agnostic mode folds everything into one bucket.
    auto cat_of = [check_category](const GraspRect& g) { return check_category ? g.category : 0; };

    std::set<int> categories;
    std::map<int, int> gt_count;
    for (const SceneTruth& s : scenes)
        for (const GraspRect& g : s.grasps) {
            categories.insert(cat_of(g));
            ++gt_count[cat_of(g)];
        }
    // prediction-only categories have no AP but their detections count as FPs
    for (const ScenePrediction& p : preds)
        for (const GraspRect& g : p.grasps) categories.insert(cat_of(g));

    struct Ranked {
        double score;
        size_t scene;
        const GraspRect* rect;
        std::string scene_id;
    };

    int total_tp = 0, total_fp = 0, total_gt = 0;
    double ap_sum = 0.0;
    int ap_terms = 0;
    std::map<int, CategoryStats> per_cat;

    for (int cat : categories) {
        std::vector<Ranked> ranked;
        for (size_t i = 0; i < preds.size(); ++i)
            for (const GraspRect& g : preds[i].grasps)
                if (cat_of(g) == cat) ranked.push_back({g.confidence, i, &g, preds[i].source_id});
        std::sort(ranked.begin(), ranked.end(), [](const Ranked& a, const Ranked& b) {
            if (a.score != b.score) return a.score > b.score;
            return a.scene_id < b.scene_id;  // stable under scene permutation
        });

        std::vector<std::vector<bool>> taken(scenes.size());
        for (size_t i = 0; i < scenes.size(); ++i)
            taken[i].assign(scenes[i].grasps.size(), false);

        std::vector<double> precision, recall;
        int tp = 0, fp = 0;
        const int n_gt = gt_count[cat];
        for (const Ranked& r : ranked) {
            const auto& gts = scenes[r.scene].grasps;
            int best = -1;
            double best_j = -1.0;
            for (size_t gi = 0; gi < gts.size(); ++gi) {
                if (taken[r.scene][gi]) continue;
                if (cat_of(gts[gi]) != cat) continue;
                if (!rect_match(*r.rect, gts[gi], check_category)) continue;
                const double j = jaccard(*r.rect, gts[gi]);
                if (j > best_j) {
                    best_j = j;
                    best = static_cast<int>(gi);
                }
            }
            if (best >= 0) {
                taken[r.scene][static_cast<size_t>(best)] = true;
                ++tp;
            } else {
                ++fp;
            }
            precision.push_back(static_cast<double>(tp) / static_cast<double>(tp + fp));
            recall.push_back(n_gt > 0 ? static_cast<double>(tp) / n_gt : 0.0);
        }

        CategoryStats st;
        st.gt_count = n_gt;
        st.tp = tp;
        st.fp = fp;
        st.precision = tp + fp > 0 ? static_cast<double>(tp) / (tp + fp) : 0.0;
        st.recall = n_gt > 0 ? static_cast<double>(tp) / n_gt : 0.0;
        if (n_gt > 0) {
            st.ap = eleven_point_ap(precision, recall);
            ap_sum += st.ap;
            ++ap_terms;
            total_gt += n_gt;
        }
        total_tp += tp;
        total_fp += fp;
        per_cat[cat] = st;
    }

    const double mapg = ap_terms > 0 ? ap_sum / ap_terms : 0.0;
    if (detail) {
        detail->map_g = mapg;
        detail->per_category = std::move(per_cat);
        detail->tp = total_tp;
        detail->fp = total_fp;
        detail->fn = total_gt - total_tp;
        detail->total_scenes = static_cast<int>(scenes.size());
    }
    return mapg;
}

EvalReport evaluate(const std::vector<ScenePrediction>& preds,
                    const std::vector<SceneTruth>& scenes, const std::string& mode) {
    if (mode != "single" && mode != "multi")
        throw UsageError("evaluate: mode must be 'single' or 'multi', got '" + mode + "'");
    std::map<std::string, const ScenePrediction*> by_id;
    for (const ScenePrediction& p : preds) by_id[p.source_id] = &p;
    std::vector<ScenePrediction> aligned;
    std::vector<std::string> missing;
    for (const SceneTruth& s : scenes) {
        auto it = by_id.find(s.source_id);
        if (it == by_id.end()) {
            missing.push_back(s.source_id);
            continue;
        }
        aligned.push_back(*it->second);
    }
    if (!missing.empty()) {
        std::string list;
        for (const std::string& m : missing) list += (list.empty() ? "" : ", ") + m;
        throw DataError("predictions missing for scene ids: " + list);
    }

    EvalReport report;
    report.mode = mode;
    if (mode == "single")
        scene_accuracy(aligned, scenes, &report);
    else
        map_grasp(aligned, scenes, true, &report);
    return report;
}

std::string report_to_json(const EvalReport& r) {
    nlohmann::json j;
    j["mode"] = r.mode;
    j["accuracy"] = r.accuracy;
    j["mAPg"] = r.map_g;
    j["map_averaging"] = r.map_averaging;
    j["counts"] = {{"tp", r.tp}, {"fp", r.fp}, {"fn", r.fn}};
    j["total_scenes"] = r.total_scenes;
    j["matched_scenes"] = r.matched_scenes;
    j["scenes_without_gt"] = r.scenes_without_gt;
    j["mean_latency_ms"] = r.mean_latency_ms;
    auto& cats = j["per_category"] = nlohmann::json::object();
    for (const auto& [cat, st] : r.per_category)
        cats[std::to_string(cat)] = {{"ap", st.ap},           {"precision", st.precision},
                                     {"recall", st.recall},   {"gt_count", st.gt_count},
                                     {"tp", st.tp},           {"fp", st.fp}};
    return j.dump(2);
}

std::string report_to_table(const EvalReport& r) {
    std::ostringstream os;
    os.setf(std::ios::fixed);
    os.precision(4);
    os << "mode: " << r.mode << "\n";
    if (r.mode == "single") {
        os << "accuracy: " << r.accuracy << "  (" << r.matched_scenes << " matched, "
           << r.total_scenes << " scenes, " << r.scenes_without_gt << " without ground truth)\n";
    } else {
        os << "mAPg: " << r.map_g << "  (tp " << r.tp << ", fp " << r.fp << ", fn " << r.fn
           << ")\n";
        os << "category      AP   precision  recall   gt\n";
        for (const auto& [cat, st] : r.per_category) {
            os << "  " << cat << "        " << st.ap << "   " << st.precision << "     "
               << st.recall << "   " << st.gt_count << "\n";
        }
    }
    if (r.mean_latency_ms > 0) os << "mean latency: " << r.mean_latency_ms << " ms/image\n";
    return os.str();
}

void write_predictions(const std::string& path, const std::vector<ScenePrediction>& preds) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw DataError("cannot open for writing: " + path);
    for (const ScenePrediction& p : preds) {
        nlohmann::json j;
        j["source_id"] = p.source_id;
        auto& arr = j["grasps"] = nlohmann::json::array();
        for (const GraspRect& g : p.grasps)
            arr.push_back({{"x", g.x}, {"y", g.y}, {"w", g.w}, {"h", g.h},
                           {"theta", g.theta}, {"category", g.category},
                           {"score", g.confidence}});
        out << j.dump() << "\n";
    }
}

std::vector<ScenePrediction> read_predictions(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open predictions: " + path);
    std::vector<ScenePrediction> out;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(line);
        } catch (const nlohmann::json::exception& e) {
            throw DataError(path + ":" + std::to_string(lineno) + ": " + e.what());
        }
        ScenePrediction p;
        if (!j.contains("source_id") || !j["source_id"].is_string())
            throw DataError(path + ":" + std::to_string(lineno) + ": missing 'source_id'");
        p.source_id = j["source_id"].get<std::string>();
        for (const auto& gj : j.value("grasps", nlohmann::json::array())) {
            GraspRect g = make_rect(gj.at("x").get<double>(), gj.at("y").get<double>(),
                                    gj.at("w").get<double>(), gj.at("h").get<double>(),
                                    gj.at("theta").get<double>(), gj.value("category", 0),
                                    gj.value("score", 1.0));
            p.grasps.push_back(g);
        }
        out.push_back(std::move(p));
    }
    return out;
}

}  // namespace gk
