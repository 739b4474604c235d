#pragma once

#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "graspkit/config.hpp"
#include "graspkit/data.hpp"
#include "graspkit/eval.hpp"
#include "graspkit/model.hpp"

namespace gk {

/// Training dataset resolved from the config's data section (synthetic or
/// JSON-lines scenes), resized to the model input.
std::vector<LabeledScene> load_dataset(const RunConfig& cfg);

struct TrainResult {
    std::string checkpoint_final;
    std::string checkpoint_best;
    std::string metrics_csv;
    int steps = 0;
    double best_epoch_loss = 0.0;
    double final_epoch_loss = 0.0;
};

/// Invoked after every optimizer step; return false to stop training early
/// (the result still writes checkpoints and metrics).
using StepHook = std::function<bool(int step, const GraspModel& model, double objective)>;

/// Deterministic end-to-end training: rotation augmentation (when enabled),
/// SGD with momentum, the divide-by-factor learning-rate schedule, a metrics
/// CSV row per step, and checkpoints at the best epoch loss and at the end.
/// Throws NumericError naming the step when the loss goes non-finite.
TrainResult train_run(const RunConfig& cfg, const StepHook& hook = nullptr);

/// Forward + decode + NMS for one scene image (already resized).
ScenePrediction predict_scene(const GraspModel& model, const LabeledScene& scene,
                              const RunConfig& cfg);

struct PredictStats {
    double mean_latency_ms = 0.0;
};

std::vector<ScenePrediction> predict_scenes(const GraspModel& model,
                                            const std::vector<LabeledScene>& scenes,
                                            const RunConfig& cfg,
                                            PredictStats* stats = nullptr);

/// Builds the model from the config, loads the checkpoint (hash-checked),
/// reads scenes, writes prediction JSON-lines.
void predict_run(const RunConfig& cfg, const std::string& checkpoint_path,
                 const std::string& scenes_path, const std::string& out_path);

/// Reads ground truth and predictions, evaluates in the given mode.
EvalReport eval_run(const std::string& scenes_path, const std::string& preds_path,
                    const std::string& mode);

/// Writes `count` synthetic scenes as PNGs plus a scenes.jsonl into out_dir.
std::string synth_run(uint64_t seed, int count, int objects, int64_t canvas,
                      const std::string& out_dir);

struct RenderOptions {
    std::string color_by = "angle";  // or "category"
    bool heatmap = false;
    std::string checkpoint;  // required when heatmap is set
};

/// Draws predictions (or nothing) over each scene image, optionally with the
/// model's graspability heatmap, writing one PNG per scene into out_dir.
void render_run(const RunConfig& cfg, const std::string& scenes_path,
                const std::string& preds_path, const RenderOptions& opts,
                const std::string& out_dir);

}  // namespace gk
