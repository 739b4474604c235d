#include "graspkit/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <numeric>
#include <random>

#include "graspkit/checkpoint.hpp"
#include "graspkit/error.hpp"
#include "graspkit/image.hpp"
#include "graspkit/loss.hpp"
#include "graspkit/render.hpp"

namespace gk {

namespace fs = std::filesystem;

std::vector<LabeledScene> load_dataset(const RunConfig& cfg) {
    std::vector<LabeledScene> scenes;
    if (cfg.data.use_synth) {
        for (int i = 0; i < cfg.data.synth.count; ++i)
            scenes.push_back(synth_scene(cfg.data.synth.seed + static_cast<uint64_t>(i),
                                         cfg.data.synth.objects, cfg.model.image_size));
    } else {
        const auto recs = read_scene_file(cfg.data.scenes, cfg.head.k_obj);
        if (recs.empty()) throw DataError("dataset is empty: " + cfg.data.scenes);
        for (const SceneRecord& r : recs)
            scenes.push_back(resize_to_input(load_scene(r, cfg.data.base_dir),
                                             cfg.model.image_size));
    }
    return scenes;
}

TrainResult train_run(const RunConfig& cfg, const StepHook& hook) {
    cfg.validate();
    const std::vector<LabeledScene> scenes = load_dataset(cfg);
    fs::create_directories(cfg.train.out_dir);

    GraspModel model(cfg.model, cfg.head);
    std::mt19937_64 init_rng(cfg.train.seed);
    model.init(init_rng);
    NamedParams params = model.params();

    SgdMomentum opt(cfg.train.lr, cfg.train.momentum);
    std::mt19937_64 order_rng(cfg.train.seed ^ 0x5DEECE66Dull);

    TrainResult result;
    result.metrics_csv = cfg.train.out_dir + "/metrics.csv";
    result.checkpoint_best = cfg.train.out_dir + "/model_best.gkpt";
    result.checkpoint_final = cfg.train.out_dir + "/model_final.gkpt";
    std::ofstream csv(result.metrics_csv, std::ios::trunc);
    if (!csv) throw DataError("cannot open metrics csv: " + result.metrics_csv);
    csv << "step,lr,grasp_box,angle,obj_class,graspability,total\n";
    csv.precision(12);

    const std::string hash = config_hash(cfg);
    const int64_t stride = 8;
    double best = std::numeric_limits<double>::infinity();
    int step = 0;
    bool stop = false;

    for (int epoch = 0; epoch < cfg.train.epochs && !stop; ++epoch) {
        const double lr = cfg.lr_at_epoch(epoch);
        opt.set_lr(lr);

        std::vector<size_t> order(scenes.size());
        std::iota(order.begin(), order.end(), size_t{0});
        std::shuffle(order.begin(), order.end(), order_rng);

        double epoch_loss = 0.0;
        int epoch_batches = 0;

        for (size_t pos = 0; pos < order.size() && !stop; pos += static_cast<size_t>(cfg.train.batch_size)) {
            const size_t end = std::min(order.size(), pos + static_cast<size_t>(cfg.train.batch_size));
            Tape tape;
            for (auto& [name, p] : params) tape.watch(p);

            Tensor objective;
            LossBreakdown sums;
            int n = 0;
            try {
                for (size_t bi = pos; bi < end; ++bi) {
                    LabeledScene sample = scenes[order[bi]];
                    if (cfg.data.augment) {
                        const int k = static_cast<int>(order_rng() % kNumRotations);
                        sample = rotate_augment(sample, k);
                    }
                    const TargetMaps targets =
                        build_targets(sample, stride, cfg.head.k_angle, cfg.head.k_obj);
                    const DenseGraspMap map = model.forward(sample.image);
                    LossWeights lw;
                    lw.graspability_pos_weight = cfg.train.graspability_pos_weight;
                    const LossBreakdown lb = total_loss(map, targets, lw);
                    sums.grasp_box += lb.grasp_box;
                    sums.angle += lb.angle;
                    sums.obj_class += lb.obj_class;
                    sums.graspability += lb.graspability;
                    sums.total += lb.total;
                    objective = objective.defined() ? add(objective, lb.objective) : lb.objective;
                    ++n;
                }
                objective = mul_scalar(objective, 1.0 / static_cast<double>(n));
                const double obj_val = objective.item();
                if (!std::isfinite(obj_val))
                    throw NumericError("non-finite loss");
                tape.backward(objective);
                opt.step(params);
            } catch (const NumericError& e) {
                throw NumericError(std::string(e.what()) + " at training step " +
                                   std::to_string(step + 1));
            }
            tape.clear();
            ++step;

            const double inv = 1.0 / static_cast<double>(n);
            csv << step << ',' << lr << ',' << sums.grasp_box * inv << ',' << sums.angle * inv
                << ',' << sums.obj_class * inv << ',' << sums.graspability * inv << ','
                << sums.total * inv << '\n';
            epoch_loss += objective.item();
            ++epoch_batches;

            if (hook && !hook(step, model, objective.item())) stop = true;
        }

        if (epoch_batches > 0) {
            epoch_loss /= epoch_batches;
            result.final_epoch_loss = epoch_loss;
            if (epoch_loss < best) {
                best = epoch_loss;
                result.best_epoch_loss = best;
                save_checkpoint(result.checkpoint_best, params, hash);
            }
        }
    }

    result.steps = step;
    save_checkpoint(result.checkpoint_final, params, hash);
    csv.close();
    return result;
}

ScenePrediction predict_scene(const GraspModel& model, const LabeledScene& scene,
                              const RunConfig& cfg) {
    const DenseGraspMap map = model.forward(scene.image);
    auto cands = decode_candidates(map, cfg.eval.score_threshold);
    cands = nms_filter(cands, cfg.eval.nms_iou, cfg.head.k_obj > 1);
    ScenePrediction pred;
    pred.source_id = scene.source_id;
    for (const GraspCandidate& c : cands) pred.grasps.push_back(c.rect);
    return pred;
}

std::vector<ScenePrediction> predict_scenes(const GraspModel& model,
                                            const std::vector<LabeledScene>& scenes,
                                            const RunConfig& cfg, PredictStats* stats) {
    std::vector<ScenePrediction> preds;
    double total_ms = 0.0;
    for (const LabeledScene& s : scenes) {
        const auto t0 = std::chrono::steady_clock::now();
        preds.push_back(predict_scene(model, s, cfg));
        const auto t1 = std::chrono::steady_clock::now();
        total_ms += std::chrono::duration<double, std::milli>(t1 - t0).count();
    }
    if (stats)
        stats->mean_latency_ms = scenes.empty() ? 0.0 : total_ms / static_cast<double>(scenes.size());
    return preds;
}

namespace {

GraspModel load_model(const RunConfig& cfg, const std::string& checkpoint_path) {
    GraspModel model(cfg.model, cfg.head);
    NamedParams params = model.params();
    load_checkpoint_into(checkpoint_path, params, config_hash(cfg));
    return model;
}

}  // namespace

void predict_run(const RunConfig& cfg, const std::string& checkpoint_path,
                 const std::string& scenes_path, const std::string& out_path) {
    const GraspModel model = load_model(cfg, checkpoint_path);
    const auto recs = read_scene_file(scenes_path, cfg.head.k_obj);
    std::vector<LabeledScene> scenes;
    for (const SceneRecord& r : recs)
        scenes.push_back(resize_to_input(load_scene(r, cfg.data.base_dir), cfg.model.image_size));
    const auto preds = predict_scenes(model, scenes, cfg);
    write_predictions(out_path, preds);
}

EvalReport eval_run(const std::string& scenes_path, const std::string& preds_path,
                    const std::string& mode) {
    const auto recs = read_scene_file(scenes_path);
    std::vector<SceneTruth> truth;
    for (const SceneRecord& r : recs) truth.push_back({r.source_id, r.grasps});
    const auto preds = read_predictions(preds_path);
    return evaluate(preds, truth, mode);
}

std::string synth_run(uint64_t seed, int count, int objects, int64_t canvas,
                      const std::string& out_dir) {
    fs::create_directories(out_dir);
    std::vector<SceneRecord> recs;
    for (int i = 0; i < count; ++i) {
        const LabeledScene s = synth_scene(seed + static_cast<uint64_t>(i), objects, canvas);
        const std::string name = s.source_id + ".png";
        save_png(out_dir + "/" + name, tensor_to_image(s.image));
        SceneRecord rec;
        rec.image_path = name;
        rec.source_id = s.source_id;
        rec.grasps = s.grasps;
        recs.push_back(std::move(rec));
    }
    const std::string list = out_dir + "/scenes.jsonl";
    write_scene_file(list, recs);
    return list;
}

void render_run(const RunConfig& cfg, const std::string& scenes_path,
                const std::string& preds_path, const RenderOptions& opts,
                const std::string& out_dir) {
    fs::create_directories(out_dir);
    const auto recs = read_scene_file(scenes_path);

    std::map<std::string, ScenePrediction> preds;
    if (!preds_path.empty())
        for (const ScenePrediction& p : read_predictions(preds_path)) preds[p.source_id] = p;

    std::unique_ptr<GraspModel> model;
    if (opts.heatmap) {
        if (opts.checkpoint.empty())
            throw UsageError("render: --heatmap needs a checkpoint (-w)");
        model = std::make_unique<GraspModel>(cfg.model, cfg.head);
        NamedParams params = model->params();
        load_checkpoint_into(opts.checkpoint, params, config_hash(cfg));
    }

    for (const SceneRecord& rec : recs) {
        LabeledScene scene = load_scene(rec, cfg.data.base_dir);
        if (opts.heatmap) scene = resize_to_input(scene, cfg.model.image_size);
        ImageU8 img = tensor_to_image(scene.image);

        if (model) {
            const DenseGraspMap map = model->forward(scene.image);
            const int64_t gh = map.grid_h(), gw = map.grid_w();
            Tensor heat = Tensor::zeros({gh, gw});
            const int64_t hw = gh * gw;
            const double* src = map.map.data() + (map.map.dim(0) - 1) * hw;
            for (int64_t i = 0; i < hw; ++i)
                heat.data()[i] = 1.0 / (1.0 + std::exp(-src[i]));
            overlay_heatmap(img, heat, map.stride);
        }

        auto it = preds.find(rec.source_id);
        if (it != preds.end())
            for (const GraspRect& g : it->second.grasps) {
                const Rgb color = opts.color_by == "category"
                                      ? category_color(g.category)
                                      : angle_bin_color(bin_angle(g.theta, cfg.head.k_angle),
                                                        cfg.head.k_angle);
                draw_grasp(img, g, color);
            }
        save_png(out_dir + "/" + rec.source_id + ".png", img);
    }
}

}  // namespace gk
