#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>
#include <vector>

#include "graspkit/checkpoint.hpp"
#include "graspkit/error.hpp"
#include "graspkit/pipeline.hpp"
#include "helpers/micro_config.hpp"

using namespace gk;
namespace fs = std::filesystem;

namespace {

std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

struct TmpDir {
    fs::path path;
    explicit TmpDir(const std::string& name) : path(fs::temp_directory_path() / name) {
        fs::remove_all(path);
        fs::create_directories(path);
    }
    ~TmpDir() { fs::remove_all(path); }
    std::string str(const std::string& sub = "") const {
        return (sub.empty() ? path : path / sub).string();
    }
};

}  // namespace

TEST_CASE("config json round trip, defaults, and validation") {
    RunConfig cfg = gktest::micro_config();
    const RunConfig back = config_from_json(config_to_json(cfg));
    CHECK(back.model.image_size == cfg.model.image_size);
    CHECK(back.train.lr == cfg.train.lr);
    CHECK(back.data.synth.count == cfg.data.synth.count);
    CHECK(config_hash(back) == config_hash(cfg));

    // defaults mirror the training protocol
    RunConfig def;
    CHECK(def.train.lr == 0.001);
    CHECK(def.train.momentum == 0.99);
    CHECK(def.train.lr_decay_every_epochs == 10);
    CHECK(def.train.lr_decay_factor == 10.0);
    CHECK(def.eval.score_threshold == 0.5);
    CHECK(def.eval.nms_iou == 0.25);

    CHECK_THROWS_AS(config_from_json(R"({"train":{"lr":-1}})"), UsageError);
    CHECK_THROWS_AS(config_from_json(R"({"train":{"momentum":1.5}})"), UsageError);
    CHECK_THROWS_AS(config_from_json("not json"), UsageError);
    CHECK_THROWS_AS(
        config_from_json(R"({"data":{"scenes":"x.jsonl","synth":{"count":4}}})"), UsageError);

    // hash tracks the architecture only
    RunConfig other = cfg;
    other.train.lr = 0.5;
    CHECK(config_hash(other) == config_hash(cfg));
    other.head.k_angle = 9;
    CHECK(config_hash(other) != config_hash(cfg));
}

TEST_CASE("lr schedule divides by the factor every N epochs") {
    RunConfig cfg;
    CHECK(cfg.lr_at_epoch(0) == doctest::Approx(0.001));
    CHECK(cfg.lr_at_epoch(9) == doctest::Approx(0.001));
    CHECK(cfg.lr_at_epoch(10) == doctest::Approx(0.0001));
    CHECK(cfg.lr_at_epoch(25) == doctest::Approx(0.00001));
}

TEST_CASE("training smoke run: objective decreases over the first 20 steps") {
    TmpDir tmp("gk_test_train_smoke");
    RunConfig cfg = gktest::tiny_config();
    cfg.train.epochs = 20;  // full batch: one step per epoch
    cfg.train.batch_size = cfg.data.synth.count;
    cfg.train.out_dir = tmp.str("run");

    std::vector<double> losses;
    const TrainResult res = train_run(cfg, [&](int, const GraspModel&, double obj) {
        losses.push_back(obj);
        return true;
    });
    REQUIRE(res.steps == 20);
    REQUIRE(losses.size() == 20);
    CHECK(losses.back() < losses.front());
    int improving = 0;
    for (size_t i = 1; i < losses.size(); ++i)
        if (losses[i] < losses[i - 1]) ++improving;
    CHECK(improving >= 15);  // full-batch descent, near-monotone

    CHECK(fs::exists(res.checkpoint_best));
    CHECK(fs::exists(res.checkpoint_final));
    CHECK(fs::exists(res.metrics_csv));

    // metrics csv: header + one row per step with the lr column
    std::ifstream csv(res.metrics_csv);
    std::string line;
    std::getline(csv, line);
    CHECK(line == "step,lr,grasp_box,angle,obj_class,graspability,total");
    int rows = 0;
    while (std::getline(csv, line)) ++rows;
    CHECK(rows == 20);
}

TEST_CASE("lr schedule lands in the metrics csv") {
    TmpDir tmp("gk_test_lr_rows");
    RunConfig cfg = gktest::tiny_config();
    cfg.train.lr = 0.001;
    cfg.train.lr_decay_every_epochs = 10;
    cfg.train.lr_decay_factor = 10.0;
    cfg.train.epochs = 11;
    cfg.train.batch_size = cfg.data.synth.count;  // one step per epoch
    cfg.train.out_dir = tmp.str("run");
    train_run(cfg);

    std::ifstream csv(cfg.train.out_dir + "/metrics.csv");
    std::string line;
    std::getline(csv, line);
    std::vector<double> lrs;
    while (std::getline(csv, line)) {
        const size_t c1 = line.find(',');
        const size_t c2 = line.find(',', c1 + 1);
        lrs.push_back(std::stod(line.substr(c1 + 1, c2 - c1 - 1)));
    }
    REQUIRE(lrs.size() == 11);
    CHECK(lrs[0] == doctest::Approx(0.001));
    CHECK(lrs[9] == doctest::Approx(0.001));
    CHECK(lrs[10] == doctest::Approx(0.0001));  // epoch 10 logs lr/10
}

TEST_CASE("same seed reproduces the metrics csv byte for byte") {
    TmpDir tmp("gk_test_det");
    RunConfig cfg = gktest::tiny_config();
    cfg.train.epochs = 6;
    cfg.data.augment = true;  // exercise the augmentation draw path
    cfg.train.out_dir = tmp.str("a");
    train_run(cfg);
    const std::string a = slurp(cfg.train.out_dir + "/metrics.csv");
    cfg.train.out_dir = tmp.str("b");
    train_run(cfg);
    const std::string b = slurp(cfg.train.out_dir + "/metrics.csv");
    CHECK(a == b);
    CHECK_FALSE(a.empty());
}

TEST_CASE("diverging run aborts with the step number") {
    TmpDir tmp("gk_test_nan");
    RunConfig cfg = gktest::tiny_config();
    cfg.train.lr = 1e7;  // guaranteed overflow
    cfg.train.epochs = 50;
    cfg.train.out_dir = tmp.str("run");
    CHECK_THROWS_WITH_AS(train_run(cfg), doctest::Contains("step"), NumericError);
}

TEST_CASE("predict/eval round trip through files") {
    TmpDir tmp("gk_test_predict");
    RunConfig cfg = gktest::tiny_config();
    cfg.train.epochs = 2;
    cfg.train.out_dir = tmp.str("run");
    const TrainResult res = train_run(cfg);

    // dataset on disk
    const std::string scenes = synth_run(cfg.data.synth.seed, cfg.data.synth.count,
                                         cfg.data.synth.objects, cfg.model.image_size,
                                         tmp.str("scenes"));
    cfg.data.base_dir = tmp.str("scenes");
    const std::string preds_path = tmp.str("preds.jsonl");
    predict_run(cfg, res.checkpoint_final, scenes, preds_path);

    const auto preds = read_predictions(preds_path);
    CHECK(preds.size() == static_cast<size_t>(cfg.data.synth.count));
    // serialization round trip is lossless
    const std::string preds2_path = tmp.str("preds2.jsonl");
    write_predictions(preds2_path, preds);
    CHECK(slurp(preds_path) == slurp(preds2_path));

    // checkpoint from a different architecture is rejected with the hash
    RunConfig other = cfg;
    other.head.k_obj = 2;
    CHECK_THROWS_AS(predict_run(other, res.checkpoint_final, scenes, tmp.str("x.jsonl")),
                    DataError);

    // ground truth as predictions scores accuracy 1.0
    const auto recs = read_scene_file(scenes);
    std::vector<ScenePrediction> perfect;
    for (const auto& r : recs) perfect.push_back({r.source_id, r.grasps});
    const std::string gt_preds = tmp.str("gt_preds.jsonl");
    write_predictions(gt_preds, perfect);
    const EvalReport rep = eval_run(scenes, gt_preds, "single");
    CHECK(rep.accuracy == doctest::Approx(1.0));
}

TEST_CASE("empty scene list produces an empty but valid prediction file") {
    TmpDir tmp("gk_test_empty");
    std::ofstream(tmp.str("empty.jsonl")).close();
    RunConfig cfg = gktest::tiny_config();
    cfg.train.epochs = 1;
    cfg.train.out_dir = tmp.str("run");
    const TrainResult res = train_run(cfg);
    predict_run(cfg, res.checkpoint_final, tmp.str("empty.jsonl"), tmp.str("out.jsonl"));
    CHECK(read_predictions(tmp.str("out.jsonl")).empty());
}
