// graspkit: train / predict / eval / render / synth for the grasp detection
// pipeline. Exit codes: 0 ok, 1 usage, 2 data error, 3 numeric failure.

#include <fstream>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "graspkit/config.hpp"
#include "graspkit/error.hpp"
#include "graspkit/eval.hpp"
#include "graspkit/pipeline.hpp"

namespace {

int run(int argc, char** argv) {
    CLI::App app{"graspkit - transformer-encoder / convolutional-decoder grasp detection"};
    app.require_subcommand(1);

    // train
    std::string train_cfg;
    auto* train = app.add_subcommand("train", "train a model from a JSON config");
    train->add_option("-c,--config", train_cfg, "run config JSON")->required();

    // predict
    std::string pr_cfg, pr_ckpt, pr_scenes, pr_out;
    auto* predict = app.add_subcommand("predict", "run inference over a scene list");
    predict->add_option("-c,--config", pr_cfg, "run config JSON")->required();
    predict->add_option("-w,--weights", pr_ckpt, "checkpoint file")->required();
    predict->add_option("-i,--input", pr_scenes, "scenes JSON-lines")->required();
    predict->add_option("-o,--output", pr_out, "predictions JSON-lines")->required();

    // eval
    std::string ev_gt, ev_pred, ev_mode = "single", ev_out;
    auto* eval = app.add_subcommand("eval", "score predictions against ground truth");
    eval->add_option("-g,--ground-truth", ev_gt, "scenes JSON-lines")->required();
    eval->add_option("-p,--predictions", ev_pred, "predictions JSON-lines")->required();
    eval->add_option("--mode", ev_mode, "single (top-1 accuracy) or multi (mAPg)")
        ->check(CLI::IsMember({"single", "multi"}));
    eval->add_option("-o,--output", ev_out, "write the JSON report here");

    // render
    std::string rd_cfg, rd_scenes, rd_preds, rd_ckpt, rd_out, rd_color = "angle";
    bool rd_heat = false;
    auto* render = app.add_subcommand("render", "draw predictions and heatmaps");
    render->add_option("-c,--config", rd_cfg, "run config JSON")->required();
    render->add_option("-i,--input", rd_scenes, "scenes JSON-lines")->required();
    render->add_option("-p,--predictions", rd_preds, "predictions JSON-lines");
    render->add_option("-w,--weights", rd_ckpt, "checkpoint (for --heatmap)");
    render->add_flag("--heatmap", rd_heat, "overlay the graspability heatmap");
    render->add_option("--color-by", rd_color, "rectangle color key")
        ->check(CLI::IsMember({"angle", "category"}));
    render->add_option("-o,--output", rd_out, "output directory")->required();

    // synth
    uint64_t sy_seed = 0;
    int sy_count = 16, sy_objects = 1;
    int64_t sy_canvas = 224;
    std::string sy_out;
    auto* synth = app.add_subcommand("synth", "generate a synthetic scene dataset");
    synth->add_option("--seed", sy_seed, "base RNG seed");
    synth->add_option("--count", sy_count, "number of scenes")->check(CLI::PositiveNumber);
    synth->add_option("--objects", sy_objects, "objects per scene")->check(CLI::PositiveNumber);
    synth->add_option("--canvas", sy_canvas, "image extent in pixels")->check(CLI::PositiveNumber);
    synth->add_option("-o,--output", sy_out, "output directory")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        app.exit(e);
        return 0;
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 1;
    }

    if (*train) {
        const gk::RunConfig cfg = gk::load_config(train_cfg);
        const gk::TrainResult res = gk::train_run(cfg);
        std::cout << "trained " << res.steps << " steps; best epoch loss " << res.best_epoch_loss
                  << "\ncheckpoints: " << res.checkpoint_best << ", " << res.checkpoint_final
                  << "\nmetrics: " << res.metrics_csv << "\n";
    } else if (*predict) {
        const gk::RunConfig cfg = gk::load_config(pr_cfg);
        gk::predict_run(cfg, pr_ckpt, pr_scenes, pr_out);
        std::cout << "predictions written to " << pr_out << "\n";
    } else if (*eval) {
        const gk::EvalReport rep = gk::eval_run(ev_gt, ev_pred, ev_mode);
        std::cout << gk::report_to_table(rep);
        if (!ev_out.empty()) {
            std::ofstream out(ev_out, std::ios::trunc);
            if (!out) throw gk::DataError("cannot open report output: " + ev_out);
            out << gk::report_to_json(rep) << "\n";
        } else {
            std::cout << gk::report_to_json(rep) << "\n";
        }
    } else if (*render) {
        const gk::RunConfig cfg = gk::load_config(rd_cfg);
        gk::RenderOptions opts;
        opts.color_by = rd_color;
        opts.heatmap = rd_heat;
        opts.checkpoint = rd_ckpt;
        gk::render_run(cfg, rd_scenes, rd_preds, opts, rd_out);
        std::cout << "rendered into " << rd_out << "\n";
    } else if (*synth) {
        const std::string list = gk::synth_run(sy_seed, sy_count, sy_objects, sy_canvas, sy_out);
        std::cout << "scene list: " << list << "\n";
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    try {
        return run(argc, argv);
    } catch (const gk::UsageError& e) {
        std::cerr << "usage error: " << e.what() << "\n";
        return 1;
    } catch (const gk::NumericError& e) {
        std::cerr << "numeric failure: " << e.what() << "\n";
        return 3;
    } catch (const gk::DataError& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return 2;
    } catch (const std::invalid_argument& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
}
