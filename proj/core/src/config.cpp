#include "graspkit/config.hpp"

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "graspkit/error.hpp"

namespace gk {

void RunConfig::validate() const {
    try {
        model.validate();
        head.validate();
    } catch (const std::invalid_argument& e) {
        throw UsageError(std::string("config: ") + e.what());
    }
    if (!(train.lr > 0)) throw UsageError("config: train.lr must be positive");
    if (train.momentum < 0 || train.momentum >= 1)
        throw UsageError("config: train.momentum must be in [0, 1)");
    if (train.batch_size < 1) throw UsageError("config: train.batch_size must be >= 1");
    if (train.epochs < 1) throw UsageError("config: train.epochs must be >= 1");
    if (train.lr_decay_every_epochs < 1)
        throw UsageError("config: train.lr_decay_every_epochs must be >= 1");
    if (!(train.lr_decay_factor >= 1))
        throw UsageError("config: train.lr_decay_factor must be >= 1");
    if (!(train.graspability_pos_weight > 0))
        throw UsageError("config: train.graspability_pos_weight must be positive");
    if (data.use_synth) {
        if (data.synth.count < 1) throw UsageError("config: data.synth.count must be >= 1");
        if (data.synth.objects < 1) throw UsageError("config: data.synth.objects must be >= 1");
    } else if (data.scenes.empty()) {
        throw UsageError("config: data.scenes path required when no synth section is given");
    }
    if (eval.score_threshold < 0 || eval.score_threshold > 1)
        throw UsageError("config: eval.score_threshold must be in [0, 1]");
    if (eval.nms_iou < 0 || eval.nms_iou > 1)
        throw UsageError("config: eval.nms_iou must be in [0, 1]");
    if (eval.angle_tol_deg <= 0 || eval.angle_tol_deg > 90)
        throw UsageError("config: eval.angle_tol_deg must be in (0, 90]");
    if (eval.jaccard_thr < 0 || eval.jaccard_thr >= 1)
        throw UsageError("config: eval.jaccard_thr must be in [0, 1)");
}

double RunConfig::lr_at_epoch(int epoch) const {
    const int drops = epoch / train.lr_decay_every_epochs;
    return train.lr / std::pow(train.lr_decay_factor, static_cast<double>(drops));
}

namespace {

template <typename T>
void read_into(const nlohmann::json& j, const char* key, T& out) {
    if (j.contains(key)) {
        try {
            out = j.at(key).get<T>();
        } catch (const nlohmann::json::exception&) {
            throw UsageError(std::string("config: field '") + key + "' has the wrong type");
        }
    }
}

}  // namespace

RunConfig config_from_json(const std::string& text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        throw UsageError(std::string("config: bad JSON: ") + e.what());
    }
    RunConfig cfg;
    if (j.contains("model")) {
        const auto& m = j["model"];
        read_into(m, "image_size", cfg.model.image_size);
        read_into(m, "patch_size", cfg.model.patch_size);
        read_into(m, "embed_dim", cfg.model.embed_dim);
        read_into(m, "window", cfg.model.window);
        read_into(m, "mlp_ratio", cfg.model.mlp_ratio);
        if (m.contains("depths")) {
            const auto v = m.at("depths").get<std::vector<int64_t>>();
            if (v.size() != 4) throw UsageError("config: model.depths must list 4 stages");
            std::copy(v.begin(), v.end(), cfg.model.depths.begin());
        }
        if (m.contains("num_heads")) {
            const auto v = m.at("num_heads").get<std::vector<int64_t>>();
            if (v.size() != 4) throw UsageError("config: model.num_heads must list 4 stages");
            std::copy(v.begin(), v.end(), cfg.model.num_heads.begin());
        }
        read_into(m, "k_angle", cfg.head.k_angle);
        read_into(m, "k_obj", cfg.head.k_obj);
        read_into(m, "fusion_channels", cfg.head.fusion_channels);
    }
    if (j.contains("train")) {
        const auto& t = j["train"];
        read_into(t, "lr", cfg.train.lr);
        read_into(t, "momentum", cfg.train.momentum);
        read_into(t, "batch_size", cfg.train.batch_size);
        read_into(t, "epochs", cfg.train.epochs);
        read_into(t, "lr_decay_every_epochs", cfg.train.lr_decay_every_epochs);
        read_into(t, "lr_decay_factor", cfg.train.lr_decay_factor);
        read_into(t, "graspability_pos_weight", cfg.train.graspability_pos_weight);
        read_into(t, "seed", cfg.train.seed);
        read_into(t, "out_dir", cfg.train.out_dir);
    }
    if (j.contains("data")) {
        const auto& d = j["data"];
        if (d.contains("scenes") && d.contains("synth"))
            throw UsageError("config: data.scenes and data.synth are mutually exclusive");
        read_into(d, "augment", cfg.data.augment);
        read_into(d, "base_dir", cfg.data.base_dir);
        if (d.contains("scenes")) {
            cfg.data.use_synth = false;
            read_into(d, "scenes", cfg.data.scenes);
        }
        if (d.contains("synth")) {
            cfg.data.use_synth = true;
            const auto& s = d["synth"];
            read_into(s, "count", cfg.data.synth.count);
            read_into(s, "objects", cfg.data.synth.objects);
            read_into(s, "seed", cfg.data.synth.seed);
        }
    }
    if (j.contains("eval")) {
        const auto& e = j["eval"];
        read_into(e, "score_threshold", cfg.eval.score_threshold);
        read_into(e, "nms_iou", cfg.eval.nms_iou);
        read_into(e, "angle_tol_deg", cfg.eval.angle_tol_deg);
        read_into(e, "jaccard_thr", cfg.eval.jaccard_thr);
    }
    cfg.validate();
    return cfg;
}

RunConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw UsageError("cannot open config: " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    RunConfig cfg = config_from_json(ss.str());
    if (const char* v = std::getenv("GRASPKIT_SCENES")) {
        cfg.data.scenes = v;
        cfg.data.use_synth = false;
    }
    if (const char* v = std::getenv("GRASPKIT_BASE_DIR")) cfg.data.base_dir = v;
    if (const char* v = std::getenv("GRASPKIT_OUT_DIR")) cfg.train.out_dir = v;
    cfg.validate();
    return cfg;
}

std::string config_to_json(const RunConfig& cfg) {
    nlohmann::json j;
    j["model"] = {{"image_size", cfg.model.image_size},
                  {"patch_size", cfg.model.patch_size},
                  {"embed_dim", cfg.model.embed_dim},
                  {"depths", cfg.model.depths},
                  {"num_heads", cfg.model.num_heads},
                  {"window", cfg.model.window},
                  {"mlp_ratio", cfg.model.mlp_ratio},
                  {"k_angle", cfg.head.k_angle},
                  {"k_obj", cfg.head.k_obj},
                  {"fusion_channels", cfg.head.fusion_channels}};
    j["train"] = {{"lr", cfg.train.lr},
                  {"momentum", cfg.train.momentum},
                  {"batch_size", cfg.train.batch_size},
                  {"epochs", cfg.train.epochs},
                  {"lr_decay_every_epochs", cfg.train.lr_decay_every_epochs},
                  {"lr_decay_factor", cfg.train.lr_decay_factor},
                  {"graspability_pos_weight", cfg.train.graspability_pos_weight},
                  {"seed", cfg.train.seed},
                  {"out_dir", cfg.train.out_dir}};
    if (cfg.data.use_synth)
        j["data"] = {{"synth",
                      {{"count", cfg.data.synth.count},
                       {"objects", cfg.data.synth.objects},
                       {"seed", cfg.data.synth.seed}}},
                     {"augment", cfg.data.augment}};
    else
        j["data"] = {{"scenes", cfg.data.scenes},
                     {"base_dir", cfg.data.base_dir},
                     {"augment", cfg.data.augment}};
    j["eval"] = {{"score_threshold", cfg.eval.score_threshold},
                 {"nms_iou", cfg.eval.nms_iou},
                 {"angle_tol_deg", cfg.eval.angle_tol_deg},
                 {"jaccard_thr", cfg.eval.jaccard_thr}};
    return j.dump(2);
}

std::string config_hash(const RunConfig& cfg) {
    nlohmann::json arch = {{"image_size", cfg.model.image_size},
                           {"patch_size", cfg.model.patch_size},
                           {"embed_dim", cfg.model.embed_dim},
                           {"depths", cfg.model.depths},
                           {"num_heads", cfg.model.num_heads},
                           {"window", cfg.model.window},
                           {"mlp_ratio", cfg.model.mlp_ratio},
                           {"k_angle", cfg.head.k_angle},
                           {"k_obj", cfg.head.k_obj},
                           {"fusion_channels", cfg.head.fusion_channels}};
    const std::string s = arch.dump();
    uint64_t h = 1469598103934665603ull;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ull;
    }
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
    return std::string(buf);
}

}  // namespace gk
