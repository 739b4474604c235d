#pragma once

#include <cstdint>
#include <string>

#include "graspkit/decoder.hpp"
#include "graspkit/encoder.hpp"

namespace gk {

/// Full run configuration, loaded from a single JSON file with sections
/// model / train / data / eval. Environment variables with the GRASPKIT_
/// prefix override paths only (GRASPKIT_SCENES, GRASPKIT_BASE_DIR,
/// GRASPKIT_OUT_DIR).
struct RunConfig {
    EncoderConfig model;
    DecoderConfig head;

    struct Train {
        double lr = 0.001;
        double momentum = 0.99;
        int batch_size = 8;
        int epochs = 10;
        int lr_decay_every_epochs = 10;
        double lr_decay_factor = 10.0;
        double graspability_pos_weight = 1.0;
        uint64_t seed = 0;
        std::string out_dir = "runs/default";
    } train;

    struct Synth {
        int count = 16;
        int objects = 1;
        uint64_t seed = 7;
    };

    struct Data {
        bool use_synth = true;
        Synth synth;
        std::string scenes;    // JSON-lines path when use_synth is false
        std::string base_dir;  // resolves relative image paths
        bool augment = true;
    } data;

    struct Eval {
        double score_threshold = 0.5;
        double nms_iou = 0.25;
        double angle_tol_deg = 30.0;
        double jaccard_thr = 0.25;
    } eval;

    void validate() const;  // throws UsageError on bad values
    /// Effective learning rate for an epoch under the divide-by-factor
    /// schedule.
    double lr_at_epoch(int epoch) const;
};

RunConfig config_from_json(const std::string& text);
RunConfig load_config(const std::string& path);  // applies GRASPKIT_* overrides
std::string config_to_json(const RunConfig& cfg);

/// FNV-1a hash of the canonical model+head sections; embedded in checkpoints
/// so weight/architecture mismatches fail loudly.
std::string config_hash(const RunConfig& cfg);

}  // namespace gk
