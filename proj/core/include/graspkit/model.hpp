#pragma once

#include <random>

#include "graspkit/decoder.hpp"
#include "graspkit/encoder.hpp"
#include "graspkit/tensor.hpp"

namespace gk {

/// Encoder + decoder pair with a stable parameter naming scheme.
class GraspModel {
public:
    GraspModel(const EncoderConfig& enc_cfg, const DecoderConfig& dec_cfg)
        : encoder_(enc_cfg),
          decoder_(dec_cfg, {enc_cfg.channels(1), enc_cfg.channels(2), enc_cfg.channels(3)}) {}

    void init(std::mt19937_64& rng) {
        encoder_.init(rng);
        decoder_.init(rng);
    }

    NamedParams params() const {
        NamedParams out;
        encoder_.collect_params(out, "enc");
        decoder_.collect_params(out, "dec");
        return out;
    }

    int64_t num_params() const {
        int64_t n = 0;
        for (const auto& [name, t] : params()) n += t.numel();
        return n;
    }

    DenseGraspMap forward(const Tensor& image) const {
        return decoder_.forward(encoder_.forward(image));
    }

    const SwinEncoder& encoder() const { return encoder_; }
    const GraspDecoder& decoder() const { return decoder_; }

private:
    SwinEncoder encoder_;
    GraspDecoder decoder_;
};

}  // namespace gk
