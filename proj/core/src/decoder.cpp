#include "graspkit/decoder.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "graspkit/angles.hpp"

namespace gk {

void DecoderConfig::validate() const {
    if (fusion_channels < 1) throw std::invalid_argument("DecoderConfig: fusion_channels < 1");
    if (k_angle < 2) throw std::invalid_argument("DecoderConfig: k_angle must be >= 2");
    if (k_obj < 1) throw std::invalid_argument("DecoderConfig: k_obj must be >= 1");
}

std::vector<GraspCandidate> decode_candidates(const DenseGraspMap& m, double score_threshold) {
    const int64_t ka = m.k_angle, ko = m.k_obj;
    const int64_t h = m.grid_h(), w = m.grid_w();
    const double stride = static_cast<double>(m.stride);
    const double* p = m.map.data();
    auto ch = [&](int64_t c, int64_t i, int64_t j) { return p[(c * h + i) * w + j]; };

    std::vector<GraspCandidate> out;
    for (int64_t i = 0; i < h; ++i)
        for (int64_t j = 0; j < w; ++j) {
            const double logit = ch(4 + ka + ko, i, j);
            const double score = 1.0 / (1.0 + std::exp(-logit));
            if (score < score_threshold) continue;
            GraspCandidate c;
            c.score = score;
            const double x = (static_cast<double>(j) + 0.5 + std::tanh(ch(0, i, j))) * stride;
            const double y = (static_cast<double>(i) + 0.5 + std::tanh(ch(1, i, j))) * stride;
            const double bw = std::exp(ch(2, i, j)) * stride;
            const double bh = std::exp(ch(3, i, j)) * stride;
            int64_t best_a = 0;
            for (int64_t a = 1; a < ka; ++a)
                if (ch(4 + a, i, j) > ch(4 + best_a, i, j)) best_a = a;
            int64_t best_o = 0;
            for (int64_t o = 1; o < ko; ++o)
                if (ch(4 + ka + o, i, j) > ch(4 + ka + best_o, i, j)) best_o = o;
            c.angle_class = best_a;
            c.rect = make_rect(x, y, bw, bh, bin_center_deg(best_a, ka),
                               static_cast<int>(best_o), score);
            out.push_back(std::move(c));
        }
    std::stable_sort(out.begin(), out.end(), [](const GraspCandidate& a, const GraspCandidate& b) {
        return a.score > b.score;
    });
    return out;
}

std::vector<GraspCandidate> nms_filter(const std::vector<GraspCandidate>& cands,
                                       double iou_threshold, bool category_aware) {
    std::vector<GraspCandidate> kept;
    for (const GraspCandidate& c : cands) {
        bool suppressed = false;
        for (const GraspCandidate& k : kept) {
            if (category_aware && k.rect.category != c.rect.category) continue;
            if (jaccard(k.rect, c.rect) > iou_threshold) {
                suppressed = true;
                break;
            }
        }
        if (!suppressed) kept.push_back(c);
    }
    return kept;
}

GraspDecoder::GraspDecoder(DecoderConfig cfg, const std::array<int64_t, 3>& pyramid_channels)
    : cfg_(cfg) {
    cfg_.validate();
    const int64_t cf = cfg_.fusion_channels;
    for (int i = 0; i < 3; ++i) {
        lat_w_[static_cast<size_t>(i)] =
            Tensor::zeros({cf, pyramid_channels[static_cast<size_t>(i)], 1, 1});
        lat_b_[static_cast<size_t>(i)] = Tensor::zeros({cf});
    }
    head_w1_ = Tensor::zeros({cf, cf, 3, 3});
    head_b1_ = Tensor::zeros({cf});
    head_w2_ = Tensor::zeros({cf, cf, 3, 3});
    head_b2_ = Tensor::zeros({cf});
    head_w3_ = Tensor::zeros({cfg_.map_channels(), cf, 1, 1});
    head_b3_ = Tensor::zeros({cfg_.map_channels()});
}

void GraspDecoder::init(std::mt19937_64& rng) {
    for (auto& w : lat_w_) fill_trunc_normal(w, rng, 0.05);
    fill_trunc_normal(head_w1_, rng, 0.05);
    fill_trunc_normal(head_w2_, rng, 0.05);
    fill_trunc_normal(head_w3_, rng, 0.05);
}

void GraspDecoder::collect_params(NamedParams& out, const std::string& prefix) const {
    for (int i = 0; i < 3; ++i) {
        out.emplace_back(prefix + ".lat" + std::to_string(i) + ".w",
                         lat_w_[static_cast<size_t>(i)]);
        out.emplace_back(prefix + ".lat" + std::to_string(i) + ".b",
                         lat_b_[static_cast<size_t>(i)]);
    }
    out.emplace_back(prefix + ".head.w1", head_w1_);
    out.emplace_back(prefix + ".head.b1", head_b1_);
    out.emplace_back(prefix + ".head.w2", head_w2_);
    out.emplace_back(prefix + ".head.b2", head_b2_);
    out.emplace_back(prefix + ".head.w3", head_w3_);
    out.emplace_back(prefix + ".head.b3", head_b3_);
}

Tensor GraspDecoder::fuse_scales(const FeaturePyramid& pyramid) const {
    Tensor fused;
    for (int i = 0; i < 3; ++i) {
        const Tensor& m = pyramid.maps[static_cast<size_t>(i)];
        if (!m.defined()) throw std::invalid_argument("fuse_scales: pyramid scale missing");
        Tensor x = reshape(m, {1, m.dim(0), m.dim(1), m.dim(2)});
        x = conv2d(x, lat_w_[static_cast<size_t>(i)], 1, 0);
        x = add(x, reshape(lat_b_[static_cast<size_t>(i)], {1, cfg_.fusion_channels, 1, 1}));
        const int64_t up = pyramid.strides[static_cast<size_t>(i)] / pyramid.strides[0];
        if (up > 1) x = upsample_nearest(x, up);
        fused = fused.defined() ? add(fused, x) : x;
    }
    return fused;  // [1, C_f, H', W'] at stride 8
}

Tensor GraspDecoder::head(const Tensor& fused) const {
    Tensor x = conv2d(fused, head_w1_, 1, 1);
    x = gelu(add(x, reshape(head_b1_, {1, cfg_.fusion_channels, 1, 1})));
    x = conv2d(x, head_w2_, 1, 1);
    x = gelu(add(x, reshape(head_b2_, {1, cfg_.fusion_channels, 1, 1})));
    x = conv2d(x, head_w3_, 1, 0);
    x = add(x, reshape(head_b3_, {1, cfg_.map_channels(), 1, 1}));
    return x;
}

DenseGraspMap GraspDecoder::forward(const FeaturePyramid& pyramid) const {
    const Tensor out = head(fuse_scales(pyramid));
    DenseGraspMap m;
    m.map = reshape(out, {out.dim(1), out.dim(2), out.dim(3)});
    m.k_angle = cfg_.k_angle;
    m.k_obj = cfg_.k_obj;
    m.stride = pyramid.strides[0];
    return m;
}

}  // namespace gk
