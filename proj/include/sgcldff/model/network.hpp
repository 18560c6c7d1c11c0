#pragma once

#include <array>
#include <memory>
#include <string>

#include "sgcldff/core/checkpoint.hpp"
#include "sgcldff/core/config.hpp"
#include "sgcldff/model/layers.hpp"

namespace sgcldff {

// The four backbone stage outputs plus the fused map.
struct FeaturePyramid {
    std::array<Tensor, 4> stages;  // [B, 2^i*C, H/2^(i+2), W/2^(i+2)]
    Tensor fused;                  // [B, D, H/4, W/4]
};

struct ModelOutput {
    Tensor seg_logits;  // [B, 1, H, W]
    Tensor cls_logits;  // [B, K]
    FeaturePyramid pyramid;
    Tensor attention;   // [B, H/4, W/4], min-max normalized channel mean of fused
};

// Hybrid backbone (conv stem + per-stage conv/windowed-attention blocks with
// patch merging), grouped cross-layer fusion, and the two heads. One
// instance holds the weights, their gradients, and the forward caches; a
// forward followed by backward accumulates parameter gradients.
class Model {
public:
    explicit Model(const ExperimentConfig& cfg);

    void init_weights(Rng& rng);

    ModelOutput forward(const Tensor& x);  // x: [B, 4, S, S]
    // d_attention may be empty (treated as zero).
    void backward(const Tensor& d_seg_logits, const Tensor& d_cls_logits,
                  const Tensor& d_attention);

    // Gradients of a scalar in cls-logit space w.r.t. the fused map and the
    // deepest stage; requires a prior forward. Accumulates parameter grads
    // as a side effect (call zero_grad afterwards when training).
    struct FeatureGrads {
        Tensor d_fused;
        Tensor d_stage3;
    };
    FeatureGrads feature_gradients(const Tensor& d_cls_logits);

    void zero_grad();
    const ParamRefs& params() const { return params_; }
    std::size_t param_count() const;

    NamedArrays export_weights() const;
    void import_weights(const NamedArrays& arrays);  // throws CheckpointError on mismatch

    const ExperimentConfig& config() const { return cfg_; }

private:
    ExperimentConfig cfg_;
    int stage_channels_[4];

    Conv2d stem1_, stem2_;
    std::array<std::unique_ptr<ConvBlock>, 4> conv_blocks_;
    std::array<std::unique_ptr<AttnBlock>, 4> attn_blocks_;
    std::array<std::unique_ptr<PatchMerge>, 3> merges_;
    std::array<std::unique_ptr<Conv2d>, 4> fusion_proj_;
    Conv2d refine1_, refine2_, refine3_;
    Conv2d seg1_, seg2_, seg_out_;
    Linear cls_fc_;

    ParamRefs params_;

    // forward caches
    int b_ = 0;
    Tensor x_in_;
    Tensor stem1_pre_, stem2_pre_;
    std::array<Tensor, 4> stage_in_;   // input to each stage's conv block
    std::array<Tensor, 4> stage_out_;  // output of each stage (after attention)
    std::array<Tensor, 4> proj_out_;   // projected (pre-upsample) per stage
    Tensor fuse_sum_;
    Tensor refine1_pre_, refine2_pre_;
    Tensor fused_;
    Tensor seg1_pre_, seg2_pre_;
    Tensor gap_fused_, gap_stage3_;
    MinMaxNorm attn_norm_;

    Tensor fusion_forward();
    // Distributes d_fused to the four stage gradients (param grads too).
    std::array<Tensor, 4> fusion_backward(const Tensor& d_fused);
    Tensor cls_forward();
    // Returns (d_fused, d_stage3) for a cls-logit gradient.
    FeatureGrads cls_backward(const Tensor& d_cls);
    Tensor seg_forward();
    Tensor seg_backward(const Tensor& d_seg);
};

// Convenience wrapper matching the evaluation path: build, import, forward.
ModelOutput model_forward(Model& model, const Tensor& x);

}  // namespace sgcldff
