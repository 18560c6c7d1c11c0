#include "sgcldff/model/network.hpp"

#include <cmath>

namespace sgcldff {

Model::Model(const ExperimentConfig& cfg)
    : cfg_(cfg),
      stem1_("backbone.stem.conv1", 4, cfg.base_channels, 3, 2, 1),
      stem2_("backbone.stem.conv2", cfg.base_channels, cfg.base_channels, 3, 2, 1),
      refine1_("fusion.refine.conv1", cfg.fusion_dim, cfg.fusion_dim, 1, 1, 0),
      refine2_("fusion.refine.conv2", cfg.fusion_dim, cfg.fusion_dim, 3, 1, 1,
               cfg.fusion_cardinality),
      refine3_("fusion.refine.conv3", cfg.fusion_dim, cfg.fusion_dim, 1, 1, 0),
      seg1_("seg_head.conv1", cfg.fusion_dim, cfg.fusion_dim / 2, 3, 1, 1),
      seg2_("seg_head.conv2", cfg.fusion_dim / 2, cfg.fusion_dim / 4, 3, 1, 1),
      seg_out_("seg_head.out", cfg.fusion_dim / 4, 1, 1, 1, 0),
      cls_fc_("cls_head.fc", cfg.fusion_dim + 8 * cfg.base_channels, cfg.num_classes) {
    cfg_.validate();
    for (int i = 0; i < 4; ++i) {
        stage_channels_[i] = cfg.base_channels << i;
        const std::string prefix = "backbone.stage" + std::to_string(i);
        conv_blocks_[static_cast<std::size_t>(i)] =
            std::make_unique<ConvBlock>(prefix + ".conv", stage_channels_[i]);
        attn_blocks_[static_cast<std::size_t>(i)] =
            std::make_unique<AttnBlock>(prefix + ".attn", stage_channels_[i], cfg.window_size);
        fusion_proj_[static_cast<std::size_t>(i)] = std::make_unique<Conv2d>(
            "fusion.proj" + std::to_string(i), stage_channels_[i], cfg.fusion_dim, 1, 1, 0,
            cfg.fusion_cardinality);
        if (i < 3)
            merges_[static_cast<std::size_t>(i)] = std::make_unique<PatchMerge>(
                "backbone.stage" + std::to_string(i) + ".merge", stage_channels_[i]);
    }

    stem1_.collect(params_);
    stem2_.collect(params_);
    for (int i = 0; i < 4; ++i) {
        conv_blocks_[static_cast<std::size_t>(i)]->collect(params_);
        attn_blocks_[static_cast<std::size_t>(i)]->collect(params_);
        if (i < 3) merges_[static_cast<std::size_t>(i)]->collect(params_);
    }
    for (int i = 0; i < 4; ++i) fusion_proj_[static_cast<std::size_t>(i)]->collect(params_);
    refine1_.collect(params_);
    refine2_.collect(params_);
    refine3_.collect(params_);
    seg1_.collect(params_);
    seg2_.collect(params_);
    seg_out_.collect(params_);
    cls_fc_.collect(params_);
}

void Model::init_weights(Rng& rng) {
    stem1_.init(rng);
    stem2_.init(rng);
    for (int i = 0; i < 4; ++i) {
        conv_blocks_[static_cast<std::size_t>(i)]->init(rng);
        attn_blocks_[static_cast<std::size_t>(i)]->init(rng);
        if (i < 3) merges_[static_cast<std::size_t>(i)]->init(rng);
        fusion_proj_[static_cast<std::size_t>(i)]->init(rng);
    }
    refine1_.init(rng);
    refine2_.init(rng);
    refine3_.init(rng);
    seg1_.init(rng);
    seg2_.init(rng);
    seg_out_.init(rng);
    cls_fc_.init(rng);
}

void Model::zero_grad() {
    for (Param* p : params_) p->grad.zero();
}

std::size_t Model::param_count() const {
    std::size_t n = 0;
    for (const Param* p : params_) n += p->value.numel();
    return n;
}

NamedArrays Model::export_weights() const {
    NamedArrays out;
    for (const Param* p : params_) out.emplace(p->name, p->value);
    return out;
}

void Model::import_weights(const NamedArrays& arrays) {
    if (arrays.size() != params_.size())
        throw CheckpointError("checkpoint: array count mismatch (expected " +
                              std::to_string(params_.size()) + ", got " +
                              std::to_string(arrays.size()) + ")");
    for (Param* p : params_) {
        auto it = arrays.find(p->name);
        if (it == arrays.end())
            throw CheckpointError("checkpoint: missing array '" + p->name + "'");
        if (it->second.shape() != p->value.shape())
            throw CheckpointError("checkpoint: shape mismatch for '" + p->name + "' (expected " +
                                  p->value.shape_str() + ", got " + it->second.shape_str() + ")");
        p->value = it->second;
        p->grad.zero();
    }
}

Tensor Model::fusion_forward() {
    const int target_h = stage_out_[0].dim(2), target_w = stage_out_[0].dim(3);
    if (cfg_.ablation == Ablation::NoFusion) {
        // Cross-layer fusion disabled: projected stage-1 features stand in.
        fuse_sum_ = Tensor({0});
        fused_ = fusion_proj_[0]->forward(stage_out_[0]);
        return fused_;
    }
    Tensor sum({b_, cfg_.fusion_dim, target_h, target_w});
    for (int i = 0; i < 4; ++i) {
        proj_out_[static_cast<std::size_t>(i)] =
            fusion_proj_[static_cast<std::size_t>(i)]->forward(stage_out_[static_cast<std::size_t>(i)]);
        Tensor up = bilinear_resize(proj_out_[static_cast<std::size_t>(i)], target_h, target_w);
        for (std::size_t j = 0; j < sum.numel(); ++j) sum[j] += up[j];
    }
    fuse_sum_ = sum;
    refine1_pre_ = refine1_.forward(sum);
    refine2_pre_ = refine2_.forward(relu(refine1_pre_));
    Tensor r3 = refine3_.forward(relu(refine2_pre_));
    fused_ = sum;
    for (std::size_t j = 0; j < fused_.numel(); ++j) fused_[j] += r3[j];
    return fused_;
}

std::array<Tensor, 4> Model::fusion_backward(const Tensor& d_fused) {
    std::array<Tensor, 4> d_stages;
    if (cfg_.ablation == Ablation::NoFusion) {
        d_stages[0] = fusion_proj_[0]->backward(d_fused);
        for (int i = 1; i < 4; ++i)
            d_stages[static_cast<std::size_t>(i)] =
                Tensor(stage_out_[static_cast<std::size_t>(i)].shape());
        return d_stages;
    }
    Tensor d_r3 = refine3_.backward(d_fused);
    Tensor d_r2 = refine2_.backward(relu_backward(d_r3, refine2_pre_));
    Tensor d_sum = refine1_.backward(relu_backward(d_r2, refine1_pre_));
    for (std::size_t j = 0; j < d_sum.numel(); ++j) d_sum[j] += d_fused[j];  // residual skip

    for (int i = 0; i < 4; ++i) {
        const Tensor& proj = proj_out_[static_cast<std::size_t>(i)];
        Tensor d_up = bilinear_resize_backward(d_sum, proj.dim(2), proj.dim(3));
        d_stages[static_cast<std::size_t>(i)] =
            fusion_proj_[static_cast<std::size_t>(i)]->backward(d_up);
    }
    return d_stages;
}

Tensor Model::seg_forward() {
    const int s = cfg_.image_size;
    Tensor up1 = bilinear_resize(fused_, s / 2, s / 2);
    seg1_pre_ = seg1_.forward(up1);
    Tensor up2 = bilinear_resize(relu(seg1_pre_), s, s);
    seg2_pre_ = seg2_.forward(up2);
    return seg_out_.forward(relu(seg2_pre_));
}

Tensor Model::seg_backward(const Tensor& d_seg) {
    Tensor d2 = seg_out_.backward(d_seg);
    Tensor d_up2 = seg2_.backward(relu_backward(d2, seg2_pre_));
    Tensor d1 = bilinear_resize_backward(d_up2, cfg_.image_size / 2, cfg_.image_size / 2);
    Tensor d_up1 = seg1_.backward(relu_backward(d1, seg1_pre_));
    return bilinear_resize_backward(d_up1, fused_.dim(2), fused_.dim(3));
}

Tensor Model::cls_forward() {
    gap_fused_ = global_avg_pool(fused_);
    gap_stage3_ = global_avg_pool(stage_out_[3]);
    Tensor z({b_, cfg_.fusion_dim + 8 * cfg_.base_channels});
    for (int bi = 0; bi < b_; ++bi) {
        for (int d = 0; d < cfg_.fusion_dim; ++d) z.at2(bi, d) = gap_fused_.at2(bi, d);
        for (int d = 0; d < 8 * cfg_.base_channels; ++d)
            z.at2(bi, cfg_.fusion_dim + d) = gap_stage3_.at2(bi, d);
    }
    return cls_fc_.forward(z);
}

Model::FeatureGrads Model::cls_backward(const Tensor& d_cls) {
    Tensor dz = cls_fc_.backward(d_cls);
    Tensor d_gap_fused({b_, cfg_.fusion_dim});
    Tensor d_gap_s3({b_, 8 * cfg_.base_channels});
    for (int bi = 0; bi < b_; ++bi) {
        for (int d = 0; d < cfg_.fusion_dim; ++d) d_gap_fused.at2(bi, d) = dz.at2(bi, d);
        for (int d = 0; d < 8 * cfg_.base_channels; ++d)
            d_gap_s3.at2(bi, d) = dz.at2(bi, cfg_.fusion_dim + d);
    }
    FeatureGrads grads;
    grads.d_fused = global_avg_pool_backward(d_gap_fused, fused_.dim(2), fused_.dim(3));
    grads.d_stage3 =
        global_avg_pool_backward(d_gap_s3, stage_out_[3].dim(2), stage_out_[3].dim(3));
    return grads;
}

ModelOutput Model::forward(const Tensor& x) {
    if (x.ndim() != 4 || x.dim(1) != 4 || x.dim(2) != cfg_.image_size ||
        x.dim(3) != cfg_.image_size)
        throw ShapeError("model: expected input [B,4," + std::to_string(cfg_.image_size) + "," +
                         std::to_string(cfg_.image_size) + "], got " + x.shape_str());
    b_ = x.dim(0);
    x_in_ = x;

    stem1_pre_ = stem1_.forward(x);
    stem2_pre_ = stem2_.forward(relu(stem1_pre_));
    Tensor cur = relu(stem2_pre_);

    for (int i = 0; i < 4; ++i) {
        stage_in_[static_cast<std::size_t>(i)] = cur;
        Tensor t = conv_blocks_[static_cast<std::size_t>(i)]->forward(cur);
        stage_out_[static_cast<std::size_t>(i)] =
            attn_blocks_[static_cast<std::size_t>(i)]->forward(t);
        if (i < 3) cur = merges_[static_cast<std::size_t>(i)]->forward(stage_out_[static_cast<std::size_t>(i)]);
    }

    fusion_forward();

    ModelOutput out;
    out.seg_logits = seg_forward();
    out.cls_logits = cls_forward();
    for (int i = 0; i < 4; ++i)
        out.pyramid.stages[static_cast<std::size_t>(i)] = stage_out_[static_cast<std::size_t>(i)];
    out.pyramid.fused = fused_;
    out.attention = attn_norm_.forward(channel_mean(fused_));
    return out;
}

void Model::backward(const Tensor& d_seg_logits, const Tensor& d_cls_logits,
                     const Tensor& d_attention) {
    Tensor d_fused = seg_backward(d_seg_logits);
    FeatureGrads cls_grads = cls_backward(d_cls_logits);
    for (std::size_t j = 0; j < d_fused.numel(); ++j) d_fused[j] += cls_grads.d_fused[j];
    if (d_attention.numel() > 0) {
        Tensor d_mean = attn_norm_.backward(d_attention);
        Tensor d_from_attn = channel_mean_backward(d_mean, cfg_.fusion_dim);
        for (std::size_t j = 0; j < d_fused.numel(); ++j) d_fused[j] += d_from_attn[j];
    }

    std::array<Tensor, 4> d_stages = fusion_backward(d_fused);
    for (std::size_t j = 0; j < d_stages[3].numel(); ++j) d_stages[3][j] += cls_grads.d_stage3[j];

    Tensor d_cur;
    for (int i = 3; i >= 0; --i) {
        Tensor d_stage = d_stages[static_cast<std::size_t>(i)];
        if (i < 3) {
            Tensor d_merge = merges_[static_cast<std::size_t>(i)]->backward(d_cur);
            for (std::size_t j = 0; j < d_stage.numel(); ++j) d_stage[j] += d_merge[j];
        }
        Tensor d_attn_in = attn_blocks_[static_cast<std::size_t>(i)]->backward(d_stage);
        d_cur = conv_blocks_[static_cast<std::size_t>(i)]->backward(d_attn_in);
    }

    Tensor d_stem2 = stem2_.backward(relu_backward(d_cur, stem2_pre_));
    stem1_.backward(relu_backward(d_stem2, stem1_pre_));
}

Model::FeatureGrads Model::feature_gradients(const Tensor& d_cls_logits) {
    FeatureGrads grads = cls_backward(d_cls_logits);
    std::array<Tensor, 4> d_stages = fusion_backward(grads.d_fused);
    for (std::size_t j = 0; j < grads.d_stage3.numel(); ++j)
        grads.d_stage3[j] += d_stages[3][j];
    return grads;
}

ModelOutput model_forward(Model& model, const Tensor& x) { return model.forward(x); }

}  // namespace sgcldff
