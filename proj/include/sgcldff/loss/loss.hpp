#pragma once

#include <vector>

#include "sgcldff/core/config.hpp"
#include "sgcldff/core/tensor.hpp"
#include "sgcldff/core/types.hpp"
#include "sgcldff/model/network.hpp"

namespace sgcldff {

// Inverse-frequency class weights: w_c = N / (K * n_c); mean 1 when balanced.
std::vector<double> class_weights(const std::vector<int>& counts);

// Each loss returns its value and optionally writes d(value)/d(input) into
// the grad output (same shape as the logits/attention input).

// Mean over batch of w_y * (-log softmax(logits)[y]).
double weighted_ce(const Tensor& cls_logits, const std::vector<int>& labels,
                   const std::vector<double>& weights, Tensor* d_logits = nullptr);

// 1 - (2*sum(p*m)+eps)/(sum(p)+sum(m)+eps) per image, mean over batch.
double dice_loss(const Tensor& seg_logits, const Tensor& mask, double eps,
                 Tensor* d_logits = nullptr);

// Mean per-pixel stabilized binary cross-entropy.
double bce_loss(const Tensor& seg_logits, const Tensor& mask, Tensor* d_logits = nullptr);

// Mean squared difference between the attention map [B,h,w] and the prior
// batch downsampled (bilinear) to h x w and per-image min-max renormalized.
double saliency_alignment(const Tensor& attention, const Tensor& prior,
                          Tensor* d_attention = nullptr);

// Downsample + renormalize helper used by saliency_alignment (the prior side
// carries no gradient).
Tensor align_prior(const Tensor& prior, int h, int w);

struct BatchTensors {
    Tensor x;       // [B, 4, S, S] gated input
    Tensor mask;    // [B, 1, S, S] binary
    Tensor prior;   // [B, S, S] saliency prior
    std::vector<int> labels;
};

struct LossGrads {
    Tensor d_seg_logits;
    Tensor d_cls_logits;
    Tensor d_attention;
};

// total = l_cls*ce + l_seg*(dice+bce) + l_sal*alignment. Gradients are
// pre-scaled by the lambda weights.
LossBreakdown total_loss(const ModelOutput& out, const BatchTensors& batch,
                         const ExperimentConfig& cfg, const std::vector<double>& cls_weights,
                         LossGrads* grads = nullptr);

}  // namespace sgcldff
