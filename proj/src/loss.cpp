#include "sgcldff/loss/loss.hpp"

#include <algorithm>
#include <cmath>

#include "sgcldff/core/errors.hpp"
#include "sgcldff/model/layers.hpp"

namespace sgcldff {

namespace {

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

}  // namespace

std::vector<double> class_weights(const std::vector<int>& counts) {
    const int k = static_cast<int>(counts.size());
    double total = 0;
    for (int c : counts) {
        if (c < 1) throw ConfigError("class_weights: every class count must be >= 1");
        total += c;
    }
    std::vector<double> w(static_cast<std::size_t>(k));
    for (int i = 0; i < k; ++i)
        w[static_cast<std::size_t>(i)] = total / (k * static_cast<double>(counts[static_cast<std::size_t>(i)]));
    return w;
}

double weighted_ce(const Tensor& cls_logits, const std::vector<int>& labels,
                   const std::vector<double>& weights, Tensor* d_logits) {
    const int b = cls_logits.dim(0), k = cls_logits.dim(1);
    if (static_cast<int>(labels.size()) != b)
        throw ShapeError("weighted_ce: labels/batch size mismatch");
    if (d_logits) *d_logits = Tensor({b, k});

    double loss = 0;
    for (int bi = 0; bi < b; ++bi) {
        const double* row = cls_logits.data() + static_cast<std::size_t>(bi) * k;
        const int y = labels[static_cast<std::size_t>(bi)];
        const double wy = weights[static_cast<std::size_t>(y)];
        double mx = row[0];
        for (int j = 1; j < k; ++j) mx = std::max(mx, row[j]);
        double z = 0;
        for (int j = 0; j < k; ++j) z += std::exp(row[j] - mx);
        const double log_z = std::log(z) + mx;
        loss += wy * (log_z - row[y]);
        if (d_logits) {
            double* g = d_logits->data() + static_cast<std::size_t>(bi) * k;
            for (int j = 0; j < k; ++j) {
                const double p = std::exp(row[j] - log_z);
                g[j] = wy * (p - (j == y ? 1.0 : 0.0)) / b;
            }
        }
    }
    return loss / b;
}

double dice_loss(const Tensor& seg_logits, const Tensor& mask, double eps, Tensor* d_logits) {
    if (!seg_logits.same_shape(mask)) throw ShapeError("dice_loss: logits/mask shape mismatch");
    const int b = seg_logits.dim(0);
    const std::size_t plane = seg_logits.numel() / static_cast<std::size_t>(b);
    if (d_logits) *d_logits = Tensor(seg_logits.shape());

    double loss = 0;
    for (int bi = 0; bi < b; ++bi) {
        const double* x = seg_logits.data() + static_cast<std::size_t>(bi) * plane;
        const double* m = mask.data() + static_cast<std::size_t>(bi) * plane;
        double sum_pm = 0, sum_p = 0, sum_m = 0;
        for (std::size_t i = 0; i < plane; ++i) {
            const double p = sigmoid(x[i]);
            sum_pm += p * m[i];
            sum_p += p;
            sum_m += m[i];
        }
        const double num = 2.0 * sum_pm + eps;
        const double den = sum_p + sum_m + eps;
        loss += 1.0 - num / den;
        if (d_logits) {
            double* g = d_logits->data() + static_cast<std::size_t>(bi) * plane;
            for (std::size_t i = 0; i < plane; ++i) {
                const double p = sigmoid(x[i]);
                // d(1 - num/den)/dp = -(2*m*den - num)/den^2
                const double ddice = -(2.0 * m[i] * den - num) / (den * den);
                g[i] = ddice * p * (1.0 - p) / b;
            }
        }
    }
    return loss / b;
}

double bce_loss(const Tensor& seg_logits, const Tensor& mask, Tensor* d_logits) {
    if (!seg_logits.same_shape(mask)) throw ShapeError("bce_loss: logits/mask shape mismatch");
    const std::size_t n = seg_logits.numel();
    if (d_logits) *d_logits = Tensor(seg_logits.shape());

    double loss = 0;
    for (std::size_t i = 0; i < n; ++i) {
        const double x = seg_logits[i], m = mask[i];
        loss += std::max(x, 0.0) - x * m + std::log1p(std::exp(-std::abs(x)));
        if (d_logits) (*d_logits)[i] = (sigmoid(x) - m) / static_cast<double>(n);
    }
    return loss / static_cast<double>(n);
}

Tensor align_prior(const Tensor& prior, int h, int w) {
    const int b = prior.dim(0);
    Tensor as4({b, 1, prior.dim(1), prior.dim(2)});
    std::copy(prior.data(), prior.data() + prior.numel(), as4.data());
    Tensor down = bilinear_resize(as4, h, w);
    Tensor flat({b, h, w});
    std::copy(down.data(), down.data() + down.numel(), flat.data());
    MinMaxNorm norm;
    return norm.forward(flat);
}

double saliency_alignment(const Tensor& attention, const Tensor& prior, Tensor* d_attention) {
    const int b = attention.dim(0), h = attention.dim(1), w = attention.dim(2);
    if (prior.dim(0) != b) throw ShapeError("saliency_alignment: batch size mismatch");
    Tensor target = align_prior(prior, h, w);
    if (!target.same_shape(attention))
        throw ShapeError("saliency_alignment: attention/prior shape mismatch");

    const std::size_t n = attention.numel();
    if (d_attention) *d_attention = Tensor(attention.shape());
    double loss = 0;
    for (std::size_t i = 0; i < n; ++i) {
        const double d = attention[i] - target[i];
        loss += d * d;
        if (d_attention) (*d_attention)[i] = 2.0 * d / static_cast<double>(n);
    }
    return loss / static_cast<double>(n);
}

LossBreakdown total_loss(const ModelOutput& out, const BatchTensors& batch,
                         const ExperimentConfig& cfg, const std::vector<double>& cls_weights,
                         LossGrads* grads) {
    LossBreakdown lb;
    Tensor d_ce, d_dice, d_bce, d_attn;
    Tensor* p_ce = grads ? &d_ce : nullptr;
    Tensor* p_dice = grads ? &d_dice : nullptr;
    Tensor* p_bce = grads ? &d_bce : nullptr;
    Tensor* p_attn = grads ? &d_attn : nullptr;

    lb.cls = weighted_ce(out.cls_logits, batch.labels, cls_weights, p_ce);
    lb.seg_dice = dice_loss(out.seg_logits, batch.mask, cfg.dice_smooth, p_dice);
    lb.seg_bce = bce_loss(out.seg_logits, batch.mask, p_bce);
    lb.sal = saliency_alignment(out.attention, batch.prior, p_attn);
    lb.total = cfg.lambda_cls * lb.cls + cfg.lambda_seg * (lb.seg_dice + lb.seg_bce) +
               cfg.lambda_sal * lb.sal;

    if (grads) {
        grads->d_cls_logits = Tensor(out.cls_logits.shape());
        grads->d_seg_logits = Tensor(out.seg_logits.shape());
        for (std::size_t i = 0; i < d_ce.numel(); ++i)
            grads->d_cls_logits[i] = cfg.lambda_cls * d_ce[i];
        for (std::size_t i = 0; i < d_dice.numel(); ++i)
            grads->d_seg_logits[i] = cfg.lambda_seg * (d_dice[i] + d_bce[i]);
        if (cfg.lambda_sal > 0) {
            grads->d_attention = Tensor(out.attention.shape());
            for (std::size_t i = 0; i < d_attn.numel(); ++i)
                grads->d_attention[i] = cfg.lambda_sal * d_attn[i];
        } else {
            grads->d_attention = Tensor({0});
        }
    }
    return lb;
}

}  // namespace sgcldff
