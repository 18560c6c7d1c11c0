#pragma once

#include <string>
#include <vector>

#include "sgcldff/core/rng.hpp"
#include "sgcldff/core/tensor.hpp"

namespace sgcldff {

// Trainable array plus its accumulated gradient.
struct Param {
    std::string name;
    Tensor value;
    Tensor grad;

    explicit Param(std::string n = "") : name(std::move(n)) {}
    void init_shape(std::vector<int> shape) {
        value = Tensor(shape);
        grad = Tensor(std::move(shape));
    }
    // Fan-in scaled uniform init, snapped to the float32 grid so checkpoints
    // round-trip bit-exactly.
    void init_uniform(Rng& rng, int fan_in);
    void init_constant(double v);
};

using ParamRefs = std::vector<Param*>;

// ---------------------------------------------------------------------------
// Layers. Each layer caches what its backward pass needs from the most
// recent forward call; backward returns the input gradient and accumulates
// parameter gradients.

class Conv2d {
public:
    Conv2d() = default;
    Conv2d(std::string name, int in_c, int out_c, int kernel, int stride, int pad, int groups = 1);

    Tensor forward(const Tensor& x);
    Tensor backward(const Tensor& dy);
    void init(Rng& rng);
    void collect(ParamRefs& out) { out.push_back(&weight_); out.push_back(&bias_); }

    int out_channels() const { return out_c_; }

private:
    int in_c_ = 0, out_c_ = 0, k_ = 0, stride_ = 1, pad_ = 0, groups_ = 1;
    Param weight_;  // [out_c, in_c/groups, k, k]
    Param bias_;    // [out_c]
    Tensor x_cache_;
};

// Dense layer on row-major [N, in] matrices.
class Linear {
public:
    Linear() = default;
    Linear(std::string name, int in_dim, int out_dim);

    Tensor forward(const Tensor& x);
    Tensor backward(const Tensor& dy);
    void init(Rng& rng);
    void collect(ParamRefs& out) { out.push_back(&weight_); out.push_back(&bias_); }

private:
    int in_ = 0, out_ = 0;
    Param weight_;  // [out, in]
    Param bias_;    // [out]
    Tensor x_cache_;
};

// Normalizes each row of [N, dim].
class LayerNorm {
public:
    LayerNorm() = default;
    LayerNorm(std::string name, int dim);

    Tensor forward(const Tensor& x);
    Tensor backward(const Tensor& dy);
    void init();
    void collect(ParamRefs& out) { out.push_back(&gain_); out.push_back(&bias_); }

private:
    int dim_ = 0;
    Param gain_;
    Param bias_;
    Tensor xhat_cache_;
    std::vector<double> rstd_cache_;
};

// Depthwise-separable conv block with residual: y = x + pw(relu(dw(x))).
class ConvBlock {
public:
    ConvBlock() = default;
    ConvBlock(const std::string& name, int channels);

    Tensor forward(const Tensor& x);
    Tensor backward(const Tensor& dy);
    void init(Rng& rng);
    void collect(ParamRefs& out) { dw_.collect(out); pw_.collect(out); }

private:
    Conv2d dw_;
    Conv2d pw_;
    Tensor pre_act_cache_;
};

// Pre-norm transformer block on non-overlapping windows:
//   x += proj(attn(norm1(x))); x += mlp(norm2(x)), MLP ratio 2, GELU.
class AttnBlock {
public:
    AttnBlock() = default;
    AttnBlock(const std::string& name, int channels, int window);

    Tensor forward(const Tensor& x);
    Tensor backward(const Tensor& dy);
    void init(Rng& rng);
    void collect(ParamRefs& out) {
        norm1_.collect(out); qkv_.collect(out); proj_.collect(out);
        norm2_.collect(out); fc1_.collect(out); fc2_.collect(out);
    }

    int heads() const { return heads_; }

private:
    int c_ = 0, window_ = 0, heads_ = 1, head_dim_ = 0;
    LayerNorm norm1_, norm2_;
    Linear qkv_, proj_;
    Linear fc1_, fc2_;

    // forward caches
    int b_ = 0, h_ = 0, w_ = 0;
    Tensor tokens_;      // [T, c] window-major gather of the input
    Tensor probs_;       // [nWin*heads, n, n] softmax rows
    Tensor v_cache_;     // [T, 3c] qkv output
    Tensor fc1_pre_;     // pre-GELU activations

    Tensor gather_windows(const Tensor& x) const;
    Tensor scatter_windows(const Tensor& tokens) const;
};

// 2x2 spatial concat + linear: [B,c,H,W] -> [B,2c,H/2,W/2].
class PatchMerge {
public:
    PatchMerge() = default;
    PatchMerge(const std::string& name, int channels);

    Tensor forward(const Tensor& x);
    Tensor backward(const Tensor& dy);
    void init(Rng& rng);
    void collect(ParamRefs& out) { reduce_.collect(out); }

private:
    int c_ = 0;
    Linear reduce_;  // 4c -> 2c
    int b_ = 0, h_ = 0, w_ = 0;
};

// ---------------------------------------------------------------------------
// Stateless ops with matching backward passes.

Tensor relu(const Tensor& x);
Tensor relu_backward(const Tensor& dy, const Tensor& x_pre);

// Half-pixel bilinear resize of [B,C,h,w] to [B,C,H,W]; backward is the
// transpose scatter.
Tensor bilinear_resize(const Tensor& x, int out_h, int out_w);
Tensor bilinear_resize_backward(const Tensor& dy, int in_h, int in_w);

// Global average pool [B,C,H,W] -> [B,C].
Tensor global_avg_pool(const Tensor& x);
Tensor global_avg_pool_backward(const Tensor& dy, int h, int w);

// Channel mean [B,D,h,w] -> [B,h,w].
Tensor channel_mean(const Tensor& x);
Tensor channel_mean_backward(const Tensor& dy, int channels);

// Per-image min-max normalization of [B,h,w]; constant maps become zeros.
// Backward treats min/max as selections (differentiable a.e.).
struct MinMaxNorm {
    Tensor out;
    std::vector<int> argmin, argmax;
    std::vector<double> range;

    Tensor forward(const Tensor& x);
    Tensor backward(const Tensor& dy) const;
};

}  // namespace sgcldff
