#include "sgcldff/model/layers.hpp"

#include <algorithm>
#include <cmath>

#include "sgcldff/core/checkpoint.hpp"

namespace sgcldff {

void Param::init_uniform(Rng& rng, int fan_in) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
    for (std::size_t i = 0; i < value.numel(); ++i)
        value[i] = snap_f32(rng.uniform(-bound, bound));
    grad.zero();
}

void Param::init_constant(double v) {
    value.fill(snap_f32(v));
    grad.zero();
}

// ---------------------------------------------------------------------------
// Conv2d

Conv2d::Conv2d(std::string name, int in_c, int out_c, int kernel, int stride, int pad, int groups)
    : in_c_(in_c), out_c_(out_c), k_(kernel), stride_(stride), pad_(pad), groups_(groups),
      weight_(name + ".w"), bias_(name + ".b") {
    if (in_c % groups != 0 || out_c % groups != 0)
        throw ShapeError(name + ": channels not divisible by groups");
    weight_.init_shape({out_c, in_c / groups, kernel, kernel});
    bias_.init_shape({out_c});
}

void Conv2d::init(Rng& rng) {
    weight_.init_uniform(rng, (in_c_ / groups_) * k_ * k_);
    bias_.init_constant(0.0);
}

Tensor Conv2d::forward(const Tensor& x) {
    if (x.ndim() != 4 || x.dim(1) != in_c_)
        throw ShapeError(weight_.name + ": bad conv input " + x.shape_str());
    x_cache_ = x;
    const int b = x.dim(0), h = x.dim(2), w = x.dim(3);
    const int oh = (h + 2 * pad_ - k_) / stride_ + 1;
    const int ow = (w + 2 * pad_ - k_) / stride_ + 1;
    const int icg = in_c_ / groups_;
    const int ocg = out_c_ / groups_;
    Tensor y({b, out_c_, oh, ow});

    for (int bi = 0; bi < b; ++bi)
        for (int oc = 0; oc < out_c_; ++oc) {
            const int gbase = (oc / ocg) * icg;
            const double bias = bias_.value[static_cast<std::size_t>(oc)];
            for (int oy = 0; oy < oh; ++oy)
                for (int ox = 0; ox < ow; ++ox) {
                    double acc = bias;
                    const int iy0 = oy * stride_ - pad_;
                    const int ix0 = ox * stride_ - pad_;
                    for (int ic = 0; ic < icg; ++ic)
                        for (int ky = 0; ky < k_; ++ky) {
                            const int iy = iy0 + ky;
                            if (iy < 0 || iy >= h) continue;
                            for (int kx = 0; kx < k_; ++kx) {
                                const int ix = ix0 + kx;
                                if (ix < 0 || ix >= w) continue;
                                acc += weight_.value.at4(oc, ic, ky, kx) *
                                       x.at4(bi, gbase + ic, iy, ix);
                            }
                        }
                    y.at4(bi, oc, oy, ox) = acc;
                }
        }
    return y;
}

Tensor Conv2d::backward(const Tensor& dy) {
    const Tensor& x = x_cache_;
    const int b = x.dim(0), h = x.dim(2), w = x.dim(3);
    const int oh = dy.dim(2), ow = dy.dim(3);
    const int icg = in_c_ / groups_;
    const int ocg = out_c_ / groups_;
    Tensor dx({b, in_c_, h, w});

    for (int bi = 0; bi < b; ++bi)
        for (int oc = 0; oc < out_c_; ++oc) {
            const int gbase = (oc / ocg) * icg;
            double dbias = 0.0;
            for (int oy = 0; oy < oh; ++oy)
                for (int ox = 0; ox < ow; ++ox) {
                    const double g = dy.at4(bi, oc, oy, ox);
                    if (g == 0.0) continue;
                    dbias += g;
                    const int iy0 = oy * stride_ - pad_;
                    const int ix0 = ox * stride_ - pad_;
                    for (int ic = 0; ic < icg; ++ic)
                        for (int ky = 0; ky < k_; ++ky) {
                            const int iy = iy0 + ky;
                            if (iy < 0 || iy >= h) continue;
                            for (int kx = 0; kx < k_; ++kx) {
                                const int ix = ix0 + kx;
                                if (ix < 0 || ix >= w) continue;
                                weight_.grad.at4(oc, ic, ky, kx) += g * x.at4(bi, gbase + ic, iy, ix);
                                dx.at4(bi, gbase + ic, iy, ix) += g * weight_.value.at4(oc, ic, ky, kx);
                            }
                        }
                }
            bias_.grad[static_cast<std::size_t>(oc)] += dbias;
        }
    return dx;
}

// ---------------------------------------------------------------------------
// Linear

Linear::Linear(std::string name, int in_dim, int out_dim)
    : in_(in_dim), out_(out_dim), weight_(name + ".w"), bias_(name + ".b") {
    weight_.init_shape({out_dim, in_dim});
    bias_.init_shape({out_dim});
}

void Linear::init(Rng& rng) {
    weight_.init_uniform(rng, in_);
    bias_.init_constant(0.0);
}

Tensor Linear::forward(const Tensor& x) {
    if (x.ndim() != 2 || x.dim(1) != in_)
        throw ShapeError(weight_.name + ": bad linear input " + x.shape_str());
    x_cache_ = x;
    const int n = x.dim(0);
    Tensor y({n, out_});
    for (int i = 0; i < n; ++i) {
        const double* xi = x.data() + static_cast<std::size_t>(i) * in_;
        double* yi = y.data() + static_cast<std::size_t>(i) * out_;
        for (int o = 0; o < out_; ++o) {
            const double* wr = weight_.value.data() + static_cast<std::size_t>(o) * in_;
            double acc = bias_.value[static_cast<std::size_t>(o)];
            for (int j = 0; j < in_; ++j) acc += wr[j] * xi[j];
            yi[o] = acc;
        }
    }
    return y;
}

Tensor Linear::backward(const Tensor& dy) {
    const Tensor& x = x_cache_;
    const int n = x.dim(0);
    Tensor dx({n, in_});
    for (int i = 0; i < n; ++i) {
        const double* xi = x.data() + static_cast<std::size_t>(i) * in_;
        const double* gi = dy.data() + static_cast<std::size_t>(i) * out_;
        double* dxi = dx.data() + static_cast<std::size_t>(i) * in_;
        for (int o = 0; o < out_; ++o) {
            const double g = gi[o];
            if (g == 0.0) continue;
            bias_.grad[static_cast<std::size_t>(o)] += g;
            const double* wr = weight_.value.data() + static_cast<std::size_t>(o) * in_;
            double* gw = weight_.grad.data() + static_cast<std::size_t>(o) * in_;
            for (int j = 0; j < in_; ++j) {
                gw[j] += g * xi[j];
                dxi[j] += g * wr[j];
            }
        }
    }
    return dx;
}

// ---------------------------------------------------------------------------
// LayerNorm

namespace {
constexpr double kLnEps = 1e-5;
}

LayerNorm::LayerNorm(std::string name, int dim)
    : dim_(dim), gain_(name + ".g"), bias_(name + ".b") {
    gain_.init_shape({dim});
    bias_.init_shape({dim});
}

void LayerNorm::init() {
    gain_.init_constant(1.0);
    bias_.init_constant(0.0);
}

Tensor LayerNorm::forward(const Tensor& x) {
    const int n = x.dim(0);
    Tensor y({n, dim_});
    xhat_cache_ = Tensor({n, dim_});
    rstd_cache_.assign(static_cast<std::size_t>(n), 0.0);
    for (int i = 0; i < n; ++i) {
        const double* xi = x.data() + static_cast<std::size_t>(i) * dim_;
        double mean = 0;
        for (int j = 0; j < dim_; ++j) mean += xi[j];
        mean /= dim_;
        double var = 0;
        for (int j = 0; j < dim_; ++j) var += (xi[j] - mean) * (xi[j] - mean);
        var /= dim_;
        const double rstd = 1.0 / std::sqrt(var + kLnEps);
        rstd_cache_[static_cast<std::size_t>(i)] = rstd;
        double* xh = xhat_cache_.data() + static_cast<std::size_t>(i) * dim_;
        double* yi = y.data() + static_cast<std::size_t>(i) * dim_;
        for (int j = 0; j < dim_; ++j) {
            xh[j] = (xi[j] - mean) * rstd;
            yi[j] = gain_.value[static_cast<std::size_t>(j)] * xh[j] +
                    bias_.value[static_cast<std::size_t>(j)];
        }
    }
    return y;
}

Tensor LayerNorm::backward(const Tensor& dy) {
    const int n = dy.dim(0);
    Tensor dx({n, dim_});
    for (int i = 0; i < n; ++i) {
        const double* gi = dy.data() + static_cast<std::size_t>(i) * dim_;
        const double* xh = xhat_cache_.data() + static_cast<std::size_t>(i) * dim_;
        const double rstd = rstd_cache_[static_cast<std::size_t>(i)];
        double mean_dxhat = 0, mean_dxhat_xhat = 0;
        for (int j = 0; j < dim_; ++j) {
            const double dxhat = gi[j] * gain_.value[static_cast<std::size_t>(j)];
            mean_dxhat += dxhat;
            mean_dxhat_xhat += dxhat * xh[j];
            gain_.grad[static_cast<std::size_t>(j)] += gi[j] * xh[j];
            bias_.grad[static_cast<std::size_t>(j)] += gi[j];
        }
        mean_dxhat /= dim_;
        mean_dxhat_xhat /= dim_;
        double* dxi = dx.data() + static_cast<std::size_t>(i) * dim_;
        for (int j = 0; j < dim_; ++j) {
            const double dxhat = gi[j] * gain_.value[static_cast<std::size_t>(j)];
            dxi[j] = rstd * (dxhat - mean_dxhat - xh[j] * mean_dxhat_xhat);
        }
    }
    return dx;
}

// ---------------------------------------------------------------------------
// ConvBlock

ConvBlock::ConvBlock(const std::string& name, int channels)
    : dw_(name + ".dw", channels, channels, 3, 1, 1, channels),
      pw_(name + ".pw", channels, channels, 1, 1, 0, 1) {}

void ConvBlock::init(Rng& rng) {
    dw_.init(rng);
    pw_.init(rng);
}

Tensor ConvBlock::forward(const Tensor& x) {
    pre_act_cache_ = dw_.forward(x);
    Tensor y = pw_.forward(relu(pre_act_cache_));
    for (std::size_t i = 0; i < y.numel(); ++i) y[i] += x[i];
    return y;
}

Tensor ConvBlock::backward(const Tensor& dy) {
    Tensor d_pw = pw_.backward(dy);
    Tensor d_dw = dw_.backward(relu_backward(d_pw, pre_act_cache_));
    for (std::size_t i = 0; i < d_dw.numel(); ++i) d_dw[i] += dy[i];
    return d_dw;
}

// ---------------------------------------------------------------------------
// AttnBlock

namespace {

double gelu(double x) { return 0.5 * x * (1.0 + std::erf(x / std::sqrt(2.0))); }

double gelu_grad(double x) {
    const double cdf = 0.5 * (1.0 + std::erf(x / std::sqrt(2.0)));
    const double pdf = std::exp(-0.5 * x * x) / std::sqrt(2.0 * 3.14159265358979323846);
    return cdf + x * pdf;
}

}  // namespace

AttnBlock::AttnBlock(const std::string& name, int channels, int window)
    : c_(channels), window_(window),
      heads_(std::max(1, channels / 16)),
      head_dim_(channels / std::max(1, channels / 16)),
      norm1_(name + ".norm1", channels), norm2_(name + ".norm2", channels),
      qkv_(name + ".qkv", channels, 3 * channels), proj_(name + ".proj", channels, channels),
      fc1_(name + ".mlp.fc1", channels, 2 * channels),
      fc2_(name + ".mlp.fc2", 2 * channels, channels) {
    if (heads_ * head_dim_ != channels)
        throw ShapeError(name + ": channels not divisible by head count");
}

void AttnBlock::init(Rng& rng) {
    norm1_.init();
    norm2_.init();
    qkv_.init(rng);
    proj_.init(rng);
    fc1_.init(rng);
    fc2_.init(rng);
}

Tensor AttnBlock::gather_windows(const Tensor& x) const {
    const int b = x.dim(0), h = x.dim(2), w = x.dim(3);
    const int nwy = h / window_, nwx = w / window_;
    Tensor tokens({b * h * w, c_});
    std::size_t t = 0;
    for (int bi = 0; bi < b; ++bi)
        for (int wy = 0; wy < nwy; ++wy)
            for (int wx = 0; wx < nwx; ++wx)
                for (int iy = 0; iy < window_; ++iy)
                    for (int ix = 0; ix < window_; ++ix) {
                        double* row = tokens.data() + t * c_;
                        for (int ch = 0; ch < c_; ++ch)
                            row[ch] = x.at4(bi, ch, wy * window_ + iy, wx * window_ + ix);
                        ++t;
                    }
    return tokens;
}

Tensor AttnBlock::scatter_windows(const Tensor& tokens) const {
    const int nwy = h_ / window_, nwx = w_ / window_;
    Tensor x({b_, c_, h_, w_});
    std::size_t t = 0;
    for (int bi = 0; bi < b_; ++bi)
        for (int wy = 0; wy < nwy; ++wy)
            for (int wx = 0; wx < nwx; ++wx)
                for (int iy = 0; iy < window_; ++iy)
                    for (int ix = 0; ix < window_; ++ix) {
                        const double* row = tokens.data() + t * c_;
                        for (int ch = 0; ch < c_; ++ch)
                            x.at4(bi, ch, wy * window_ + iy, wx * window_ + ix) = row[ch];
                        ++t;
                    }
    return x;
}

Tensor AttnBlock::forward(const Tensor& x) {
    b_ = x.dim(0);
    h_ = x.dim(2);
    w_ = x.dim(3);
    if (h_ % window_ != 0 || w_ % window_ != 0)
        throw ShapeError("attention: window does not divide the feature map");
    const int n = window_ * window_;
    const int t_total = b_ * h_ * w_;
    const int n_windows = t_total / n;
    const double scale = 1.0 / std::sqrt(static_cast<double>(head_dim_));

    tokens_ = gather_windows(x);
    Tensor n1 = norm1_.forward(tokens_);
    v_cache_ = qkv_.forward(n1);  // [T, 3c]
    probs_ = Tensor({n_windows * heads_, n, n});

    Tensor attn_out({t_total, c_});
    for (int win = 0; win < n_windows; ++win) {
        const int base = win * n;
        for (int hd = 0; hd < heads_; ++hd) {
            const int qoff = hd * head_dim_;
            const int koff = c_ + hd * head_dim_;
            const int voff = 2 * c_ + hd * head_dim_;
            double* probs = probs_.data() + (static_cast<std::size_t>(win) * heads_ + hd) * n * n;
            for (int i = 0; i < n; ++i) {
                const double* qi = v_cache_.data() + static_cast<std::size_t>(base + i) * 3 * c_ + qoff;
                double* prow = probs + static_cast<std::size_t>(i) * n;
                double mx = -1e300;
                for (int j = 0; j < n; ++j) {
                    const double* kj =
                        v_cache_.data() + static_cast<std::size_t>(base + j) * 3 * c_ + koff;
                    double s = 0;
                    for (int d = 0; d < head_dim_; ++d) s += qi[d] * kj[d];
                    prow[j] = s * scale;
                    mx = std::max(mx, prow[j]);
                }
                double z = 0;
                for (int j = 0; j < n; ++j) {
                    prow[j] = std::exp(prow[j] - mx);
                    z += prow[j];
                }
                for (int j = 0; j < n; ++j) prow[j] /= z;

                double* orow = attn_out.data() + static_cast<std::size_t>(base + i) * c_ + qoff;
                for (int d = 0; d < head_dim_; ++d) {
                    double acc = 0;
                    for (int j = 0; j < n; ++j)
                        acc += prow[j] *
                               v_cache_[static_cast<std::size_t>(base + j) * 3 * c_ + voff + d];
                    orow[d] = acc;
                }
            }
        }
    }

    Tensor a = proj_.forward(attn_out);
    Tensor t1({t_total, c_});
    for (std::size_t i = 0; i < t1.numel(); ++i) t1[i] = tokens_[i] + a[i];

    Tensor n2 = norm2_.forward(t1);
    fc1_pre_ = fc1_.forward(n2);
    Tensor g({t_total, 2 * c_});
    for (std::size_t i = 0; i < g.numel(); ++i) g[i] = gelu(fc1_pre_[i]);
    Tensor m = fc2_.forward(g);
    for (std::size_t i = 0; i < t1.numel(); ++i) t1[i] += m[i];

    // t1 now holds the block output in token order; keep tokens_ as the
    // attention-path input for backward.
    return scatter_windows(t1);
}

Tensor AttnBlock::backward(const Tensor& dy) {
    const int n = window_ * window_;
    const int t_total = b_ * h_ * w_;
    const int n_windows = t_total / n;
    const double scale = 1.0 / std::sqrt(static_cast<double>(head_dim_));

    Tensor dt1 = gather_windows(dy);  // gradient w.r.t. t1 (post-MLP sum)

    // MLP path
    Tensor dm = dt1;  // residual: d(m) = dt1
    Tensor dg = fc2_.backward(dm);
    for (std::size_t i = 0; i < dg.numel(); ++i) dg[i] *= gelu_grad(fc1_pre_[i]);
    Tensor dn2 = fc1_.backward(dg);
    Tensor dt1_mlp = norm2_.backward(dn2);
    for (std::size_t i = 0; i < dt1.numel(); ++i) dt1[i] += dt1_mlp[i];

    // Attention path
    Tensor da = proj_.backward(dt1);  // gradient w.r.t. attn_out

    Tensor dqkv({t_total, 3 * c_});
    std::vector<double> dp(static_cast<std::size_t>(n));
    for (int win = 0; win < n_windows; ++win) {
        const int base = win * n;
        for (int hd = 0; hd < heads_; ++hd) {
            const int qoff = hd * head_dim_;
            const int koff = c_ + hd * head_dim_;
            const int voff = 2 * c_ + hd * head_dim_;
            const double* probs =
                probs_.data() + (static_cast<std::size_t>(win) * heads_ + hd) * n * n;
            for (int i = 0; i < n; ++i) {
                const double* doi = da.data() + static_cast<std::size_t>(base + i) * c_ + qoff;
                const double* prow = probs + static_cast<std::size_t>(i) * n;

                // dv[j] += p[i][j] * do[i];  dp[i][j] = do[i] . v[j]
                for (int j = 0; j < n; ++j) {
                    const double* vj =
                        v_cache_.data() + static_cast<std::size_t>(base + j) * 3 * c_ + voff;
                    double* dvj = dqkv.data() + static_cast<std::size_t>(base + j) * 3 * c_ + voff;
                    double acc = 0;
                    for (int d = 0; d < head_dim_; ++d) {
                        acc += doi[d] * vj[d];
                        dvj[d] += prow[j] * doi[d];
                    }
                    dp[static_cast<std::size_t>(j)] = acc;
                }
                // softmax backward: ds = p * (dp - sum_j dp*p)
                double dot = 0;
                for (int j = 0; j < n; ++j) dot += dp[static_cast<std::size_t>(j)] * prow[j];
                const double* qi =
                    v_cache_.data() + static_cast<std::size_t>(base + i) * 3 * c_ + qoff;
                double* dqi = dqkv.data() + static_cast<std::size_t>(base + i) * 3 * c_ + qoff;
                for (int j = 0; j < n; ++j) {
                    const double ds = prow[j] * (dp[static_cast<std::size_t>(j)] - dot) * scale;
                    const double* kj =
                        v_cache_.data() + static_cast<std::size_t>(base + j) * 3 * c_ + koff;
                    double* dkj = dqkv.data() + static_cast<std::size_t>(base + j) * 3 * c_ + koff;
                    for (int d = 0; d < head_dim_; ++d) {
                        dqi[d] += ds * kj[d];
                        dkj[d] += ds * qi[d];
                    }
                }
            }
        }
    }

    Tensor dn1 = qkv_.backward(dqkv);
    Tensor dtok = norm1_.backward(dn1);
    for (std::size_t i = 0; i < dtok.numel(); ++i) dtok[i] += dt1[i];  // residual skip
    return scatter_windows(dtok);
}

// ---------------------------------------------------------------------------
// PatchMerge

PatchMerge::PatchMerge(const std::string& name, int channels)
    : c_(channels), reduce_(name + ".reduce", 4 * channels, 2 * channels) {}

void PatchMerge::init(Rng& rng) { reduce_.init(rng); }

Tensor PatchMerge::forward(const Tensor& x) {
    b_ = x.dim(0);
    h_ = x.dim(2);
    w_ = x.dim(3);
    const int oh = h_ / 2, ow = w_ / 2;
    Tensor gathered({b_ * oh * ow, 4 * c_});
    std::size_t t = 0;
    for (int bi = 0; bi < b_; ++bi)
        for (int oy = 0; oy < oh; ++oy)
            for (int ox = 0; ox < ow; ++ox) {
                double* row = gathered.data() + t * 4 * c_;
                for (int q = 0; q < 4; ++q) {
                    const int iy = 2 * oy + q / 2, ix = 2 * ox + q % 2;
                    for (int ch = 0; ch < c_; ++ch) row[q * c_ + ch] = x.at4(bi, ch, iy, ix);
                }
                ++t;
            }
    Tensor reduced = reduce_.forward(gathered);  // [B*oh*ow, 2c]
    Tensor y({b_, 2 * c_, oh, ow});
    t = 0;
    for (int bi = 0; bi < b_; ++bi)
        for (int oy = 0; oy < oh; ++oy)
            for (int ox = 0; ox < ow; ++ox) {
                const double* row = reduced.data() + t * 2 * c_;
                for (int ch = 0; ch < 2 * c_; ++ch) y.at4(bi, ch, oy, ox) = row[ch];
                ++t;
            }
    return y;
}

Tensor PatchMerge::backward(const Tensor& dy) {
    const int oh = h_ / 2, ow = w_ / 2;
    Tensor dred({b_ * oh * ow, 2 * c_});
    std::size_t t = 0;
    for (int bi = 0; bi < b_; ++bi)
        for (int oy = 0; oy < oh; ++oy)
            for (int ox = 0; ox < ow; ++ox) {
                double* row = dred.data() + t * 2 * c_;
                for (int ch = 0; ch < 2 * c_; ++ch) row[ch] = dy.at4(bi, ch, oy, ox);
                ++t;
            }
    Tensor dgather = reduce_.backward(dred);
    Tensor dx({b_, c_, h_, w_});
    t = 0;
    for (int bi = 0; bi < b_; ++bi)
        for (int oy = 0; oy < oh; ++oy)
            for (int ox = 0; ox < ow; ++ox) {
                const double* row = dgather.data() + t * 4 * c_;
                for (int q = 0; q < 4; ++q) {
                    const int iy = 2 * oy + q / 2, ix = 2 * ox + q % 2;
                    for (int ch = 0; ch < c_; ++ch) dx.at4(bi, ch, iy, ix) = row[q * c_ + ch];
                }
                ++t;
            }
    return dx;
}

// ---------------------------------------------------------------------------
// Stateless ops

Tensor relu(const Tensor& x) {
    Tensor y = x;
    for (std::size_t i = 0; i < y.numel(); ++i)
        if (y[i] < 0) y[i] = 0;
    return y;
}

Tensor relu_backward(const Tensor& dy, const Tensor& x_pre) {
    Tensor dx = dy;
    for (std::size_t i = 0; i < dx.numel(); ++i)
        if (x_pre[i] <= 0) dx[i] = 0;
    return dx;
}

namespace {

struct Tap {
    int i0, i1;
    double f;
};

std::vector<Tap> resize_taps(int in_n, int out_n) {
    std::vector<Tap> taps(static_cast<std::size_t>(out_n));
    const double scale = static_cast<double>(in_n) / out_n;
    for (int o = 0; o < out_n; ++o) {
        const double s = (o + 0.5) * scale - 0.5;
        int i0 = static_cast<int>(std::floor(s));
        double f = s - i0;
        int i1 = i0 + 1;
        i0 = std::clamp(i0, 0, in_n - 1);
        i1 = std::clamp(i1, 0, in_n - 1);
        taps[static_cast<std::size_t>(o)] = {i0, i1, f};
    }
    return taps;
}

}  // namespace

Tensor bilinear_resize(const Tensor& x, int out_h, int out_w) {
    const int b = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
    if (h == out_h && w == out_w) return x;
    const auto ty = resize_taps(h, out_h);
    const auto tx = resize_taps(w, out_w);
    Tensor y({b, c, out_h, out_w});
    for (int bi = 0; bi < b; ++bi)
        for (int ch = 0; ch < c; ++ch)
            for (int oy = 0; oy < out_h; ++oy) {
                const Tap& py = ty[static_cast<std::size_t>(oy)];
                for (int ox = 0; ox < out_w; ++ox) {
                    const Tap& px = tx[static_cast<std::size_t>(ox)];
                    y.at4(bi, ch, oy, ox) =
                        (1 - py.f) * (1 - px.f) * x.at4(bi, ch, py.i0, px.i0) +
                        (1 - py.f) * px.f * x.at4(bi, ch, py.i0, px.i1) +
                        py.f * (1 - px.f) * x.at4(bi, ch, py.i1, px.i0) +
                        py.f * px.f * x.at4(bi, ch, py.i1, px.i1);
                }
            }
    return y;
}

Tensor bilinear_resize_backward(const Tensor& dy, int in_h, int in_w) {
    const int b = dy.dim(0), c = dy.dim(1), oh = dy.dim(2), ow = dy.dim(3);
    if (oh == in_h && ow == in_w) return dy;
    const auto ty = resize_taps(in_h, oh);
    const auto tx = resize_taps(in_w, ow);
    Tensor dx({b, c, in_h, in_w});
    for (int bi = 0; bi < b; ++bi)
        for (int ch = 0; ch < c; ++ch)
            for (int oy = 0; oy < oh; ++oy) {
                const Tap& py = ty[static_cast<std::size_t>(oy)];
                for (int ox = 0; ox < ow; ++ox) {
                    const Tap& px = tx[static_cast<std::size_t>(ox)];
                    const double g = dy.at4(bi, ch, oy, ox);
                    dx.at4(bi, ch, py.i0, px.i0) += (1 - py.f) * (1 - px.f) * g;
                    dx.at4(bi, ch, py.i0, px.i1) += (1 - py.f) * px.f * g;
                    dx.at4(bi, ch, py.i1, px.i0) += py.f * (1 - px.f) * g;
                    dx.at4(bi, ch, py.i1, px.i1) += py.f * px.f * g;
                }
            }
    return dx;
}

Tensor global_avg_pool(const Tensor& x) {
    const int b = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
    Tensor y({b, c});
    const double inv = 1.0 / (static_cast<double>(h) * w);
    for (int bi = 0; bi < b; ++bi)
        for (int ch = 0; ch < c; ++ch) {
            double acc = 0;
            for (int yy = 0; yy < h; ++yy)
                for (int xx = 0; xx < w; ++xx) acc += x.at4(bi, ch, yy, xx);
            y.at2(bi, ch) = acc * inv;
        }
    return y;
}

Tensor global_avg_pool_backward(const Tensor& dy, int h, int w) {
    const int b = dy.dim(0), c = dy.dim(1);
    Tensor dx({b, c, h, w});
    const double inv = 1.0 / (static_cast<double>(h) * w);
    for (int bi = 0; bi < b; ++bi)
        for (int ch = 0; ch < c; ++ch) {
            const double g = dy.at2(bi, ch) * inv;
            for (int yy = 0; yy < h; ++yy)
                for (int xx = 0; xx < w; ++xx) dx.at4(bi, ch, yy, xx) = g;
        }
    return dx;
}

Tensor channel_mean(const Tensor& x) {
    const int b = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
    Tensor y({b, h, w});
    const double inv = 1.0 / c;
    for (int bi = 0; bi < b; ++bi)
        for (int ch = 0; ch < c; ++ch)
            for (int yy = 0; yy < h; ++yy)
                for (int xx = 0; xx < w; ++xx) y.at3(bi, yy, xx) += x.at4(bi, ch, yy, xx) * inv;
    return y;
}

Tensor channel_mean_backward(const Tensor& dy, int channels) {
    const int b = dy.dim(0), h = dy.dim(1), w = dy.dim(2);
    Tensor dx({b, channels, h, w});
    const double inv = 1.0 / channels;
    for (int bi = 0; bi < b; ++bi)
        for (int ch = 0; ch < channels; ++ch)
            for (int yy = 0; yy < h; ++yy)
                for (int xx = 0; xx < w; ++xx) dx.at4(bi, ch, yy, xx) = dy.at3(bi, yy, xx) * inv;
    return dx;
}

Tensor MinMaxNorm::forward(const Tensor& x) {
    const int b = x.dim(0);
    const std::size_t plane = x.numel() / static_cast<std::size_t>(b);
    out = Tensor(x.shape());
    argmin.assign(static_cast<std::size_t>(b), 0);
    argmax.assign(static_cast<std::size_t>(b), 0);
    range.assign(static_cast<std::size_t>(b), 0.0);
    for (int bi = 0; bi < b; ++bi) {
        const double* xi = x.data() + static_cast<std::size_t>(bi) * plane;
        int pmin = 0, pmax = 0;
        for (std::size_t i = 1; i < plane; ++i) {
            if (xi[i] < xi[static_cast<std::size_t>(pmin)]) pmin = static_cast<int>(i);
            if (xi[i] > xi[static_cast<std::size_t>(pmax)]) pmax = static_cast<int>(i);
        }
        const double r = xi[static_cast<std::size_t>(pmax)] - xi[static_cast<std::size_t>(pmin)];
        argmin[static_cast<std::size_t>(bi)] = pmin;
        argmax[static_cast<std::size_t>(bi)] = pmax;
        range[static_cast<std::size_t>(bi)] = r;
        double* oi = out.data() + static_cast<std::size_t>(bi) * plane;
        if (r <= 1e-12) continue;  // constant map -> zeros
        const double lo = xi[static_cast<std::size_t>(pmin)];
        for (std::size_t i = 0; i < plane; ++i) oi[i] = (xi[i] - lo) / r;
    }
    return out;
}

Tensor MinMaxNorm::backward(const Tensor& dy) const {
    const int b = dy.dim(0);
    const std::size_t plane = dy.numel() / static_cast<std::size_t>(b);
    Tensor dx(dy.shape());
    for (int bi = 0; bi < b; ++bi) {
        const double r = range[static_cast<std::size_t>(bi)];
        if (r <= 1e-12) continue;
        const double* gi = dy.data() + static_cast<std::size_t>(bi) * plane;
        const double* oi = out.data() + static_cast<std::size_t>(bi) * plane;
        double* dxi = dx.data() + static_cast<std::size_t>(bi) * plane;
        double s1 = 0, s2 = 0;
        for (std::size_t i = 0; i < plane; ++i) {
            s1 += gi[i];
            s2 += gi[i] * oi[i];
        }
        for (std::size_t i = 0; i < plane; ++i) dxi[i] = gi[i] / r;
        dxi[static_cast<std::size_t>(argmin[static_cast<std::size_t>(bi)])] += (s2 - s1) / r;
        dxi[static_cast<std::size_t>(argmax[static_cast<std::size_t>(bi)])] += -s2 / r;
    }
    return dx;
}

}  // namespace sgcldff
