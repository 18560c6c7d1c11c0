#include "sgcldff/saliency/saliency.hpp"

#include <algorithm>
#include <cmath>

#include "sgcldff/core/errors.hpp"

namespace sgcldff {

namespace {

// Symmetric reflection: -1 -> 0, n -> n-1.
int reflect(int i, int n) {
    while (i < 0 || i >= n) {
        if (i < 0) i = -i - 1;
        if (i >= n) i = 2 * n - 1 - i;
    }
    return i;
}

}  // namespace

FloatMap color_contrast(const ImageTensor& image) {
    const int h = image.h, w = image.w, c = image.c();
    double mean[4] = {0, 0, 0, 0};
    const double n = static_cast<double>(h) * w;
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
            for (int ch = 0; ch < c; ++ch) mean[ch] += image.at(y, x, ch);
    for (int ch = 0; ch < c; ++ch) mean[ch] /= n;

    FloatMap out(h, w);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            double d2 = 0;
            for (int ch = 0; ch < c; ++ch) {
                double d = image.at(y, x, ch) - mean[ch];
                d2 += d * d;
            }
            out.at(y, x) = static_cast<float>(std::sqrt(d2));
        }
    return out;
}

FloatMap edge_magnitude(const ImageTensor& image) {
    const int h = image.h, w = image.w;
    if (h < 3 || w < 3) throw ShapeError("edge_magnitude: requires H,W >= 3");

    FloatMap lum(h, w);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
            lum.at(y, x) = 0.299f * image.at(y, x, 0) + 0.587f * image.at(y, x, 1) +
                           0.114f * image.at(y, x, 2);

    static const int kx[3][3] = {{-1, 0, 1}, {-2, 0, 2}, {-1, 0, 1}};
    static const int ky[3][3] = {{-1, -2, -1}, {0, 0, 0}, {1, 2, 1}};
    FloatMap out(h, w);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            double gx = 0, gy = 0;
            for (int dy = -1; dy <= 1; ++dy)
                for (int dx = -1; dx <= 1; ++dx) {
                    const float v = lum.at(reflect(y + dy, h), reflect(x + dx, w));
                    gx += kx[dy + 1][dx + 1] * v;
                    gy += ky[dy + 1][dx + 1] * v;
                }
            out.at(y, x) = static_cast<float>(std::sqrt(gx * gx + gy * gy));
        }
    return out;
}

FloatMap minmax_normalize(const FloatMap& m) {
    float lo = m.data.empty() ? 0.0f : m.data[0];
    float hi = lo;
    for (float v : m.data) {
        lo = std::min(lo, v);
        hi = std::max(hi, v);
    }
    FloatMap out(m.h, m.w);
    const float range = hi - lo;
    if (range <= 0.0f) return out;  // constant map -> zeros
    for (std::size_t i = 0; i < m.data.size(); ++i) out.data[i] = (m.data[i] - lo) / range;
    return out;
}

FloatMap gaussian_blur(const FloatMap& m, double sigma) {
    if (sigma <= 0.0) return m;
    const int radius = std::max(1, static_cast<int>(std::ceil(3.0 * sigma)));
    std::vector<double> kernel(static_cast<std::size_t>(2 * radius + 1));
    double sum = 0;
    for (int i = -radius; i <= radius; ++i) {
        kernel[static_cast<std::size_t>(i + radius)] = std::exp(-0.5 * i * i / (sigma * sigma));
        sum += kernel[static_cast<std::size_t>(i + radius)];
    }
    for (auto& k : kernel) k /= sum;

    FloatMap tmp(m.h, m.w), out(m.h, m.w);
    for (int y = 0; y < m.h; ++y)
        for (int x = 0; x < m.w; ++x) {
            double acc = 0;
            for (int i = -radius; i <= radius; ++i)
                acc += kernel[static_cast<std::size_t>(i + radius)] * m.at(y, reflect(x + i, m.w));
            tmp.at(y, x) = static_cast<float>(acc);
        }
    for (int y = 0; y < m.h; ++y)
        for (int x = 0; x < m.w; ++x) {
            double acc = 0;
            for (int i = -radius; i <= radius; ++i)
                acc += kernel[static_cast<std::size_t>(i + radius)] * tmp.at(reflect(y + i, m.h), x);
            out.at(y, x) = static_cast<float>(acc);
        }
    return out;
}

SaliencyMap saliency_prior(const ImageTensor& image, double alpha, double beta,
                           double smooth_sigma) {
    if (!(alpha + beta > 0)) throw ConfigError("saliency_prior: alpha + beta must be > 0");
    FloatMap cc = minmax_normalize(color_contrast(image));
    FloatMap combined(image.h, image.w);
    if (beta != 0.0) {
        FloatMap em = minmax_normalize(edge_magnitude(image));
        for (std::size_t i = 0; i < combined.data.size(); ++i)
            combined.data[i] = static_cast<float>(alpha * cc.data[i] + beta * em.data[i]);
    } else {
        for (std::size_t i = 0; i < combined.data.size(); ++i)
            combined.data[i] = static_cast<float>(alpha * cc.data[i]);
    }
    FloatMap smoothed = gaussian_blur(combined, smooth_sigma);
    FloatMap norm = minmax_normalize(smoothed);

    SaliencyMap s(image.h, image.w);
    s.data = std::move(norm.data);
    return s;
}

ImageTensor gate_input(const ImageTensor& image, const SaliencyMap& s, double gamma) {
    if (image.channels != Channels::RGB) throw ShapeError("gate_input: expected RGB input");
    if (image.h != s.h || image.w != s.w)
        throw ShapeError("gate_input: image and saliency map shapes differ");
    if (!(gamma >= 0.0 && gamma <= 1.0)) throw ConfigError("gate_input: gamma must be in [0,1]");

    ImageTensor out(image.h, image.w, Channels::RGB_S);
    for (int y = 0; y < image.h; ++y)
        for (int x = 0; x < image.w; ++x) {
            const float sv = s.at(y, x);
            const float gate = static_cast<float>(gamma + (1.0 - gamma) * sv);
            for (int ch = 0; ch < 3; ++ch) out.at(y, x, ch) = image.at(y, x, ch) * gate;
            out.at(y, x, 3) = sv;
        }
    return out;
}

}  // namespace sgcldff
