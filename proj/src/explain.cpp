#include "sgcldff/explain/explain.hpp"

#include <algorithm>
#include <cmath>

#include "sgcldff/core/errors.hpp"
#include "sgcldff/data/png_io.hpp"

namespace sgcldff {

CamLayer cam_layer_from_name(const std::string& name) {
    if (name == "fused") return CamLayer::Fused;
    if (name == "stage4") return CamLayer::Stage4;
    throw ConfigError("grad_cam: unknown target layer '" + name + "'");
}

FloatMap cam_from_gradients(const Tensor& features, const Tensor& grads) {
    if (!features.same_shape(grads)) throw ShapeError("grad_cam: feature/grad shape mismatch");
    const int c = features.dim(1), h = features.dim(2), w = features.dim(3);
    const double inv_hw = 1.0 / (static_cast<double>(h) * w);

    FloatMap cam(h, w);
    for (int ch = 0; ch < c; ++ch) {
        double alpha = 0;
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x) alpha += grads.at4(0, ch, y, x);
        alpha *= inv_hw;
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x)
                cam.at(y, x) += static_cast<float>(alpha * features.at4(0, ch, y, x));
    }
    for (auto& v : cam.data) v = std::max(v, 0.0f);
    return cam;
}

FloatMap grad_cam(Model& model, const ImageTensor& gated_input, int target_class,
                  CamLayer layer) {
    const ExperimentConfig& cfg = model.config();
    if (target_class < 0 || target_class >= cfg.num_classes)
        throw ConfigError("grad_cam: target_class out of range");
    if (gated_input.channels != Channels::RGB_S)
        throw ShapeError("grad_cam: expected an RGB_S input");

    const int s = cfg.image_size;
    Tensor x({1, 4, s, s});
    for (int y = 0; y < s; ++y)
        for (int xx = 0; xx < s; ++xx)
            for (int ch = 0; ch < 4; ++ch) x.at4(0, ch, y, xx) = gated_input.at(y, xx, ch);

    ModelOutput out = model.forward(x);
    Tensor d_cls({1, cfg.num_classes});
    d_cls.at2(0, target_class) = 1.0;
    Model::FeatureGrads fg = model.feature_gradients(d_cls);
    model.zero_grad();

    const Tensor& features =
        layer == CamLayer::Fused ? out.pyramid.fused : out.pyramid.stages[3];
    const Tensor& grads = layer == CamLayer::Fused ? fg.d_fused : fg.d_stage3;

    FloatMap raw = cam_from_gradients(features, grads);
    Tensor as4({1, 1, raw.h, raw.w});
    for (std::size_t i = 0; i < raw.data.size(); ++i) as4[i] = raw.data[i];
    Tensor up = bilinear_resize(as4, s, s);
    FloatMap full(s, s);
    for (std::size_t i = 0; i < full.data.size(); ++i) full.data[i] = static_cast<float>(up[i]);
    return minmax_normalize(full);
}

double saliency_consistency(const FloatMap& cam, const SaliencyMap& prior) {
    FloatMap resampled = cam;
    if (cam.h != prior.h || cam.w != prior.w) {
        Tensor as4({1, 1, cam.h, cam.w});
        for (std::size_t i = 0; i < cam.data.size(); ++i) as4[i] = cam.data[i];
        Tensor r = bilinear_resize(as4, prior.h, prior.w);
        resampled = FloatMap(prior.h, prior.w);
        for (std::size_t i = 0; i < resampled.data.size(); ++i)
            resampled.data[i] = static_cast<float>(r[i]);
    }

    const std::size_t n = resampled.data.size();
    double mean_a = 0, mean_b = 0;
    for (std::size_t i = 0; i < n; ++i) {
        mean_a += resampled.data[i];
        mean_b += prior.data[i];
    }
    mean_a /= static_cast<double>(n);
    mean_b /= static_cast<double>(n);
    double cov = 0, var_a = 0, var_b = 0;
    for (std::size_t i = 0; i < n; ++i) {
        const double da = resampled.data[i] - mean_a;
        const double db = prior.data[i] - mean_b;
        cov += da * db;
        var_a += da * da;
        var_b += db * db;
    }
    if (var_a <= 1e-12 || var_b <= 1e-12) return 0.5;  // constant map convention
    const double r = cov / std::sqrt(var_a * var_b);
    return (r + 1.0) / 2.0;
}

void render_overlay(const ImageTensor& image, const FloatMap& heatmap,
                    const std::string& out_path) {
    if (image.h != heatmap.h || image.w != heatmap.w)
        throw ShapeError("render_overlay: image/heatmap shape mismatch");
    std::vector<std::uint8_t> rgb(static_cast<std::size_t>(image.h) * image.w * 3);
    for (int y = 0; y < image.h; ++y)
        for (int x = 0; x < image.w; ++x) {
            const double hv = std::clamp(static_cast<double>(heatmap.at(y, x)), 0.0, 1.0);
            const double map_r = hv, map_g = 0.0, map_b = 1.0 - hv;
            const std::size_t o = (static_cast<std::size_t>(y) * image.w + x) * 3;
            rgb[o + 0] = static_cast<std::uint8_t>(
                std::lround(std::clamp(0.6 * image.at(y, x, 0) + 0.4 * map_r, 0.0, 1.0) * 255.0));
            rgb[o + 1] = static_cast<std::uint8_t>(
                std::lround(std::clamp(0.6 * image.at(y, x, 1) + 0.4 * map_g, 0.0, 1.0) * 255.0));
            rgb[o + 2] = static_cast<std::uint8_t>(
                std::lround(std::clamp(0.6 * image.at(y, x, 2) + 0.4 * map_b, 0.0, 1.0) * 255.0));
        }
    write_png(out_path, image.w, image.h, 3, rgb);
}

void write_heatmap_png(const FloatMap& heatmap, const std::string& out_path) {
    std::vector<std::uint8_t> gray(heatmap.data.size());
    for (std::size_t i = 0; i < gray.size(); ++i)
        gray[i] = static_cast<std::uint8_t>(
            std::lround(std::clamp(static_cast<double>(heatmap.data[i]), 0.0, 1.0) * 255.0));
    write_png(out_path, heatmap.w, heatmap.h, 1, gray);
}

}  // namespace sgcldff
