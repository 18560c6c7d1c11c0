#pragma once

#include <string>

#include "sgcldff/core/config.hpp"
#include "sgcldff/core/tensor.hpp"
#include "sgcldff/core/types.hpp"
#include "sgcldff/model/network.hpp"
#include "sgcldff/saliency/saliency.hpp"

namespace sgcldff {

enum class CamLayer { Fused, Stage4 };

CamLayer cam_layer_from_name(const std::string& name);

// ReLU(sum_k alpha_k * A_k) at feature resolution, where alpha_k is the
// spatial mean of the k-th channel's gradient. Not yet normalized.
// features/grads: [1, C, h, w].
FloatMap cam_from_gradients(const Tensor& features, const Tensor& grads);

// Full Grad-CAM for one RGB_S input: forward, backprop the target logit to
// the chosen layer, weight channels, upsample to H x W, min-max normalize.
FloatMap grad_cam(Model& model, const ImageTensor& gated_input, int target_class,
                  CamLayer layer = CamLayer::Fused);

// Pearson correlation mapped to [0,1] via (r+1)/2; 0.5 when either map is
// constant. The CAM is resampled to the prior's grid when shapes differ.
double saliency_consistency(const FloatMap& cam, const SaliencyMap& prior);

// 60/40 blend of the image with a blue-to-red colormap of the heatmap.
void render_overlay(const ImageTensor& image, const FloatMap& heatmap,
                    const std::string& out_path);

// 8-bit grayscale PNG of a [0,1] map.
void write_heatmap_png(const FloatMap& heatmap, const std::string& out_path);

}  // namespace sgcldff
