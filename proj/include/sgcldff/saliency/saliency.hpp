#pragma once

#include <vector>

#include "sgcldff/core/types.hpp"

namespace sgcldff {

// Plain H x W float map used by the low-level saliency operators before
// normalization.
struct FloatMap {
    int h = 0;
    int w = 0;
    std::vector<float> data;

    FloatMap() = default;
    FloatMap(int height, int width)
        : h(height), w(width), data(static_cast<std::size_t>(height) * width, 0.0f) {}

    float& at(int y, int x) { return data[static_cast<std::size_t>(y) * w + x]; }
    float at(int y, int x) const { return data[static_cast<std::size_t>(y) * w + x]; }
};

// Per pixel: Euclidean distance from the image-mean color.
FloatMap color_contrast(const ImageTensor& image);

// Sobel gradient magnitude of luminance (0.299R + 0.587G + 0.114B),
// reflection-padded borders. Requires H, W >= 3.
FloatMap edge_magnitude(const ImageTensor& image);

// Min-max to [0,1]; constant input maps to all zeros.
FloatMap minmax_normalize(const FloatMap& m);

// Separable Gaussian blur with reflection padding; sigma <= 0 is a no-op.
FloatMap gaussian_blur(const FloatMap& m, double sigma);

// normalize( blur( alpha*normalize(color_contrast) + beta*normalize(edge_magnitude) ) )
SaliencyMap saliency_prior(const ImageTensor& image, double alpha, double beta,
                           double smooth_sigma);

// RGB scaled by (gamma + (1-gamma)*S), S appended as channel 4.
ImageTensor gate_input(const ImageTensor& image, const SaliencyMap& s, double gamma);

}  // namespace sgcldff
