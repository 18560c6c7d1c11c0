#pragma once

#include "sgcldff/core/config.hpp"
#include "sgcldff/core/rng.hpp"
#include "sgcldff/core/types.hpp"

namespace sgcldff {

// Bilinear resample with half-pixel centers; size-preserving calls are exact
// identities.
ImageTensor bilinear_resize_image(const ImageTensor& image, int out_h, int out_w);
SegMask nearest_resize_mask(const SegMask& mask, int out_h, int out_w);

// Resize to image_size^2 and per-channel min-max normalize to [0,1]
// (constant channel -> zeros). Mask is nearest-neighbor resized.
Sample preprocess(const Sample& sample, int image_size);

// Elementary transforms; augment() composes them with rng draws.
Sample rotate_sample(const Sample& sample, double degrees);  // reflection padding
Sample hflip_sample(const Sample& sample);
Sample vflip_sample(const Sample& sample);
ImageTensor adjust_contrast(const ImageTensor& image, double factor);
ImageTensor add_gaussian_noise(const ImageTensor& image, double sigma, Rng& rng);

Sample augment(const Sample& sample, const AugmentationSpec& spec, Rng& rng);

}  // namespace sgcldff
