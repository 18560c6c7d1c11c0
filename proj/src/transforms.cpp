#include "sgcldff/data/transforms.hpp"

#include <algorithm>
#include <cmath>

#include "sgcldff/core/errors.hpp"

namespace sgcldff {

namespace {

int clampi(int v, int lo, int hi) { return v < lo ? lo : (v > hi ? hi : v); }

int reflect(int i, int n) {
    while (i < 0 || i >= n) {
        if (i < 0) i = -i - 1;
        if (i >= n) i = 2 * n - 1 - i;
    }
    return i;
}

// Bilinear sample with reflection padding at arbitrary (sy, sx).
float sample_bilinear_reflect(const ImageTensor& img, double sy, double sx, int ch) {
    int y0 = static_cast<int>(std::floor(sy));
    int x0 = static_cast<int>(std::floor(sx));
    double fy = sy - y0, fx = sx - x0;
    int y0r = reflect(y0, img.h), y1r = reflect(y0 + 1, img.h);
    int x0r = reflect(x0, img.w), x1r = reflect(x0 + 1, img.w);
    double v = (1 - fy) * (1 - fx) * img.at(y0r, x0r, ch) + (1 - fy) * fx * img.at(y0r, x1r, ch) +
               fy * (1 - fx) * img.at(y1r, x0r, ch) + fy * fx * img.at(y1r, x1r, ch);
    return static_cast<float>(v);
}

}  // namespace

ImageTensor bilinear_resize_image(const ImageTensor& image, int out_h, int out_w) {
    if (out_h == image.h && out_w == image.w) return image;
    ImageTensor out(out_h, out_w, image.channels);
    const double sy_scale = static_cast<double>(image.h) / out_h;
    const double sx_scale = static_cast<double>(image.w) / out_w;
    for (int oy = 0; oy < out_h; ++oy) {
        const double sy = (oy + 0.5) * sy_scale - 0.5;
        int y0 = static_cast<int>(std::floor(sy));
        double fy = sy - y0;
        int y0c = clampi(y0, 0, image.h - 1), y1c = clampi(y0 + 1, 0, image.h - 1);
        for (int ox = 0; ox < out_w; ++ox) {
            const double sx = (ox + 0.5) * sx_scale - 0.5;
            int x0 = static_cast<int>(std::floor(sx));
            double fx = sx - x0;
            int x0c = clampi(x0, 0, image.w - 1), x1c = clampi(x0 + 1, 0, image.w - 1);
            for (int ch = 0; ch < image.c(); ++ch) {
                double v = (1 - fy) * (1 - fx) * image.at(y0c, x0c, ch) +
                           (1 - fy) * fx * image.at(y0c, x1c, ch) +
                           fy * (1 - fx) * image.at(y1c, x0c, ch) +
                           fy * fx * image.at(y1c, x1c, ch);
                out.at(oy, ox, ch) = static_cast<float>(v);
            }
        }
    }
    return out;
}

SegMask nearest_resize_mask(const SegMask& mask, int out_h, int out_w) {
    if (out_h == mask.h && out_w == mask.w) return mask;
    SegMask out(out_h, out_w);
    const double sy_scale = static_cast<double>(mask.h) / out_h;
    const double sx_scale = static_cast<double>(mask.w) / out_w;
    for (int oy = 0; oy < out_h; ++oy) {
        int sy = clampi(static_cast<int>(std::floor((oy + 0.5) * sy_scale)), 0, mask.h - 1);
        for (int ox = 0; ox < out_w; ++ox) {
            int sx = clampi(static_cast<int>(std::floor((ox + 0.5) * sx_scale)), 0, mask.w - 1);
            out.at(oy, ox) = mask.at(sy, sx);
        }
    }
    return out;
}

Sample preprocess(const Sample& sample, int image_size) {
    Sample out;
    out.id = sample.id;
    out.label = sample.label;
    out.image = bilinear_resize_image(sample.image, image_size, image_size);
    out.mask = nearest_resize_mask(sample.mask, image_size, image_size);

    // Per-channel min-max normalization; a constant channel becomes zeros.
    for (int ch = 0; ch < out.image.c(); ++ch) {
        float lo = out.image.at(0, 0, ch), hi = lo;
        for (int y = 0; y < out.image.h; ++y)
            for (int x = 0; x < out.image.w; ++x) {
                float v = out.image.at(y, x, ch);
                lo = std::min(lo, v);
                hi = std::max(hi, v);
            }
        const float range = hi - lo;
        for (int y = 0; y < out.image.h; ++y)
            for (int x = 0; x < out.image.w; ++x) {
                float& v = out.image.at(y, x, ch);
                v = range > 0.0f ? (v - lo) / range : 0.0f;
            }
    }
    return out;
}

Sample rotate_sample(const Sample& sample, double degrees) {
    const double rad = degrees * 3.14159265358979323846 / 180.0;
    const double cs = std::cos(rad), sn = std::sin(rad);
    const ImageTensor& img = sample.image;
    const double cy = (img.h - 1) / 2.0, cx = (img.w - 1) / 2.0;

    Sample out;
    out.id = sample.id;
    out.label = sample.label;
    out.image = ImageTensor(img.h, img.w, img.channels);
    out.mask = SegMask(sample.mask.h, sample.mask.w);

    for (int y = 0; y < img.h; ++y)
        for (int x = 0; x < img.w; ++x) {
            // Inverse mapping: rotate output coords back into the source.
            const double dy = y - cy, dx = x - cx;
            const double sy = cs * dy + sn * dx + cy;
            const double sx = -sn * dy + cs * dx + cx;
            for (int ch = 0; ch < img.c(); ++ch) {
                float v = sample_bilinear_reflect(img, sy, sx, ch);
                out.image.at(y, x, ch) = std::clamp(v, 0.0f, 1.0f);
            }
            const int my = reflect(static_cast<int>(std::lround(sy)), sample.mask.h);
            const int mx = reflect(static_cast<int>(std::lround(sx)), sample.mask.w);
            out.mask.at(y, x) = sample.mask.at(my, mx);
        }
    return out;
}

Sample hflip_sample(const Sample& sample) {
    Sample out;
    out.id = sample.id;
    out.label = sample.label;
    out.image = ImageTensor(sample.image.h, sample.image.w, sample.image.channels);
    out.mask = SegMask(sample.mask.h, sample.mask.w);
    for (int y = 0; y < sample.image.h; ++y)
        for (int x = 0; x < sample.image.w; ++x) {
            for (int ch = 0; ch < sample.image.c(); ++ch)
                out.image.at(y, x, ch) = sample.image.at(y, sample.image.w - 1 - x, ch);
            out.mask.at(y, x) = sample.mask.at(y, sample.mask.w - 1 - x);
        }
    return out;
}

Sample vflip_sample(const Sample& sample) {
    Sample out;
    out.id = sample.id;
    out.label = sample.label;
    out.image = ImageTensor(sample.image.h, sample.image.w, sample.image.channels);
    out.mask = SegMask(sample.mask.h, sample.mask.w);
    for (int y = 0; y < sample.image.h; ++y)
        for (int x = 0; x < sample.image.w; ++x) {
            for (int ch = 0; ch < sample.image.c(); ++ch)
                out.image.at(y, x, ch) = sample.image.at(sample.image.h - 1 - y, x, ch);
            out.mask.at(y, x) = sample.mask.at(sample.mask.h - 1 - y, x);
        }
    return out;
}

ImageTensor adjust_contrast(const ImageTensor& image, double factor) {
    ImageTensor out = image;
    for (int ch = 0; ch < image.c(); ++ch) {
        double mean = 0;
        for (int y = 0; y < image.h; ++y)
            for (int x = 0; x < image.w; ++x) mean += image.at(y, x, ch);
        mean /= static_cast<double>(image.h) * image.w;
        for (int y = 0; y < image.h; ++y)
            for (int x = 0; x < image.w; ++x) {
                double v = mean + factor * (image.at(y, x, ch) - mean);
                out.at(y, x, ch) = static_cast<float>(std::clamp(v, 0.0, 1.0));
            }
    }
    return out;
}

ImageTensor add_gaussian_noise(const ImageTensor& image, double sigma, Rng& rng) {
    ImageTensor out = image;
    for (auto& v : out.data)
        v = static_cast<float>(std::clamp(v + sigma * rng.normal(), 0.0, 1.0));
    return out;
}

Sample augment(const Sample& sample, const AugmentationSpec& spec, Rng& rng) {
    if (!spec.enabled) return sample;
    Sample out = sample;
    if (spec.rotation_deg > 0) {
        const double theta = rng.uniform(-spec.rotation_deg, spec.rotation_deg);
        out = rotate_sample(out, theta);
    }
    if (spec.hflip && rng.bernoulli(0.5)) out = hflip_sample(out);
    if (spec.vflip && rng.bernoulli(0.5)) out = vflip_sample(out);
    if (spec.contrast_jitter > 0) {
        const double f = rng.uniform(1.0 - spec.contrast_jitter, 1.0 + spec.contrast_jitter);
        out.image = adjust_contrast(out.image, f);
    }
    if (spec.noise_sigma > 0) out.image = add_gaussian_noise(out.image, spec.noise_sigma, rng);
    return out;
}

}  // namespace sgcldff
