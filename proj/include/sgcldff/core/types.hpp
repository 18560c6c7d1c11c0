#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "sgcldff/core/errors.hpp"

namespace sgcldff {

enum class Channels { RGB = 3, RGB_S = 4 };

// H x W x C float image, values in [0,1], interleaved channels.
// RGB_S carries the saliency prior as channel 4.
struct ImageTensor {
    int h = 0;
    int w = 0;
    Channels channels = Channels::RGB;
    std::vector<float> data;  // h*w*c, row-major, channel-interleaved

    ImageTensor() = default;
    ImageTensor(int height, int width, Channels ch)
        : h(height), w(width), channels(ch),
          data(static_cast<std::size_t>(height) * width * static_cast<int>(ch), 0.0f) {}

    int c() const { return static_cast<int>(channels); }
    std::size_t idx(int y, int x, int ch) const {
        return (static_cast<std::size_t>(y) * w + x) * c() + ch;
    }
    float& at(int y, int x, int ch) { return data[idx(y, x, ch)]; }
    float at(int y, int x, int ch) const { return data[idx(y, x, ch)]; }

    // Full invariant check; enforced at I/O boundaries rather than in the
    // constructor so tests can build tiny synthetic inputs.
    void validate() const {
        if (h < 8 || w < 8) throw ShapeError("image: H and W must be >= 8");
        if (data.size() != static_cast<std::size_t>(h) * w * c())
            throw ShapeError("image: data size mismatch");
        for (float v : data)
            if (!(v >= 0.0f && v <= 1.0f))
                throw ShapeError("image: values must be finite and in [0,1]");
    }
};

// H x W float map in [0,1]; min 0 / max 1 unless identically zero.
struct SaliencyMap {
    int h = 0;
    int w = 0;
    std::vector<float> data;

    SaliencyMap() = default;
    SaliencyMap(int height, int width)
        : h(height), w(width), data(static_cast<std::size_t>(height) * width, 0.0f) {}

    float& at(int y, int x) { return data[static_cast<std::size_t>(y) * w + x]; }
    float at(int y, int x) const { return data[static_cast<std::size_t>(y) * w + x]; }
};

// Binary H x W mask, 1 = WBC foreground.
struct SegMask {
    int h = 0;
    int w = 0;
    std::vector<std::uint8_t> data;

    SegMask() = default;
    SegMask(int height, int width)
        : h(height), w(width), data(static_cast<std::size_t>(height) * width, 0) {}

    std::uint8_t& at(int y, int x) { return data[static_cast<std::size_t>(y) * w + x]; }
    std::uint8_t at(int y, int x) const { return data[static_cast<std::size_t>(y) * w + x]; }

    std::size_t count() const {
        std::size_t n = 0;
        for (auto v : data) n += v;
        return n;
    }
};

inline const std::vector<std::string>& default_class_names() {
    static const std::vector<std::string> names = {"neutrophil", "lymphocyte", "monocyte",
                                                   "eosinophil"};
    return names;
}

struct ClassLabel {
    int index = 0;
};

struct Sample {
    ImageTensor image;  // RGB
    SegMask mask;
    ClassLabel label;
    std::string id;
};

// Per-term loss values; total is the weighted combination.
struct LossBreakdown {
    double total = 0.0;
    double cls = 0.0;
    double seg_dice = 0.0;
    double seg_bce = 0.0;
    double sal = 0.0;
};

}  // namespace sgcldff
