#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace sgcldff {

// Minimal PNG codec over zlib. Writes 8-bit grayscale/RGB with filter type 0
// (byte-deterministic output); reads non-interlaced 8-bit images of color
// types 0, 2, 4, 6 (palette and 16-bit files are rejected).
struct PngImage {
    int w = 0;
    int h = 0;
    int channels = 0;  // 1 gray, 2 gray+alpha, 3 RGB, 4 RGBA
    std::vector<std::uint8_t> pixels;  // row-major, interleaved
};

PngImage read_png(const std::string& path);
void write_png(const std::string& path, int w, int h, int channels,
               const std::vector<std::uint8_t>& pixels);

}  // namespace sgcldff
