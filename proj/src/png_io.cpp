#include "sgcldff/data/png_io.hpp"

#include <zlib.h>

#include <cstdio>
#include <cstring>
#include <fstream>

#include "sgcldff/core/errors.hpp"

namespace sgcldff {

namespace {

const unsigned char kSignature[8] = {0x89, 'P', 'N', 'G', '\r', '\n', 0x1a, '\n'};

void put_u32be(std::vector<std::uint8_t>& out, std::uint32_t v) {
    out.push_back(static_cast<std::uint8_t>((v >> 24) & 0xff));
    out.push_back(static_cast<std::uint8_t>((v >> 16) & 0xff));
    out.push_back(static_cast<std::uint8_t>((v >> 8) & 0xff));
    out.push_back(static_cast<std::uint8_t>(v & 0xff));
}

std::uint32_t get_u32be(const std::uint8_t* p) {
    return (static_cast<std::uint32_t>(p[0]) << 24) | (static_cast<std::uint32_t>(p[1]) << 16) |
           (static_cast<std::uint32_t>(p[2]) << 8) | static_cast<std::uint32_t>(p[3]);
}

void append_chunk(std::vector<std::uint8_t>& out, const char type[4],
                  const std::vector<std::uint8_t>& data) {
    put_u32be(out, static_cast<std::uint32_t>(data.size()));
    std::size_t crc_start = out.size();
    out.insert(out.end(), type, type + 4);
    out.insert(out.end(), data.begin(), data.end());
    std::uint32_t crc = static_cast<std::uint32_t>(
        crc32(0L, out.data() + crc_start, static_cast<uInt>(4 + data.size())));
    put_u32be(out, crc);
}

std::vector<std::uint8_t> zlib_compress(const std::vector<std::uint8_t>& raw) {
    uLongf bound = compressBound(static_cast<uLong>(raw.size()));
    std::vector<std::uint8_t> out(bound);
    if (compress2(out.data(), &bound, raw.data(), static_cast<uLong>(raw.size()), 6) != Z_OK)
        throw IoError("png: deflate failure");
    out.resize(bound);
    return out;
}

std::vector<std::uint8_t> zlib_decompress(const std::vector<std::uint8_t>& comp,
                                          std::size_t expected) {
    std::vector<std::uint8_t> out(expected);
    z_stream zs;
    std::memset(&zs, 0, sizeof(zs));
    if (inflateInit(&zs) != Z_OK) throw IoError("png: inflate init failure");
    zs.next_in = const_cast<Bytef*>(comp.data());
    zs.avail_in = static_cast<uInt>(comp.size());
    zs.next_out = out.data();
    zs.avail_out = static_cast<uInt>(out.size());
    int rc = inflate(&zs, Z_FINISH);
    inflateEnd(&zs);
    if (rc != Z_STREAM_END || zs.total_out != expected)
        throw DataError("png: corrupt compressed stream");
    return out;
}

int paeth(int a, int b, int c) {
    int p = a + b - c;
    int pa = std::abs(p - a), pb = std::abs(p - b), pc = std::abs(p - c);
    if (pa <= pb && pa <= pc) return a;
    if (pb <= pc) return b;
    return c;
}

}  // namespace

void write_png(const std::string& path, int w, int h, int channels,
               const std::vector<std::uint8_t>& pixels) {
    if (channels != 1 && channels != 3) throw IoError("png: writer supports 1 or 3 channels");
    if (w < 1 || h < 1 ||
        pixels.size() != static_cast<std::size_t>(w) * h * channels)
        throw IoError("png: pixel buffer size mismatch");

    std::vector<std::uint8_t> ihdr;
    put_u32be(ihdr, static_cast<std::uint32_t>(w));
    put_u32be(ihdr, static_cast<std::uint32_t>(h));
    ihdr.push_back(8);                                    // bit depth
    ihdr.push_back(channels == 1 ? 0 : 2);                // gray / truecolor
    ihdr.push_back(0);                                    // compression
    ihdr.push_back(0);                                    // filter method
    ihdr.push_back(0);                                    // no interlace

    const std::size_t stride = static_cast<std::size_t>(w) * channels;
    std::vector<std::uint8_t> raw;
    raw.reserve((stride + 1) * h);
    for (int y = 0; y < h; ++y) {
        raw.push_back(0);  // filter: none
        raw.insert(raw.end(), pixels.begin() + static_cast<std::ptrdiff_t>(y * stride),
                   pixels.begin() + static_cast<std::ptrdiff_t>((y + 1) * stride));
    }

    std::vector<std::uint8_t> file(kSignature, kSignature + 8);
    append_chunk(file, "IHDR", ihdr);
    append_chunk(file, "IDAT", zlib_compress(raw));
    append_chunk(file, "IEND", {});

    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("png: cannot write '" + path + "'");
    out.write(reinterpret_cast<const char*>(file.data()), static_cast<std::streamsize>(file.size()));
    if (!out) throw IoError("png: short write to '" + path + "'");
}

PngImage read_png(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("png: cannot open '" + path + "'");
    std::vector<std::uint8_t> file((std::istreambuf_iterator<char>(in)),
                                   std::istreambuf_iterator<char>());
    if (file.size() < 8 || std::memcmp(file.data(), kSignature, 8) != 0)
        throw DataError("png: '" + path + "' is not a PNG file");

    PngImage img;
    int bit_depth = 0, color_type = 0;
    std::vector<std::uint8_t> idat;
    std::size_t pos = 8;
    bool seen_ihdr = false, seen_iend = false;
    while (pos + 8 <= file.size()) {
        std::uint32_t len = get_u32be(&file[pos]);
        if (pos + 12 + len > file.size()) throw DataError("png: truncated chunk in '" + path + "'");
        const char* type = reinterpret_cast<const char*>(&file[pos + 4]);
        const std::uint8_t* data = &file[pos + 8];
        if (std::memcmp(type, "IHDR", 4) == 0) {
            if (len != 13) throw DataError("png: bad IHDR");
            img.w = static_cast<int>(get_u32be(data));
            img.h = static_cast<int>(get_u32be(data + 4));
            bit_depth = data[8];
            color_type = data[9];
            if (data[12] != 0) throw DataError("png: interlaced files are unsupported");
            if (bit_depth != 8) throw DataError("png: only 8-bit depth is supported");
            if (color_type != 0 && color_type != 2 && color_type != 4 && color_type != 6)
                throw DataError("png: unsupported color type");
            seen_ihdr = true;
        } else if (std::memcmp(type, "IDAT", 4) == 0) {
            idat.insert(idat.end(), data, data + len);
        } else if (std::memcmp(type, "IEND", 4) == 0) {
            seen_iend = true;
            break;
        }
        pos += 12 + len;
    }
    if (!seen_ihdr || !seen_iend || img.w < 1 || img.h < 1)
        throw DataError("png: malformed file '" + path + "'");

    static const int kChannels[] = {1, 0, 3, 0, 2, 0, 4};
    img.channels = kChannels[color_type];
    const std::size_t stride = static_cast<std::size_t>(img.w) * img.channels;
    std::vector<std::uint8_t> raw = zlib_decompress(idat, (stride + 1) * img.h);

    img.pixels.assign(stride * img.h, 0);
    const int bpp = img.channels;  // bytes per pixel at depth 8
    for (int y = 0; y < img.h; ++y) {
        const std::uint8_t filter = raw[y * (stride + 1)];
        const std::uint8_t* src = &raw[y * (stride + 1) + 1];
        std::uint8_t* dst = &img.pixels[y * stride];
        const std::uint8_t* up = (y > 0) ? &img.pixels[(y - 1) * stride] : nullptr;
        for (std::size_t x = 0; x < stride; ++x) {
            int a = (x >= static_cast<std::size_t>(bpp)) ? dst[x - bpp] : 0;
            int b = up ? up[x] : 0;
            int c = (up && x >= static_cast<std::size_t>(bpp)) ? up[x - bpp] : 0;
            int v = src[x];
            switch (filter) {
                case 0: break;
                case 1: v += a; break;
                case 2: v += b; break;
                case 3: v += (a + b) / 2; break;
                case 4: v += paeth(a, b, c); break;
                default: throw DataError("png: unknown filter type");
            }
            dst[x] = static_cast<std::uint8_t>(v & 0xff);
        }
    }
    return img;
}

}  // namespace sgcldff
