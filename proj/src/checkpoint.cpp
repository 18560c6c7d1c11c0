#include "sgcldff/core/checkpoint.hpp"

#include <cstring>
#include <fstream>
#include <vector>

#include "json.hpp"
#include "sgcldff/core/errors.hpp"

namespace sgcldff {

using nlohmann::json;

namespace {

constexpr char kMagic[4] = {'S', 'G', 'C', '1'};
constexpr int kFormatVersion = 1;

void put_u32le(std::ostream& out, std::uint32_t v) {
    unsigned char b[4] = {static_cast<unsigned char>(v & 0xff),
                          static_cast<unsigned char>((v >> 8) & 0xff),
                          static_cast<unsigned char>((v >> 16) & 0xff),
                          static_cast<unsigned char>((v >> 24) & 0xff)};
    out.write(reinterpret_cast<const char*>(b), 4);
}

std::uint32_t get_u32le(std::istream& in) {
    unsigned char b[4];
    in.read(reinterpret_cast<char*>(b), 4);
    if (!in) throw CheckpointError("checkpoint: truncated file");
    return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
           (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

void put_f32le(std::vector<unsigned char>& out, float v) {
    std::uint32_t bits;
    std::memcpy(&bits, &v, 4);
    out.push_back(static_cast<unsigned char>(bits & 0xff));
    out.push_back(static_cast<unsigned char>((bits >> 8) & 0xff));
    out.push_back(static_cast<unsigned char>((bits >> 16) & 0xff));
    out.push_back(static_cast<unsigned char>((bits >> 24) & 0xff));
}

float get_f32le(const unsigned char* p) {
    std::uint32_t bits = static_cast<std::uint32_t>(p[0]) |
                         (static_cast<std::uint32_t>(p[1]) << 8) |
                         (static_cast<std::uint32_t>(p[2]) << 16) |
                         (static_cast<std::uint32_t>(p[3]) << 24);
    float v;
    std::memcpy(&v, &bits, 4);
    return v;
}

}  // namespace

void save_checkpoint(const NamedArrays& weights, const ExperimentConfig& cfg, int epoch,
                     const std::string& path) {
    json arrays = json::array();
    for (const auto& [name, t] : weights) {
        if (!t.all_finite())
            throw CheckpointError("checkpoint: array '" + name + "' has non-finite values");
        arrays.push_back({{"name", name}, {"shape", t.shape()}, {"dtype", "f32"}});
    }
    json manifest;
    manifest["format_version"] = kFormatVersion;
    manifest["epoch"] = epoch;
    manifest["config"] = json::parse(serialize_config(cfg));
    manifest["arrays"] = arrays;
    const std::string mtext = manifest.dump();

    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("checkpoint: cannot write '" + path + "'");
    out.write(kMagic, 4);
    put_u32le(out, static_cast<std::uint32_t>(mtext.size()));
    out.write(mtext.data(), static_cast<std::streamsize>(mtext.size()));
    std::vector<unsigned char> payload;
    for (const auto& [name, t] : weights) {
        payload.clear();
        payload.reserve(t.numel() * 4);
        for (std::size_t i = 0; i < t.numel(); ++i)
            put_f32le(payload, static_cast<float>(t[i]));
        out.write(reinterpret_cast<const char*>(payload.data()),
                  static_cast<std::streamsize>(payload.size()));
    }
    if (!out) throw IoError("checkpoint: short write to '" + path + "'");
}

Checkpoint load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw CheckpointError("checkpoint: cannot open '" + path + "'");
    char magic[4];
    in.read(magic, 4);
    if (!in || std::memcmp(magic, kMagic, 4) != 0)
        throw CheckpointError("checkpoint: bad magic (not a .sgc file)");
    const std::uint32_t mlen = get_u32le(in);
    std::string mtext(mlen, '\0');
    in.read(mtext.data(), static_cast<std::streamsize>(mlen));
    if (!in) throw CheckpointError("checkpoint: truncated manifest");

    json manifest;
    try {
        manifest = json::parse(mtext);
    } catch (const json::exception& e) {
        throw CheckpointError(std::string("checkpoint: manifest parse failure: ") + e.what());
    }
    if (!manifest.contains("format_version") ||
        manifest.at("format_version").get<int>() != kFormatVersion)
        throw CheckpointError("checkpoint: format version mismatch");

    Checkpoint ckpt;
    ckpt.epoch = manifest.at("epoch").get<int>();
    try {
        ckpt.config = parse_config(manifest.at("config").dump());
    } catch (const ConfigError& e) {
        throw CheckpointError(std::string("checkpoint: embedded config invalid: ") + e.what());
    }

    for (const auto& entry : manifest.at("arrays")) {
        const std::string name = entry.at("name").get<std::string>();
        const std::vector<int> shape = entry.at("shape").get<std::vector<int>>();
        if (entry.at("dtype").get<std::string>() != "f32")
            throw CheckpointError("checkpoint: array '" + name + "' has unsupported dtype");
        Tensor t(shape);
        std::vector<unsigned char> buf(t.numel() * 4);
        in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
        if (!in) throw CheckpointError("checkpoint: truncated payload for '" + name + "'");
        for (std::size_t i = 0; i < t.numel(); ++i)
            t[i] = static_cast<double>(get_f32le(&buf[i * 4]));
        ckpt.weights.emplace(name, std::move(t));
    }
    return ckpt;
}

void check_checkpoint_compatible(const ExperimentConfig& stored, const ExperimentConfig& run) {
    auto mismatch = [](const std::string& field) {
        throw CheckpointError("checkpoint: config mismatch on " + field);
    };
    if (stored.num_classes != run.num_classes) mismatch("num_classes");
    if (stored.base_channels != run.base_channels) mismatch("base_channels");
    if (stored.fusion_dim != run.fusion_dim) mismatch("fusion_dim");
    if (stored.fusion_cardinality != run.fusion_cardinality) mismatch("fusion_cardinality");
}

}  // namespace sgcldff
