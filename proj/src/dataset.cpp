#include "sgcldff/data/dataset.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <map>

#include "sgcldff/core/errors.hpp"
#include "sgcldff/data/png_io.hpp"

namespace fs = std::filesystem;

namespace sgcldff {

std::string split_name(Split s) {
    switch (s) {
        case Split::Train: return "train";
        case Split::Val: return "val";
        case Split::Test: return "test";
    }
    return "train";
}

Split split_from_name(const std::string& name) {
    if (name == "train") return Split::Train;
    if (name == "val") return Split::Val;
    if (name == "test") return Split::Test;
    throw DataError("unknown split name '" + name + "'");
}

std::vector<int> DatasetManifest::class_counts() const {
    std::vector<int> counts(class_names.size(), 0);
    for (const auto& s : samples) counts[static_cast<std::size_t>(s.label)]++;
    return counts;
}

namespace {

// Two-column CSV with a header row.
std::vector<std::pair<std::string, std::string>> read_csv2(const std::string& path,
                                                           const std::string& expected_header) {
    std::ifstream in(path);
    if (!in) throw DataError("dataset: cannot open '" + path + "'");
    std::string line;
    if (!std::getline(in, line)) throw DataError("dataset: empty file '" + path + "'");
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line != expected_header)
        throw DataError("dataset: '" + path + "' must start with header '" + expected_header + "'");
    std::vector<std::pair<std::string, std::string>> rows;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        auto comma = line.find(',');
        if (comma == std::string::npos)
            throw DataError("dataset: malformed row '" + line + "' in '" + path + "'");
        rows.emplace_back(line.substr(0, comma), line.substr(comma + 1));
    }
    return rows;
}

}  // namespace

DatasetManifest load_dataset(const std::string& root, Split split,
                             const std::vector<std::string>& class_names) {
    const fs::path rootp(root);
    const fs::path images = rootp / "images";
    const fs::path masks = rootp / "masks";
    if (!fs::is_directory(images)) throw DataError("dataset: missing images/ under '" + root + "'");
    if (!fs::is_directory(masks)) throw DataError("dataset: missing masks/ under '" + root + "'");

    auto labels = read_csv2((rootp / "labels.csv").string(), "id,label_name");
    auto splits = read_csv2((rootp / "split.csv").string(), "id,split");

    std::map<std::string, std::string> split_of;
    for (auto& [id, sp] : splits) {
        if (!split_of.emplace(id, sp).second)
            throw DataError("dataset: duplicate split assignment for id '" + id + "'");
    }

    DatasetManifest manifest;
    manifest.root = root;
    manifest.split = split;
    manifest.class_names = class_names;

    for (auto& [id, label_name] : labels) {
        auto it = std::find(class_names.begin(), class_names.end(), label_name);
        if (it == class_names.end())
            throw DataError("dataset: unknown label name '" + label_name + "' for id '" + id + "'");
        auto sp_it = split_of.find(id);
        if (sp_it == split_of.end())
            throw DataError("dataset: id '" + id + "' has no split assignment");
        if (split_from_name(sp_it->second) != split) continue;

        ManifestEntry entry;
        entry.id = id;
        entry.image_path = (images / (id + ".png")).string();
        entry.mask_path = (masks / (id + ".png")).string();
        entry.label = static_cast<int>(it - class_names.begin());
        if (!fs::exists(entry.image_path))
            throw DataError("dataset: missing image file for id '" + id + "'");
        if (!fs::exists(entry.mask_path))
            throw DataError("dataset: missing mask file for id '" + id + "'");
        manifest.samples.push_back(std::move(entry));
    }

    std::sort(manifest.samples.begin(), manifest.samples.end(),
              [](const ManifestEntry& a, const ManifestEntry& b) { return a.id < b.id; });
    if (manifest.samples.empty())
        throw DataError("dataset: empty split '" + split_name(split) + "' under '" + root + "'");
    return manifest;
}

Sample load_sample(const ManifestEntry& entry) {
    Sample sample;
    sample.id = entry.id;
    sample.label.index = entry.label;

    PngImage img = read_png(entry.image_path);
    sample.image = ImageTensor(img.h, img.w, Channels::RGB);
    for (int y = 0; y < img.h; ++y)
        for (int x = 0; x < img.w; ++x) {
            const std::size_t base = (static_cast<std::size_t>(y) * img.w + x) * img.channels;
            for (int ch = 0; ch < 3; ++ch) {
                // Grayscale images replicate; alpha is dropped.
                const int src = img.channels >= 3 ? ch : 0;
                sample.image.at(y, x, ch) = img.pixels[base + src] / 255.0f;
            }
        }

    PngImage msk = read_png(entry.mask_path);
    if (msk.w != img.w || msk.h != img.h)
        throw DataError("dataset: image/mask size mismatch for id '" + entry.id + "'");
    sample.mask = SegMask(msk.h, msk.w);
    for (int y = 0; y < msk.h; ++y)
        for (int x = 0; x < msk.w; ++x) {
            const std::size_t base = (static_cast<std::size_t>(y) * msk.w + x) * msk.channels;
            sample.mask.at(y, x) = msk.pixels[base] >= 128 ? 1 : 0;
        }
    return sample;
}

std::vector<std::vector<std::size_t>> make_batches(const DatasetManifest& manifest,
                                                   int batch_size, bool shuffle, Rng& rng) {
    if (batch_size < 1) throw ConfigError("make_batches: batch_size must be >= 1");
    std::vector<std::size_t> order(manifest.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    if (shuffle) {
        for (std::size_t i = order.size(); i > 1; --i) {
            std::size_t j = static_cast<std::size_t>(rng.uniform_int(static_cast<int>(i)));
            std::swap(order[i - 1], order[j]);
        }
    }
    std::vector<std::vector<std::size_t>> batches;
    for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(batch_size)) {
        const std::size_t end = std::min(order.size(), start + static_cast<std::size_t>(batch_size));
        batches.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(start),
                             order.begin() + static_cast<std::ptrdiff_t>(end));
    }
    return batches;
}

}  // namespace sgcldff
