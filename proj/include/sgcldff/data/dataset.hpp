#pragma once

#include <string>
#include <vector>

#include "sgcldff/core/rng.hpp"
#include "sgcldff/core/types.hpp"

namespace sgcldff {

enum class Split { Train, Val, Test };

std::string split_name(Split s);
Split split_from_name(const std::string& name);

struct ManifestEntry {
    std::string id;
    std::string image_path;
    std::string mask_path;
    int label = 0;
};

struct DatasetManifest {
    std::string root;
    Split split = Split::Train;
    std::vector<ManifestEntry> samples;  // sorted by id
    std::vector<std::string> class_names;

    std::size_t size() const { return samples.size(); }
    std::vector<int> class_counts() const;
};

// Canonical layout: root/images/*.png, root/masks/*.png, root/labels.csv
// (id,label_name), root/split.csv (id,split).
DatasetManifest load_dataset(const std::string& root, Split split,
                             const std::vector<std::string>& class_names = default_class_names());

// Decode one entry into a Sample (image in [0,1], mask thresholded at 128).
Sample load_sample(const ManifestEntry& entry);

// Index batches over the manifest: every index exactly once, last batch may
// be short. shuffle=false keeps the manifest's sorted order.
std::vector<std::vector<std::size_t>> make_batches(const DatasetManifest& manifest,
                                                   int batch_size, bool shuffle, Rng& rng);

}  // namespace sgcldff
