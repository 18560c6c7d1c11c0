#pragma once

#include <map>
#include <string>

#include "sgcldff/core/config.hpp"
#include "sgcldff/core/tensor.hpp"

namespace sgcldff {

using NamedArrays = std::map<std::string, Tensor>;

// .sgc file: 4-byte magic "SGC1", u32 manifest length, JSON manifest
// (format version, config, epoch, array names/shapes), then raw
// little-endian float32 payloads in manifest order.
//
// Arrays are kept on the float32 grid by the training code, so
// load(save(x)) reproduces every value bit-exactly.
void save_checkpoint(const NamedArrays& weights, const ExperimentConfig& cfg, int epoch,
                     const std::string& path);

struct Checkpoint {
    NamedArrays weights;
    ExperimentConfig config;
    int epoch = 0;
};

Checkpoint load_checkpoint(const std::string& path);

// Architecture compatibility between a stored config and the run config;
// throws CheckpointError naming the first mismatching field.
void check_checkpoint_compatible(const ExperimentConfig& stored, const ExperimentConfig& run);

// Snap a double to the nearest float32 value.
inline double snap_f32(double v) { return static_cast<double>(static_cast<float>(v)); }

}  // namespace sgcldff
