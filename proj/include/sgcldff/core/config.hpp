#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "sgcldff/core/types.hpp"

namespace sgcldff {

enum class Ablation { Full, NoSaliency, NoFusion };

std::string ablation_name(Ablation a);
Ablation ablation_from_name(const std::string& name);

struct AugmentationSpec {
    bool enabled = true;
    float rotation_deg = 15.0f;  // +/- range
    bool hflip = true;
    bool vflip = true;
    float contrast_jitter = 0.2f;
    float noise_sigma = 0.02f;
};

struct ExperimentConfig {
    int image_size = 224;
    int num_classes = 4;
    int base_channels = 32;      // C: channels of the first backbone stage
    int fusion_dim = 64;         // D: fused feature channels
    int fusion_cardinality = 4;  // g: grouped-conv cardinality
    int window_size = 7;         // w: attention window side

    double lambda_cls = 1.0;
    double lambda_seg = 1.0;
    double lambda_sal = 0.1;
    double dice_smooth = 1.0;

    double base_lr = 1e-4;
    double lr_decay_factor = 0.1;
    int lr_decay_every = 30;
    int batch_size = 32;
    int max_epochs = 100;
    int patience = 10;
    double min_delta = 1e-4;
    double grad_clip = 5.0;  // global grad-norm clip; <= 0 disables

    std::uint64_t seed = 42;

    double saliency_alpha = 0.5;
    double saliency_beta = 0.5;
    double saliency_sigma = 2.0;  // blur sigma in px at 224; scales with image_size
    double gate_floor = 0.3;      // gamma in the multiplicative gate

    Ablation ablation = Ablation::Full;
    std::vector<std::string> class_names = default_class_names();
    AugmentationSpec augmentation;

    int k() const { return num_classes; }
    // Effective blur sigma for this image size.
    double saliency_sigma_px() const { return saliency_sigma * image_size / 224.0; }

    void validate() const;  // throws ConfigError naming the offending field
};

// Parses a UTF-8 JSON document; missing keys take defaults, unknown keys are
// rejected. Validates invariants before returning.
ExperimentConfig load_config(const std::string& path);
ExperimentConfig parse_config(const std::string& json_text);
std::string serialize_config(const ExperimentConfig& cfg);
void save_config(const ExperimentConfig& cfg, const std::string& path);

bool operator==(const AugmentationSpec& a, const AugmentationSpec& b);
bool operator==(const ExperimentConfig& a, const ExperimentConfig& b);

}  // namespace sgcldff
