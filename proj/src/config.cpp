#include "sgcldff/core/config.hpp"

#include <fstream>
#include <sstream>

#include "json.hpp"
#include "sgcldff/core/errors.hpp"

namespace sgcldff {

using nlohmann::json;

std::string ablation_name(Ablation a) {
    switch (a) {
        case Ablation::Full: return "full";
        case Ablation::NoSaliency: return "no_saliency";
        case Ablation::NoFusion: return "no_fusion";
    }
    return "full";
}

Ablation ablation_from_name(const std::string& name) {
    if (name == "full") return Ablation::Full;
    if (name == "no_saliency") return Ablation::NoSaliency;
    if (name == "no_fusion") return Ablation::NoFusion;
    throw ConfigError("ablation: unknown mode '" + name + "'");
}

namespace {

[[noreturn]] void bad_field(const std::string& field, const std::string& why) {
    throw ConfigError("config field '" + field + "': " + why);
}

template <typename T>
void read_field(const json& j, const char* key, T& out) {
    if (!j.contains(key)) return;
    try {
        out = j.at(key).get<T>();
    } catch (const json::exception&) {
        bad_field(key, "wrong type");
    }
}

void check_known_keys(const json& j, const std::vector<std::string>& known,
                      const std::string& scope) {
    for (auto it = j.begin(); it != j.end(); ++it) {
        bool ok = false;
        for (const auto& k : known)
            if (it.key() == k) ok = true;
        if (!ok) throw ConfigError("config: unknown key '" + scope + it.key() + "'");
    }
}

}  // namespace

void ExperimentConfig::validate() const {
    if (image_size < 32 || image_size % 32 != 0)
        bad_field("image_size", "must be a positive multiple of 32");
    if (num_classes < 2) bad_field("num_classes", "must be >= 2");
    if (base_channels < 1) bad_field("base_channels", "must be >= 1");
    if (fusion_dim < 4 || fusion_dim % 4 != 0)
        bad_field("fusion_dim", "must be a multiple of 4 (seg head halves it twice)");
    if (fusion_cardinality < 1) bad_field("fusion_cardinality", "must be >= 1");
    if (base_channels % fusion_cardinality != 0)
        bad_field("base_channels", "must be divisible by fusion_cardinality");
    if (fusion_dim % fusion_cardinality != 0)
        bad_field("fusion_dim", "must be divisible by fusion_cardinality");
    if (window_size < 1) bad_field("window_size", "must be >= 1");
    // w | image_size/32 implies w divides every stage resolution.
    if ((image_size / 32) % window_size != 0)
        bad_field("window_size", "must divide image_size/4, /8, /16 and /32");
    if (lambda_cls < 0) bad_field("lambda_cls", "must be >= 0");
    if (lambda_seg < 0) bad_field("lambda_seg", "must be >= 0");
    if (lambda_sal < 0) bad_field("lambda_sal", "must be >= 0");
    if (!(dice_smooth > 0)) bad_field("dice_smooth", "must be > 0");
    if (!(base_lr > 0)) bad_field("base_lr", "must be > 0");
    if (!(lr_decay_factor > 0 && lr_decay_factor <= 1))
        bad_field("lr_decay_factor", "must be in (0,1]");
    if (lr_decay_every < 1) bad_field("lr_decay_every", "must be >= 1");
    if (batch_size < 1) bad_field("batch_size", "must be >= 1");
    if (max_epochs < 1) bad_field("max_epochs", "must be >= 1");
    if (patience < 1) bad_field("patience", "must be >= 1");
    if (min_delta < 0) bad_field("min_delta", "must be >= 0");
    if (!(saliency_alpha + saliency_beta > 0))
        bad_field("saliency_alpha", "alpha + beta must be > 0");
    if (saliency_sigma < 0) bad_field("saliency_sigma", "must be >= 0");
    if (!(gate_floor >= 0 && gate_floor <= 1)) bad_field("gate_floor", "must be in [0,1]");
    if (static_cast<int>(class_names.size()) != num_classes)
        bad_field("class_names", "length must equal num_classes");
    if (augmentation.rotation_deg < 0) bad_field("augmentation.rotation_deg", "must be >= 0");
    if (augmentation.noise_sigma < 0) bad_field("augmentation.noise_sigma", "must be >= 0");
    if (!(augmentation.contrast_jitter >= 0 && augmentation.contrast_jitter < 1))
        bad_field("augmentation.contrast_jitter", "must be in [0,1)");
}

ExperimentConfig parse_config(const std::string& json_text) {
    json j;
    try {
        j = json::parse(json_text);
    } catch (const json::exception& e) {
        throw ConfigError(std::string("config parse failure: ") + e.what());
    }
    if (!j.is_object()) throw ConfigError("config: document must be a JSON object");

    static const std::vector<std::string> known = {
        "image_size",    "num_classes",     "base_channels",  "fusion_dim",
        "fusion_cardinality", "window_size", "lambda_cls",    "lambda_seg",
        "lambda_sal",    "dice_smooth",     "base_lr",        "lr_decay_factor",
        "lr_decay_every", "batch_size",     "max_epochs",     "patience",
        "min_delta",     "grad_clip",       "seed",           "saliency_alpha",
        "saliency_beta", "saliency_sigma",  "gate_floor",     "ablation",
        "class_names",   "augmentation"};
    check_known_keys(j, known, "");

    ExperimentConfig cfg;
    read_field(j, "image_size", cfg.image_size);
    read_field(j, "num_classes", cfg.num_classes);
    read_field(j, "base_channels", cfg.base_channels);
    read_field(j, "fusion_dim", cfg.fusion_dim);
    read_field(j, "fusion_cardinality", cfg.fusion_cardinality);
    read_field(j, "window_size", cfg.window_size);
    read_field(j, "lambda_cls", cfg.lambda_cls);
    read_field(j, "lambda_seg", cfg.lambda_seg);
    read_field(j, "lambda_sal", cfg.lambda_sal);
    read_field(j, "dice_smooth", cfg.dice_smooth);
    read_field(j, "base_lr", cfg.base_lr);
    read_field(j, "lr_decay_factor", cfg.lr_decay_factor);
    read_field(j, "lr_decay_every", cfg.lr_decay_every);
    read_field(j, "batch_size", cfg.batch_size);
    read_field(j, "max_epochs", cfg.max_epochs);
    read_field(j, "patience", cfg.patience);
    read_field(j, "min_delta", cfg.min_delta);
    read_field(j, "grad_clip", cfg.grad_clip);
    read_field(j, "seed", cfg.seed);
    read_field(j, "saliency_alpha", cfg.saliency_alpha);
    read_field(j, "saliency_beta", cfg.saliency_beta);
    read_field(j, "saliency_sigma", cfg.saliency_sigma);
    read_field(j, "gate_floor", cfg.gate_floor);
    if (j.contains("ablation")) {
        std::string name;
        read_field(j, "ablation", name);
        cfg.ablation = ablation_from_name(name);
    }
    if (j.contains("class_names")) {
        read_field(j, "class_names", cfg.class_names);
        // num_classes follows the list unless both were given and disagree.
        if (!j.contains("num_classes"))
            cfg.num_classes = static_cast<int>(cfg.class_names.size());
    } else if (j.contains("num_classes") && cfg.num_classes != 4) {
        cfg.class_names.clear();
        for (int i = 0; i < cfg.num_classes; ++i)
            cfg.class_names.push_back("class_" + std::to_string(i));
    }
    if (j.contains("augmentation")) {
        const json& a = j.at("augmentation");
        if (!a.is_object()) bad_field("augmentation", "must be an object");
        static const std::vector<std::string> aug_known = {
            "enabled", "rotation_deg", "hflip", "vflip", "contrast_jitter", "noise_sigma"};
        check_known_keys(a, aug_known, "augmentation.");
        read_field(a, "enabled", cfg.augmentation.enabled);
        read_field(a, "rotation_deg", cfg.augmentation.rotation_deg);
        read_field(a, "hflip", cfg.augmentation.hflip);
        read_field(a, "vflip", cfg.augmentation.vflip);
        read_field(a, "contrast_jitter", cfg.augmentation.contrast_jitter);
        read_field(a, "noise_sigma", cfg.augmentation.noise_sigma);
    }

    cfg.validate();
    return cfg;
}

ExperimentConfig load_config(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("config: cannot open '" + path + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    std::string text = ss.str();
    if (text.find_first_not_of(" \t\r\n") == std::string::npos) text = "{}";
    return parse_config(text);
}

std::string serialize_config(const ExperimentConfig& cfg) {
    json j;
    j["image_size"] = cfg.image_size;
    j["num_classes"] = cfg.num_classes;
    j["base_channels"] = cfg.base_channels;
    j["fusion_dim"] = cfg.fusion_dim;
    j["fusion_cardinality"] = cfg.fusion_cardinality;
    j["window_size"] = cfg.window_size;
    j["lambda_cls"] = cfg.lambda_cls;
    j["lambda_seg"] = cfg.lambda_seg;
    j["lambda_sal"] = cfg.lambda_sal;
    j["dice_smooth"] = cfg.dice_smooth;
    j["base_lr"] = cfg.base_lr;
    j["lr_decay_factor"] = cfg.lr_decay_factor;
    j["lr_decay_every"] = cfg.lr_decay_every;
    j["batch_size"] = cfg.batch_size;
    j["max_epochs"] = cfg.max_epochs;
    j["patience"] = cfg.patience;
    j["min_delta"] = cfg.min_delta;
    j["grad_clip"] = cfg.grad_clip;
    j["seed"] = cfg.seed;
    j["saliency_alpha"] = cfg.saliency_alpha;
    j["saliency_beta"] = cfg.saliency_beta;
    j["saliency_sigma"] = cfg.saliency_sigma;
    j["gate_floor"] = cfg.gate_floor;
    j["ablation"] = ablation_name(cfg.ablation);
    j["class_names"] = cfg.class_names;
    j["augmentation"] = {{"enabled", cfg.augmentation.enabled},
                         {"rotation_deg", cfg.augmentation.rotation_deg},
                         {"hflip", cfg.augmentation.hflip},
                         {"vflip", cfg.augmentation.vflip},
                         {"contrast_jitter", cfg.augmentation.contrast_jitter},
                         {"noise_sigma", cfg.augmentation.noise_sigma}};
    return j.dump(2) + "\n";
}

void save_config(const ExperimentConfig& cfg, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("config: cannot write '" + path + "'");
    out << serialize_config(cfg);
}

bool operator==(const AugmentationSpec& a, const AugmentationSpec& b) {
    return a.enabled == b.enabled && a.rotation_deg == b.rotation_deg && a.hflip == b.hflip &&
           a.vflip == b.vflip && a.contrast_jitter == b.contrast_jitter &&
           a.noise_sigma == b.noise_sigma;
}

bool operator==(const ExperimentConfig& a, const ExperimentConfig& b) {
    return a.image_size == b.image_size && a.num_classes == b.num_classes &&
           a.base_channels == b.base_channels && a.fusion_dim == b.fusion_dim &&
           a.fusion_cardinality == b.fusion_cardinality && a.window_size == b.window_size &&
           a.lambda_cls == b.lambda_cls && a.lambda_seg == b.lambda_seg &&
           a.lambda_sal == b.lambda_sal && a.dice_smooth == b.dice_smooth &&
           a.base_lr == b.base_lr && a.lr_decay_factor == b.lr_decay_factor &&
           a.lr_decay_every == b.lr_decay_every && a.batch_size == b.batch_size &&
           a.max_epochs == b.max_epochs && a.patience == b.patience &&
           a.min_delta == b.min_delta && a.grad_clip == b.grad_clip && a.seed == b.seed &&
           a.saliency_alpha == b.saliency_alpha && a.saliency_beta == b.saliency_beta &&
           a.saliency_sigma == b.saliency_sigma && a.gate_floor == b.gate_floor &&
           a.ablation == b.ablation && a.class_names == b.class_names &&
           a.augmentation == b.augmentation;
}

}  // namespace sgcldff
