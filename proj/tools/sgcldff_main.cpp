#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "sgcldff/core/checkpoint.hpp"
#include "sgcldff/core/config.hpp"
#include "sgcldff/core/errors.hpp"
#include "sgcldff/data/dataset.hpp"
#include "sgcldff/data/png_io.hpp"
#include "sgcldff/data/synth.hpp"
#include "sgcldff/data/transforms.hpp"
#include "sgcldff/explain/explain.hpp"
#include "sgcldff/metrics/metrics.hpp"
#include "sgcldff/pipeline.hpp"
#include "sgcldff/saliency/saliency.hpp"
#include "sgcldff/train/train.hpp"

namespace fs = std::filesystem;
using namespace sgcldff;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitOther = 1;
constexpr int kExitConfig = 2;
constexpr int kExitData = 3;
constexpr int kExitCheckpoint = 4;

// Seed resolution: config < SGCLDFF_SEED env < explicit --seed flag.
void resolve_seed(ExperimentConfig& cfg, const std::optional<std::uint64_t>& flag_seed) {
    if (const char* env = std::getenv("SGCLDFF_SEED")) {
        try {
            cfg.seed = std::stoull(env);
        } catch (const std::exception&) {
            throw ConfigError("SGCLDFF_SEED: not an integer");
        }
    }
    if (flag_seed) cfg.seed = *flag_seed;
}

ExperimentConfig config_from_path(const std::string& path) {
    if (path.empty()) {
        ExperimentConfig cfg;
        cfg.validate();
        return cfg;
    }
    return load_config(path);
}

std::string strip_ext(const std::string& path) {
    fs::path p(path);
    return (p.parent_path() / p.stem()).string();
}

ImageTensor load_image_rgb(const std::string& path) {
    PngImage png = read_png(path);
    ImageTensor img(png.h, png.w, Channels::RGB);
    for (int y = 0; y < png.h; ++y)
        for (int x = 0; x < png.w; ++x) {
            const std::size_t base = (static_cast<std::size_t>(y) * png.w + x) * png.channels;
            for (int ch = 0; ch < 3; ++ch)
                img.at(y, x, ch) = png.pixels[base + (png.channels >= 3 ? ch : 0)] / 255.0f;
        }
    return img;
}

int cmd_synth(const std::string& out, int n, std::uint64_t seed, int image_size,
              const std::string& balance_str) {
    std::vector<double> balance;
    if (balance_str.empty()) {
        balance.assign(default_class_names().size(), 1.0 / default_class_names().size());
    } else {
        std::size_t pos = 0;
        while (pos <= balance_str.size()) {
            const std::size_t comma = balance_str.find(',', pos);
            const std::string tok = balance_str.substr(
                pos, comma == std::string::npos ? std::string::npos : comma - pos);
            try {
                balance.push_back(std::stod(tok));
            } catch (const std::exception&) {
                throw ConfigError("synth: bad --balance entry '" + tok + "'");
            }
            if (comma == std::string::npos) break;
            pos = comma + 1;
        }
    }
    DatasetManifest manifest = synth_generate(out, n, image_size, seed, balance);
    std::cout << "wrote " << n << " samples under " << out << " (train split: " << manifest.size()
              << ")\n";
    const std::vector<int> counts = manifest.class_counts();
    for (std::size_t c = 0; c < counts.size(); ++c)
        std::cout << "  " << manifest.class_names[c] << ": " << counts[c] << " train\n";
    return kExitOk;
}

int cmd_train(const std::string& config_path, const std::string& data_root,
              const std::string& out_dir, const std::string& ablation_str,
              const std::optional<std::uint64_t>& seed) {
    ExperimentConfig cfg = config_from_path(config_path);
    resolve_seed(cfg, seed);
    const Ablation mode = ablation_from_name(ablation_str);
    DatasetManifest train_m = load_dataset(data_root, Split::Train, cfg.class_names);
    DatasetManifest val_m = load_dataset(data_root, Split::Val, cfg.class_names);
    TrainResult result = train(cfg, train_m, val_m, out_dir, mode);
    std::cout << "trained " << result.epochs_run << " epochs"
              << (result.stopped_early ? " (early stop)" : "") << ", best val F1 "
              << result.best_val_f1 << " at epoch " << result.best_epoch + 1 << "\n"
              << "checkpoint: " << result.checkpoint_path << "\n";
    return kExitOk;
}

int cmd_eval(const std::string& checkpoint_path, const std::string& data_root,
             const std::string& split_str, const std::string& report_path,
             const std::string& config_path) {
    Checkpoint ckpt = load_checkpoint(checkpoint_path);
    if (!config_path.empty())
        check_checkpoint_compatible(ckpt.config, load_config(config_path));
    Model model(ckpt.config);
    model.import_weights(ckpt.weights);
    DatasetManifest manifest =
        load_dataset(data_root, split_from_name(split_str), ckpt.config.class_names);
    MetricsReport report = evaluate(model, manifest, ckpt.config);
    std::cout << serialize_report(report);
    if (!report_path.empty())
        write_report(report, report_path, strip_ext(report_path) + ".per_class.csv",
                     ckpt.config.class_names);
    return kExitOk;
}

int cmd_ablate(const std::string& config_path, const std::string& data_root,
               const std::string& out_dir, const std::optional<std::uint64_t>& seed) {
    ExperimentConfig cfg = config_from_path(config_path);
    resolve_seed(cfg, seed);
    std::vector<AblationRow> rows = ablate(cfg, data_root, out_dir);
    std::cout << "Configuration,Accuracy,F1,IoU\n";
    for (const auto& r : rows)
        std::cout << r.configuration << "," << r.accuracy << "," << r.f1 << "," << r.iou << "\n";
    return kExitOk;
}

int cmd_explain(const std::string& checkpoint_path, const std::string& image_path,
                int target_class, const std::string& layer_str, const std::string& out_prefix) {
    Checkpoint ckpt = load_checkpoint(checkpoint_path);
    Model model(ckpt.config);
    model.import_weights(ckpt.weights);
    const ExperimentConfig& cfg = ckpt.config;

    Sample raw;
    raw.image = load_image_rgb(image_path);
    raw.mask = SegMask(raw.image.h, raw.image.w);
    Sample prepped = preprocess(raw, cfg.image_size);
    SaliencyMap prior = prior_for(prepped.image, cfg);
    ImageTensor gated = gate_input(prepped.image, prior, cfg.gate_floor);

    if (target_class < 0) {  // default: the model's own prediction
        BatchTensors batch = assemble_batch({prepped}, cfg);
        ModelOutput out = model.forward(batch.x);
        target_class = 0;
        for (int j = 1; j < cfg.num_classes; ++j)
            if (out.cls_logits.at2(0, j) > out.cls_logits.at2(0, target_class)) target_class = j;
    }
    if (target_class >= cfg.num_classes)
        throw ConfigError("explain: --class out of range for checkpoint K");

    FloatMap cam = grad_cam(model, gated, target_class, cam_layer_from_name(layer_str));
    const double consistency = saliency_consistency(cam, prior);

    const std::string prefix = out_prefix.empty() ? strip_ext(image_path) : out_prefix;
    write_heatmap_png(cam, prefix + ".cam.png");
    render_overlay(prepped.image, cam, prefix + ".cam_overlay.png");

    nlohmann::json j = {{"target_class", target_class}, {"consistency", consistency}};
    std::ofstream jf(prefix + ".cam.json");
    if (!jf) throw IoError("explain: cannot write '" + prefix + ".cam.json'");
    jf << j.dump() << "\n";
    std::cout << j.dump() << "\n";
    return kExitOk;
}

int cmd_saliency(const std::string& image_path, const std::string& config_path,
                 const std::string& out_prefix) {
    ExperimentConfig cfg = config_from_path(config_path);
    ImageTensor img = load_image_rgb(image_path);
    const double sigma = cfg.saliency_sigma * img.w / 224.0;
    SaliencyMap s = saliency_prior(img, cfg.saliency_alpha, cfg.saliency_beta, sigma);

    const std::string prefix = out_prefix.empty() ? strip_ext(image_path) : out_prefix;
    FloatMap map(s.h, s.w);
    map.data = s.data;
    write_heatmap_png(map, prefix + ".saliency.png");
    render_overlay(img, map, prefix + ".overlay.png");
    std::cout << "wrote " << prefix << ".saliency.png and " << prefix << ".overlay.png\n";
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Saliency-guided multi-task white blood cell segmentation and classification"};
    app.require_subcommand(1);

    // synth
    auto* synth = app.add_subcommand("synth", "Generate a synthetic smear dataset");
    std::string synth_out;
    int synth_n = 16, synth_size = 64;
    std::uint64_t synth_seed = 42;
    std::string synth_balance;
    synth->add_option("--out", synth_out, "Output dataset root")->required();
    synth->add_option("--n", synth_n, "Number of samples");
    synth->add_option("--seed", synth_seed, "Generator seed");
    synth->add_option("--image-size", synth_size, "Image side in pixels");
    synth->add_option("--balance", synth_balance, "Comma-separated class fractions (sum 1)");

    // train
    auto* train_cmd = app.add_subcommand("train", "Train a model");
    std::string train_config, train_data, train_out, train_ablation = "full";
    std::optional<std::uint64_t> train_seed;
    train_cmd->add_option("--config", train_config, "Config JSON path");
    train_cmd->add_option("--data", train_data, "Dataset root")->required();
    train_cmd->add_option("--out", train_out, "Output directory")->required();
    train_cmd->add_option("--ablation", train_ablation, "full | no_saliency | no_fusion");
    train_cmd->add_option("--seed", train_seed, "Override config seed");

    // eval
    auto* eval_cmd = app.add_subcommand("eval", "Evaluate a checkpoint on a split");
    std::string eval_ckpt, eval_data, eval_split = "test", eval_report, eval_config;
    eval_cmd->add_option("--checkpoint", eval_ckpt, "Checkpoint .sgc path")->required();
    eval_cmd->add_option("--data", eval_data, "Dataset root")->required();
    eval_cmd->add_option("--split", eval_split, "train | val | test");
    eval_cmd->add_option("--report", eval_report, "Write MetricsReport JSON here");
    eval_cmd->add_option("--config", eval_config, "Config to cross-check against the checkpoint");

    // ablate
    auto* ablate_cmd = app.add_subcommand("ablate", "Run the three-configuration ablation");
    std::string ab_config, ab_data, ab_out;
    std::optional<std::uint64_t> ab_seed;
    ablate_cmd->add_option("--config", ab_config, "Config JSON path");
    ablate_cmd->add_option("--data", ab_data, "Dataset root")->required();
    ablate_cmd->add_option("--out", ab_out, "Output directory")->required();
    ablate_cmd->add_option("--seed", ab_seed, "Override config seed");

    // explain
    auto* explain_cmd = app.add_subcommand("explain", "Grad-CAM heatmap for one image");
    std::string ex_ckpt, ex_image, ex_layer = "fused", ex_out;
    int ex_class = -1;
    explain_cmd->add_option("--checkpoint", ex_ckpt, "Checkpoint .sgc path")->required();
    explain_cmd->add_option("--image", ex_image, "Input PNG")->required();
    explain_cmd->add_option("--class", ex_class, "Target class (default: predicted)");
    explain_cmd->add_option("--layer", ex_layer, "fused | stage4");
    explain_cmd->add_option("--out", ex_out, "Output prefix (default: next to the image)");

    // saliency
    auto* sal_cmd = app.add_subcommand("saliency", "Saliency map + overlay for one image");
    std::string sal_image, sal_config, sal_out;
    sal_cmd->add_option("--image", sal_image, "Input PNG")->required();
    sal_cmd->add_option("--config", sal_config, "Config JSON (alpha/beta/sigma)");
    sal_cmd->add_option("--out", sal_out, "Output prefix (default: next to the image)");

    CLI11_PARSE(app, argc, argv);

    try {
        if (*synth) return cmd_synth(synth_out, synth_n, synth_seed, synth_size, synth_balance);
        if (*train_cmd) return cmd_train(train_config, train_data, train_out, train_ablation, train_seed);
        if (*eval_cmd) return cmd_eval(eval_ckpt, eval_data, eval_split, eval_report, eval_config);
        if (*ablate_cmd) return cmd_ablate(ab_config, ab_data, ab_out, ab_seed);
        if (*explain_cmd) return cmd_explain(ex_ckpt, ex_image, ex_class, ex_layer, ex_out);
        if (*sal_cmd) return cmd_saliency(sal_image, sal_config, sal_out);
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const CheckpointError& e) {
        std::cerr << "checkpoint error: " << e.what() << "\n";
        return kExitCheckpoint;
    } catch (const DataError& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return kExitData;
    } catch (const IoError& e) {
        std::cerr << "io error: " << e.what() << "\n";
        return kExitData;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitOther;
    }
    return kExitOther;
}
