#include "sgcldff/train/train.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include "sgcldff/core/checkpoint.hpp"
#include "sgcldff/core/errors.hpp"
#include "sgcldff/data/transforms.hpp"
#include "sgcldff/loss/loss.hpp"
#include "sgcldff/pipeline.hpp"

namespace fs = std::filesystem;

namespace sgcldff {

double lr_at(int epoch, const ExperimentConfig& cfg) {
    if (epoch < 0) throw TrainError("lr_at: negative epoch");
    const int steps = epoch / cfg.lr_decay_every;
    return cfg.base_lr * std::pow(cfg.lr_decay_factor, steps);
}

void AdamState::init(const ParamRefs& params) {
    m.clear();
    v.clear();
    for (const Param* p : params) {
        m.emplace_back(p->value.shape());
        v.emplace_back(p->value.shape());
    }
    t = 0;
}

void adam_step(const ParamRefs& params, AdamState& state, double lr, double beta1, double beta2,
               double eps) {
    if (state.m.size() != params.size()) throw TrainError("adam_step: state/params mismatch");
    state.t += 1;
    const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(state.t));
    const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(state.t));
    for (std::size_t pi = 0; pi < params.size(); ++pi) {
        Param& p = *params[pi];
        Tensor& m = state.m[pi];
        Tensor& v = state.v[pi];
        for (std::size_t i = 0; i < p.value.numel(); ++i) {
            const double g = p.grad[i];
            if (!std::isfinite(g))
                throw TrainError("adam_step: non-finite gradient in array '" + p.name + "'");
            m[i] = beta1 * m[i] + (1.0 - beta1) * g;
            v[i] = beta2 * v[i] + (1.0 - beta2) * g * g;
            const double mhat = m[i] / bc1;
            const double vhat = v[i] / bc2;
            p.value[i] = snap_f32(p.value[i] - lr * mhat / (std::sqrt(vhat) + eps));
        }
    }
}

double clip_gradients(const ParamRefs& params, double max_norm) {
    double sq = 0;
    for (const Param* p : params)
        for (std::size_t i = 0; i < p->grad.numel(); ++i) sq += p->grad[i] * p->grad[i];
    const double norm = std::sqrt(sq);
    if (max_norm > 0 && norm > max_norm) {
        const double scale = max_norm / norm;
        for (Param* p : params)
            for (std::size_t i = 0; i < p->grad.numel(); ++i) p->grad[i] *= scale;
    }
    return norm;
}

MetricsReport evaluate_samples(Model& model, const std::vector<Sample>& samples,
                               const ExperimentConfig& cfg, double tau) {
    const int k = cfg.num_classes;
    std::vector<int> preds, labels;
    std::vector<std::vector<double>> scores;
    double iou_sum = 0, dice_sum = 0, pix_sum = 0;
    const double logit_tau = std::log(tau / (1.0 - tau));

    for (const Sample& sample : samples) {
        BatchTensors batch = assemble_batch({sample}, cfg);
        ModelOutput out = model.forward(batch.x);
        const double* row = out.cls_logits.data();
        int arg = 0;
        double mx = row[0];
        for (int j = 1; j < k; ++j)
            if (row[j] > mx) { mx = row[j]; arg = j; }
        double z = 0;
        std::vector<double> soft(static_cast<std::size_t>(k));
        for (int j = 0; j < k; ++j) z += std::exp(row[j] - mx);
        for (int j = 0; j < k; ++j) soft[static_cast<std::size_t>(j)] = std::exp(row[j] - mx) / z;
        preds.push_back(arg);
        labels.push_back(sample.label.index);
        scores.push_back(std::move(soft));

        SegMask pred_mask(cfg.image_size, cfg.image_size);
        for (int y = 0; y < cfg.image_size; ++y)
            for (int x = 0; x < cfg.image_size; ++x)
                pred_mask.at(y, x) = out.seg_logits.at4(0, 0, y, x) > logit_tau ? 1 : 0;
        SegmentationMetrics seg = segmentation_metrics(pred_mask, sample.mask);
        iou_sum += seg.iou;
        dice_sum += seg.dice;
        pix_sum += seg.pixel_accuracy;
    }

    const int n = static_cast<int>(samples.size());
    ClassificationMetrics cm = classification_metrics(confusion(preds, labels, k), scores, labels);
    MetricsReport report;
    report.accuracy = cm.accuracy;
    report.precision_macro = cm.precision_macro;
    report.recall_macro = cm.recall_macro;
    report.f1_macro = cm.f1_macro;
    report.auc_macro = cm.auc_macro;
    report.per_class = cm.per_class;
    report.iou = n > 0 ? iou_sum / n : 0.0;
    report.dice = n > 0 ? dice_sum / n : 0.0;
    report.pixel_accuracy = n > 0 ? pix_sum / n : 0.0;
    report.n_samples = n;
    return report;
}

namespace {

void write_log_csv(const std::vector<EpochLog>& log, const std::string& path) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw IoError("train: cannot write '" + path + "'");
    out << "epoch,total,cls,seg_dice,seg_bce,sal,lr,val_f1\n";
    char buf[256];
    for (const EpochLog& row : log) {
        std::snprintf(buf, sizeof(buf), "%d,%.9g,%.9g,%.9g,%.9g,%.9g,%.9g,%.9g\n", row.epoch,
                      row.loss.total, row.loss.cls, row.loss.seg_dice, row.loss.seg_bce,
                      row.loss.sal, row.lr, row.val_f1);
        out << buf;
    }
}

}  // namespace

TrainResult train(const ExperimentConfig& cfg, const DatasetManifest& train_manifest,
                  const DatasetManifest& val_manifest, const std::string& out_dir,
                  Ablation ablation) {
    if (train_manifest.samples.empty() || val_manifest.samples.empty())
        throw DataError("train: manifests must be nonempty");

    ExperimentConfig run_cfg = cfg;
    run_cfg.ablation = ablation;
    if (ablation == Ablation::NoSaliency) run_cfg.lambda_sal = 0.0;
    run_cfg.validate();
    seed_all(run_cfg.seed);

    std::error_code ec;
    fs::create_directories(out_dir, ec);
    if (!fs::is_directory(out_dir)) throw IoError("train: cannot create out_dir '" + out_dir + "'");

    // Cache preprocessed samples; augmentation is applied per epoch.
    std::vector<Sample> train_samples, val_samples;
    for (const auto& e : train_manifest.samples)
        train_samples.push_back(preprocess(load_sample(e), run_cfg.image_size));
    for (const auto& e : val_manifest.samples)
        val_samples.push_back(preprocess(load_sample(e), run_cfg.image_size));

    std::vector<int> counts(static_cast<std::size_t>(run_cfg.num_classes), 0);
    for (const Sample& s : train_samples) counts[static_cast<std::size_t>(s.label.index)]++;
    for (int& c : counts) c = std::max(c, 1);  // classes absent from train get weight > 0
    const std::vector<double> weights = class_weights(counts);

    Model model(run_cfg);
    Rng init_rng = Rng::stream(run_cfg.seed, "init");
    model.init_weights(init_rng);
    AdamState adam;
    adam.init(model.params());

    TrainResult result;
    result.checkpoint_path = (fs::path(out_dir) / "best.sgc").string();

    double stop_best = -1.0;   // early-stopping reference (strict improvement)
    double ckpt_best = -1.0;   // checkpoint reference (ties update)
    int since_improve = 0;

    for (int epoch = 0; epoch < run_cfg.max_epochs; ++epoch) {
        const double lr = lr_at(epoch, run_cfg);
        Rng epoch_rng = Rng::stream(run_cfg.seed, "epoch", static_cast<std::uint64_t>(epoch));
        auto batches = make_batches(train_manifest, run_cfg.batch_size, true, epoch_rng);

        LossBreakdown epoch_loss;
        std::size_t seen = 0;
        for (std::size_t bi = 0; bi < batches.size(); ++bi) {
            std::vector<Sample> materialized;
            materialized.reserve(batches[bi].size());
            for (std::size_t idx : batches[bi]) {
                Sample s = train_samples[idx];
                if (run_cfg.augmentation.enabled)
                    s = augment(s, run_cfg.augmentation, epoch_rng);
                materialized.push_back(std::move(s));
            }
            BatchTensors batch = assemble_batch(materialized, run_cfg);

            ModelOutput out = model.forward(batch.x);
            LossGrads grads;
            LossBreakdown lb = total_loss(out, batch, run_cfg, weights, &grads);
            if (!std::isfinite(lb.total))
                throw TrainError("train: non-finite loss at epoch " + std::to_string(epoch) +
                                 ", batch " + std::to_string(bi));

            model.zero_grad();
            model.backward(grads.d_seg_logits, grads.d_cls_logits, grads.d_attention);
            clip_gradients(model.params(), run_cfg.grad_clip);
            adam_step(model.params(), adam, lr);

            const double w = static_cast<double>(materialized.size());
            epoch_loss.total += lb.total * w;
            epoch_loss.cls += lb.cls * w;
            epoch_loss.seg_dice += lb.seg_dice * w;
            epoch_loss.seg_bce += lb.seg_bce * w;
            epoch_loss.sal += lb.sal * w;
            seen += materialized.size();
        }
        const double inv = 1.0 / static_cast<double>(seen);
        epoch_loss.total *= inv;
        epoch_loss.cls *= inv;
        epoch_loss.seg_dice *= inv;
        epoch_loss.seg_bce *= inv;
        epoch_loss.sal *= inv;

        MetricsReport val = evaluate_samples(model, val_samples, run_cfg);

        EpochLog row;
        row.epoch = epoch + 1;
        row.loss = epoch_loss;
        row.lr = lr;
        row.val_f1 = val.f1_macro;
        result.log.push_back(row);
        result.epochs_run = epoch + 1;

        if (val.f1_macro >= ckpt_best) {
            // Ties update too: among equal-F1 epochs the latest weights (with
            // the better-trained shared representation) are kept.
            ckpt_best = val.f1_macro;
            result.best_epoch = epoch;
            save_checkpoint(model.export_weights(), run_cfg, epoch, result.checkpoint_path);
        }
        if (val.f1_macro > stop_best + run_cfg.min_delta) {
            stop_best = val.f1_macro;
            since_improve = 0;
        } else {
            since_improve++;
            if (since_improve >= run_cfg.patience) {
                result.stopped_early = true;
                break;
            }
        }
    }

    result.best_val_f1 = ckpt_best;
    write_log_csv(result.log, (fs::path(out_dir) / "log.csv").string());
    save_config(run_cfg, (fs::path(out_dir) / "config.resolved.json").string());
    return result;
}

void write_ablation_csv(const std::vector<AblationRow>& rows, const std::string& path) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw IoError("ablate: cannot write '" + path + "'");
    out << "Configuration,Accuracy,F1,IoU\n";
    char buf[256];
    for (const AblationRow& row : rows) {
        std::snprintf(buf, sizeof(buf), "%s,%.4f,%.4f,%.4f\n", row.configuration.c_str(),
                      row.accuracy, row.f1, row.iou);
        out << buf;
    }
}

std::vector<AblationRow> ablate(const ExperimentConfig& cfg, const std::string& data_root,
                                const std::string& out_dir) {
    const DatasetManifest train_m = load_dataset(data_root, Split::Train, cfg.class_names);
    const DatasetManifest val_m = load_dataset(data_root, Split::Val, cfg.class_names);
    const DatasetManifest test_m = load_dataset(data_root, Split::Test, cfg.class_names);

    struct Config {
        Ablation mode;
        const char* label;
        const char* dir;
    };
    // Row order mirrors the ablation table: saliency off, fusion off, full.
    const Config configs[] = {
        {Ablation::NoSaliency, "Without saliency preprocessing", "no_saliency"},
        {Ablation::NoFusion, "Without cross-layer fusion", "no_fusion"},
        {Ablation::Full, "Full SG-CLDFF model", "full"},
    };

    std::vector<AblationRow> rows;
    for (const Config& c : configs) {
        const std::string run_dir = (fs::path(out_dir) / c.dir).string();
        TrainResult tr = train(cfg, train_m, val_m, run_dir, c.mode);

        Checkpoint ckpt = load_checkpoint(tr.checkpoint_path);
        Model model(ckpt.config);
        model.import_weights(ckpt.weights);
        MetricsReport report = evaluate(model, test_m, ckpt.config);

        rows.push_back({c.label, report.accuracy, report.f1_macro, report.iou});
    }
    write_ablation_csv(rows, (fs::path(out_dir) / "ablation.csv").string());
    return rows;
}

}  // namespace sgcldff
