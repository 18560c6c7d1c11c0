#pragma once

#include <string>
#include <vector>

#include "sgcldff/core/config.hpp"
#include "sgcldff/data/dataset.hpp"
#include "sgcldff/metrics/metrics.hpp"
#include "sgcldff/model/network.hpp"

namespace sgcldff {

// Step decay: base_lr * factor^floor(epoch / every). Epochs are 0-based.
double lr_at(int epoch, const ExperimentConfig& cfg);

struct AdamState {
    std::vector<Tensor> m;
    std::vector<Tensor> v;
    long long t = 0;

    void init(const ParamRefs& params);
};

// Bias-corrected Adam update; throws TrainError naming the array on a
// non-finite gradient. Updated weights are snapped to the float32 grid so
// checkpoints round-trip bit-exactly.
void adam_step(const ParamRefs& params, AdamState& state, double lr, double beta1 = 0.9,
               double beta2 = 0.999, double eps = 1e-8);

// Scale all gradients so their global L2 norm is at most max_norm
// (max_norm <= 0 disables). Returns the pre-clip norm.
double clip_gradients(const ParamRefs& params, double max_norm);

struct EpochLog {
    int epoch = 0;  // 1-based in log.csv
    LossBreakdown loss;
    double lr = 0;
    double val_f1 = 0;
};

struct TrainResult {
    int epochs_run = 0;
    bool stopped_early = false;
    double best_val_f1 = 0;
    int best_epoch = 0;  // 0-based epoch whose weights are checkpointed
    std::vector<EpochLog> log;
    std::string checkpoint_path;
};

// Full protocol: augment+batch the train split, Adam with the step-decay
// schedule, early stopping on validation macro-F1, best-checkpointing.
// Writes best.sgc, log.csv and config.resolved.json under out_dir.
TrainResult train(const ExperimentConfig& cfg, const DatasetManifest& train_manifest,
                  const DatasetManifest& val_manifest, const std::string& out_dir,
                  Ablation ablation);

// Same metrics as evaluate() over already-preprocessed samples.
MetricsReport evaluate_samples(Model& model, const std::vector<Sample>& samples,
                               const ExperimentConfig& cfg, double tau = 0.5);

struct AblationRow {
    std::string configuration;
    double accuracy = 0;
    double f1 = 0;
    double iou = 0;
};

// Trains the three configurations with identical seed/splits and writes
// ablation.csv (Configuration,Accuracy,F1,IoU) from test-split metrics.
std::vector<AblationRow> ablate(const ExperimentConfig& cfg, const std::string& data_root,
                                const std::string& out_dir);

void write_ablation_csv(const std::vector<AblationRow>& rows, const std::string& path);

}  // namespace sgcldff
