#pragma once

#include <string>
#include <vector>

#include "sgcldff/core/config.hpp"
#include "sgcldff/core/types.hpp"
#include "sgcldff/data/dataset.hpp"
#include "sgcldff/model/network.hpp"

namespace sgcldff {

struct PerClassMetrics {
    double precision = 0;
    double recall = 0;
    double f1 = 0;
    double auc = 0;
};

struct MetricsReport {
    double accuracy = 0;
    double precision_macro = 0;
    double recall_macro = 0;
    double f1_macro = 0;
    double auc_macro = 0;
    double iou = 0;
    double dice = 0;
    double pixel_accuracy = 0;
    std::vector<PerClassMetrics> per_class;
    int n_samples = 0;
};

// M[i][j] = count(label == i, pred == j).
std::vector<std::vector<int>> confusion(const std::vector<int>& preds,
                                        const std::vector<int>& labels, int k);

struct ClassificationMetrics {
    double accuracy = 0;
    double precision_macro = 0, recall_macro = 0, f1_macro = 0, auc_macro = 0;
    std::vector<PerClassMetrics> per_class;
};

// Zero-denominator conventions: precision/recall/f1 are 0 when undefined;
// one-vs-rest AUC (Mann-Whitney, ties 0.5) is 0.5 when a class has no
// positives or no negatives.
ClassificationMetrics classification_metrics(const std::vector<std::vector<int>>& conf,
                                             const std::vector<std::vector<double>>& scores,
                                             const std::vector<int>& labels);

struct SegmentationMetrics {
    double iou = 0;
    double dice = 0;
    double pixel_accuracy = 0;
};

// empty-vs-empty convention: iou = dice = 1.
SegmentationMetrics segmentation_metrics(const SegMask& pred, const SegMask& gt);

// Full-split evaluation: forward every sample (no augmentation, with the
// config's saliency pipeline), threshold sigmoid(seg) at tau, argmax cls.
// Segmentation metrics are averaged per image.
MetricsReport evaluate(Model& model, const DatasetManifest& manifest,
                       const ExperimentConfig& cfg, double tau = 0.5);

std::string serialize_report(const MetricsReport& report);
void write_report(const MetricsReport& report, const std::string& json_path,
                  const std::string& per_class_csv_path,
                  const std::vector<std::string>& class_names);

}  // namespace sgcldff
