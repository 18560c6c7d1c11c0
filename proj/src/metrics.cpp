#include "sgcldff/metrics/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "json.hpp"
#include "sgcldff/core/errors.hpp"
#include "sgcldff/data/transforms.hpp"
#include "sgcldff/pipeline.hpp"

namespace sgcldff {

std::vector<std::vector<int>> confusion(const std::vector<int>& preds,
                                        const std::vector<int>& labels, int k) {
    if (preds.size() != labels.size()) throw ShapeError("confusion: preds/labels size mismatch");
    std::vector<std::vector<int>> m(static_cast<std::size_t>(k),
                                    std::vector<int>(static_cast<std::size_t>(k), 0));
    for (std::size_t i = 0; i < preds.size(); ++i) {
        if (preds[i] < 0 || preds[i] >= k || labels[i] < 0 || labels[i] >= k)
            throw ShapeError("confusion: entry out of range");
        m[static_cast<std::size_t>(labels[i])][static_cast<std::size_t>(preds[i])]++;
    }
    return m;
}

ClassificationMetrics classification_metrics(const std::vector<std::vector<int>>& conf,
                                             const std::vector<std::vector<double>>& scores,
                                             const std::vector<int>& labels) {
    const int k = static_cast<int>(conf.size());
    ClassificationMetrics out;
    out.per_class.resize(static_cast<std::size_t>(k));

    int n = 0, correct = 0;
    for (int i = 0; i < k; ++i)
        for (int j = 0; j < k; ++j) {
            n += conf[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
            if (i == j) correct += conf[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
        }
    out.accuracy = n > 0 ? static_cast<double>(correct) / n : 0.0;

    for (int c = 0; c < k; ++c) {
        int pred_c = 0, true_c = 0;
        for (int i = 0; i < k; ++i) {
            pred_c += conf[static_cast<std::size_t>(i)][static_cast<std::size_t>(c)];
            true_c += conf[static_cast<std::size_t>(c)][static_cast<std::size_t>(i)];
        }
        const int tp = conf[static_cast<std::size_t>(c)][static_cast<std::size_t>(c)];
        PerClassMetrics& pc = out.per_class[static_cast<std::size_t>(c)];
        pc.precision = pred_c > 0 ? static_cast<double>(tp) / pred_c : 0.0;
        pc.recall = true_c > 0 ? static_cast<double>(tp) / true_c : 0.0;
        pc.f1 = (pc.precision + pc.recall) > 0
                    ? 2.0 * pc.precision * pc.recall / (pc.precision + pc.recall)
                    : 0.0;

        // One-vs-rest Mann-Whitney AUC with ties counted 0.5.
        double wins = 0;
        long long pairs = 0;
        for (std::size_t i = 0; i < labels.size(); ++i) {
            if (labels[i] != c) continue;
            for (std::size_t j = 0; j < labels.size(); ++j) {
                if (labels[j] == c) continue;
                const double sp = scores[i][static_cast<std::size_t>(c)];
                const double sn = scores[j][static_cast<std::size_t>(c)];
                wins += sp > sn ? 1.0 : (sp == sn ? 0.5 : 0.0);
                pairs++;
            }
        }
        pc.auc = pairs > 0 ? wins / static_cast<double>(pairs) : 0.5;

        out.precision_macro += pc.precision / k;
        out.recall_macro += pc.recall / k;
        out.f1_macro += pc.f1 / k;
        out.auc_macro += pc.auc / k;
    }
    return out;
}

SegmentationMetrics segmentation_metrics(const SegMask& pred, const SegMask& gt) {
    if (pred.h != gt.h || pred.w != gt.w)
        throw ShapeError("segmentation_metrics: mask shape mismatch");
    long long inter = 0, p_count = 0, g_count = 0, match = 0;
    for (std::size_t i = 0; i < pred.data.size(); ++i) {
        const int p = pred.data[i] ? 1 : 0;
        const int g = gt.data[i] ? 1 : 0;
        inter += p & g;
        p_count += p;
        g_count += g;
        match += (p == g) ? 1 : 0;
    }
    const long long uni = p_count + g_count - inter;
    SegmentationMetrics out;
    out.iou = uni > 0 ? static_cast<double>(inter) / uni : 1.0;
    out.dice = (p_count + g_count) > 0 ? 2.0 * inter / static_cast<double>(p_count + g_count) : 1.0;
    out.pixel_accuracy =
        pred.data.empty() ? 1.0 : static_cast<double>(match) / static_cast<double>(pred.data.size());
    return out;
}

MetricsReport evaluate(Model& model, const DatasetManifest& manifest,
                       const ExperimentConfig& cfg, double tau) {
    const int k = cfg.num_classes;
    std::vector<int> preds, labels;
    std::vector<std::vector<double>> scores;
    double iou_sum = 0, dice_sum = 0, pix_sum = 0;

    for (const auto& entry : manifest.samples) {
        Sample sample = preprocess(load_sample(entry), cfg.image_size);
        BatchTensors batch = assemble_batch({sample}, cfg);
        ModelOutput out = model.forward(batch.x);

        // classification
        const double* row = out.cls_logits.data();
        int arg = 0;
        double mx = row[0];
        for (int j = 1; j < k; ++j)
            if (row[j] > mx) { mx = row[j]; arg = j; }
        double z = 0;
        std::vector<double> soft(static_cast<std::size_t>(k));
        for (int j = 0; j < k; ++j) z += std::exp(row[j] - mx);
        for (int j = 0; j < k; ++j)
            soft[static_cast<std::size_t>(j)] = std::exp(row[j] - mx) / z;
        preds.push_back(arg);
        labels.push_back(sample.label.index);
        scores.push_back(std::move(soft));

        // segmentation: sigmoid(x) > tau  <=>  x > logit(tau)
        const double logit_tau = std::log(tau / (1.0 - tau));
        SegMask pred_mask(cfg.image_size, cfg.image_size);
        for (int y = 0; y < cfg.image_size; ++y)
            for (int x = 0; x < cfg.image_size; ++x)
                pred_mask.at(y, x) = out.seg_logits.at4(0, 0, y, x) > logit_tau ? 1 : 0;
        SegmentationMetrics seg = segmentation_metrics(pred_mask, sample.mask);
        iou_sum += seg.iou;
        dice_sum += seg.dice;
        pix_sum += seg.pixel_accuracy;
    }

    const int n = static_cast<int>(manifest.samples.size());
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

std::string serialize_report(const MetricsReport& report) {
    nlohmann::json j;
    j["accuracy"] = report.accuracy;
    j["precision_macro"] = report.precision_macro;
    j["recall_macro"] = report.recall_macro;
    j["f1_macro"] = report.f1_macro;
    j["auc_macro"] = report.auc_macro;
    j["iou"] = report.iou;
    j["dice"] = report.dice;
    j["pixel_accuracy"] = report.pixel_accuracy;
    j["n_samples"] = report.n_samples;
    j["per_class"] = nlohmann::json::array();
    for (const auto& pc : report.per_class)
        j["per_class"].push_back({{"precision", pc.precision},
                                  {"recall", pc.recall},
                                  {"f1", pc.f1},
                                  {"auc", pc.auc}});
    return j.dump(2) + "\n";
}

void write_report(const MetricsReport& report, const std::string& json_path,
                  const std::string& per_class_csv_path,
                  const std::vector<std::string>& class_names) {
    std::ofstream out(json_path);
    if (!out) throw IoError("report: cannot write '" + json_path + "'");
    out << serialize_report(report);

    std::ofstream csv(per_class_csv_path);
    if (!csv) throw IoError("report: cannot write '" + per_class_csv_path + "'");
    csv << "class,precision,recall,f1,auc\n";
    for (std::size_t c = 0; c < report.per_class.size(); ++c) {
        const auto& pc = report.per_class[c];
        csv << (c < class_names.size() ? class_names[c] : "class_" + std::to_string(c)) << ","
            << pc.precision << "," << pc.recall << "," << pc.f1 << "," << pc.auc << "\n";
    }
}

}  // namespace sgcldff
