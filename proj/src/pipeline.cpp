#include "sgcldff/pipeline.hpp"

#include "sgcldff/core/errors.hpp"
#include "sgcldff/saliency/saliency.hpp"

namespace sgcldff {

SaliencyMap prior_for(const ImageTensor& image, const ExperimentConfig& cfg) {
    if (cfg.ablation == Ablation::NoSaliency) {
        SaliencyMap ones(image.h, image.w);
        std::fill(ones.data.begin(), ones.data.end(), 1.0f);
        return ones;
    }
    return saliency_prior(image, cfg.saliency_alpha, cfg.saliency_beta, cfg.saliency_sigma_px());
}

BatchTensors assemble_batch(const std::vector<Sample>& samples, const ExperimentConfig& cfg) {
    if (samples.empty()) throw DataError("assemble_batch: empty batch");
    const int b = static_cast<int>(samples.size());
    const int s = cfg.image_size;

    BatchTensors batch;
    batch.x = Tensor({b, 4, s, s});
    batch.mask = Tensor({b, 1, s, s});
    batch.prior = Tensor({b, s, s});
    batch.labels.resize(samples.size());

    for (int bi = 0; bi < b; ++bi) {
        const Sample& sample = samples[static_cast<std::size_t>(bi)];
        if (sample.image.h != s || sample.image.w != s || sample.mask.h != s || sample.mask.w != s)
            throw ShapeError("assemble_batch: sample '" + sample.id + "' not preprocessed to " +
                             std::to_string(s));
        const SaliencyMap prior = prior_for(sample.image, cfg);
        const ImageTensor gated = gate_input(sample.image, prior, cfg.gate_floor);
        for (int y = 0; y < s; ++y)
            for (int x = 0; x < s; ++x) {
                for (int ch = 0; ch < 4; ++ch)
                    batch.x.at4(bi, ch, y, x) = gated.at(y, x, ch);
                batch.mask.at4(bi, 0, y, x) = sample.mask.at(y, x);
                batch.prior.at3(bi, y, x) = prior.at(y, x);
            }
        batch.labels[static_cast<std::size_t>(bi)] = sample.label.index;
    }
    return batch;
}

}  // namespace sgcldff
