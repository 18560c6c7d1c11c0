#pragma once

#include <vector>

#include "sgcldff/core/config.hpp"
#include "sgcldff/core/types.hpp"
#include "sgcldff/loss/loss.hpp"

namespace sgcldff {

// Saliency prior for one preprocessed sample under the config's ablation
// mode (no_saliency substitutes the all-ones map).
SaliencyMap prior_for(const ImageTensor& image, const ExperimentConfig& cfg);

// Gate each sample's RGB with its prior and pack the batch tensors.
BatchTensors assemble_batch(const std::vector<Sample>& samples, const ExperimentConfig& cfg);

}  // namespace sgcldff
