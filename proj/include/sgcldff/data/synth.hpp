#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "sgcldff/data/dataset.hpp"

namespace sgcldff {

// Writes n synthetic smear samples under root (canonical dataset layout) and
// returns the train-split manifest. Backgrounds carry faint RBC-like disks;
// the single stained cell's nucleus lobe structure encodes the class:
// 1 round lobe = lymphocyte, kidney lobe = monocyte, 2 lobes = eosinophil,
// 3 lobes = neutrophil. Splits are stratified 70/15/15. Deterministic for a
// given seed.
DatasetManifest synth_generate(const std::string& root, int n, int image_size,
                               std::uint64_t seed, const std::vector<double>& class_balance);

// Exact largest-remainder apportionment of n over the balance vector.
std::vector<int> quota_counts(int n, const std::vector<double>& balance);

}  // namespace sgcldff
