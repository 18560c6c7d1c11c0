#include "sgcldff/core/rng.hpp"

namespace sgcldff {

namespace {
std::uint64_t g_seed = 42;
}

void seed_all(std::uint64_t seed) { g_seed = seed; }

std::uint64_t global_seed() { return g_seed; }

}  // namespace sgcldff
