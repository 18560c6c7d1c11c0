#pragma once

#include <cmath>
#include <cstdint>
#include <string_view>

namespace sgcldff {

// xoshiro256++ with splitmix64 seeding. Hand-rolled so that streams are
// reproducible independent of the standard library implementation.
class Rng {
public:
    explicit Rng(std::uint64_t seed) {
        std::uint64_t x = seed;
        for (auto& si : s_) si = splitmix64(x);
        has_spare_ = false;
    }

    // Deterministic sub-stream: same (seed, tag, index) -> same stream.
    static Rng stream(std::uint64_t seed, std::string_view tag, std::uint64_t index = 0) {
        std::uint64_t h = 0xcbf29ce484222325ull;
        for (char c : tag) {
            h ^= static_cast<std::uint64_t>(static_cast<unsigned char>(c));
            h *= 0x100000001b3ull;
        }
        std::uint64_t x = seed;
        std::uint64_t mixed = splitmix64(x) ^ h;
        mixed = splitmix64(mixed) + index * 0x9e3779b97f4a7c15ull;
        return Rng(splitmix64(mixed));
    }

    std::uint64_t next_u64() {
        const std::uint64_t result = rotl(s_[0] + s_[3], 23) + s_[0];
        const std::uint64_t t = s_[1] << 17;
        s_[2] ^= s_[0];
        s_[3] ^= s_[1];
        s_[1] ^= s_[2];
        s_[0] ^= s_[3];
        s_[2] ^= t;
        s_[3] = rotl(s_[3], 45);
        return result;
    }

    // Uniform in [0,1).
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // Uniform integer in [0, n), n >= 1.
    int uniform_int(int n) {
        return static_cast<int>(next_u64() % static_cast<std::uint64_t>(n));
    }

    bool bernoulli(double p) { return uniform() < p; }

    // Box-Muller; the spare is cached, draws stay deterministic.
    double normal() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        double u1 = uniform();
        double u2 = uniform();
        while (u1 <= 1e-300) u1 = uniform();
        double r = std::sqrt(-2.0 * std::log(u1));
        double theta = 2.0 * 3.14159265358979323846 * u2;
        spare_ = r * std::sin(theta);
        has_spare_ = true;
        return r * std::cos(theta);
    }

private:
    static std::uint64_t splitmix64(std::uint64_t& x) {
        std::uint64_t z = (x += 0x9e3779b97f4a7c15ull);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
        return z ^ (z >> 31);
    }
    static std::uint64_t rotl(std::uint64_t v, int k) { return (v << k) | (v >> (64 - k)); }

    std::uint64_t s_[4];
    double spare_ = 0.0;
    bool has_spare_ = false;
};

// Process-wide default seed. Training and the CLI re-seed from the config,
// so this mainly anchors ad-hoc callers.
void seed_all(std::uint64_t seed);
std::uint64_t global_seed();

}  // namespace sgcldff
