#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace dsa {

/// Deterministic random stream. All randomness in the library flows through
/// named sub-streams derived from one master seed, so that work split across
/// threads or processes draws exactly the same numbers as a serial run.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : gen_(seed) {}

    std::uint64_t next_u64() { return gen_(); }

    /// Uniform in [0, 1).
    double uniform() {
        return static_cast<double>(gen_() >> 11) * 0x1.0p-53;
    }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    /// Uniform integer in [lo, hi] inclusive.
    int uniform_int(int lo, int hi) {
        return lo + static_cast<int>(next_u64() % static_cast<std::uint64_t>(hi - lo + 1));
    }

    /// Standard normal via Box-Muller. Stateless per call so sub-stream
    /// replay never depends on a cached spare value.
    double normal() {
        double u1 = uniform();
        while (u1 <= 0.0) u1 = uniform();
        const double u2 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586477 * u2);
    }

    double normal(double mean, double sd) { return mean + sd * normal(); }

    /// Knuth sampler; fine for the small means used here.
    int poisson(double mean) {
        if (mean <= 0.0) return 0;
        const double limit = std::exp(-mean);
        double prod = uniform();
        int k = 0;
        while (prod > limit) {
            prod *= uniform();
            ++k;
        }
        return k;
    }

private:
    std::mt19937_64 gen_;
};

/// splitmix64 finalizer; mixes a master seed with a stream tag and index.
inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t tag, std::uint64_t index) {
    std::uint64_t z = seed + 0x9e3779b97f4a7c15ull * (tag + 1) + 0xbf58476d1ce4e5b9ull * (index + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
}

/// Named sub-stream tags (one per independent consumer of randomness).
enum class Stream : std::uint64_t {
    pairs = 1,
    eval_scenes = 2,
    detsim = 3,
    decoder_init = 4,
    train_latent = 5,
    recon_latent = 6,
    grid = 7,
    recon_scene = 8,
};

inline Rng sub_rng(std::uint64_t seed, Stream tag, std::uint64_t index) {
    return Rng(mix_seed(seed, static_cast<std::uint64_t>(tag), index));
}

} // namespace dsa
