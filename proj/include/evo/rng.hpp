#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace evo {

/// Seeded random source with a platform-independent draw sequence.
///
/// std::uniform_*_distribution and std::normal_distribution are
/// implementation-defined, so golden fixtures cannot depend on them. All
/// draws here are derived from raw MT19937 output using the same mappings
/// as numpy's legacy RandomState (53-bit doubles, masked-rejection integers,
/// polar-method Gaussians), which lets test oracles be generated in Python.
class Rng {
public:
    explicit Rng(std::uint32_t seed) : engine_(seed) {}

    std::uint32_t next_u32() { return static_cast<std::uint32_t>(engine_()); }

    /// Uniform double in [0, 1).
    double uniform() {
        const std::uint64_t a = next_u32() >> 5;
        const std::uint64_t b = next_u32() >> 6;
        return (static_cast<double>(a) * 67108864.0 + static_cast<double>(b)) / 9007199254740992.0;
    }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    /// Uniform integer in [0, n). n == 1 consumes no draws.
    std::uint32_t below(std::uint32_t n) {
        if (n <= 1) return 0;
        const std::uint32_t max = n - 1;
        std::uint32_t mask = max;
        mask |= mask >> 1;
        mask |= mask >> 2;
        mask |= mask >> 4;
        mask |= mask >> 8;
        mask |= mask >> 16;
        for (;;) {
            const std::uint32_t v = next_u32() & mask;
            if (v <= max) return v;
        }
    }

    /// Standard normal draw (Marsaglia polar method, one cached spare).
    double normal() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        double x1 = 0.0, x2 = 0.0, r2 = 0.0;
        do {
            x1 = 2.0 * uniform() - 1.0;
            x2 = 2.0 * uniform() - 1.0;
            r2 = x1 * x1 + x2 * x2;
        } while (r2 >= 1.0 || r2 == 0.0);
        const double f = std::sqrt(-2.0 * std::log(r2) / r2);
        spare_ = f * x1;
        has_spare_ = true;
        return f * x2;
    }

private:
    std::mt19937 engine_;
    double spare_ = 0.0;
    bool has_spare_ = false;
};

/// Mixes several integers into one 32-bit seed (splitmix64 finalizer).
inline std::uint32_t derive_seed(std::uint64_t a, std::uint64_t b = 0, std::uint64_t c = 0) {
    auto mix = [](std::uint64_t z) {
        z += 0x9e3779b97f4a7c15ULL;
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    };
    const std::uint64_t h = mix(mix(mix(a) ^ b) ^ c);
    return static_cast<std::uint32_t>(h ^ (h >> 32));
}

}  // namespace evo
