// Deterministic random streams. mt19937_64 is fully specified by the standard
// and the int/real mappings below are fixed arithmetic, so every seed gives
// the same stream on every platform (std::uniform_*_distribution does not).
#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <stdexcept>

namespace pignav {

inline uint64_t splitmix64(uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

class Rng {
public:
    explicit Rng(uint64_t seed) : seed_(seed), gen_(seed) {}

    uint64_t seed() const { return seed_; }
    uint64_t next() { return gen_(); }

    /// Uniform double in [0, 1).
    double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    /// Uniform integer in [lo, hi], inclusive.
    int64_t uniform_int(int64_t lo, int64_t hi) {
        if (hi < lo) throw std::invalid_argument("Rng::uniform_int: empty range");
        const uint64_t span = static_cast<uint64_t>(hi - lo) + 1;
        return lo + static_cast<int64_t>(next() % span);
    }

    /// Standard normal via Box-Muller (pair cached).
    double normal() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        double u1 = uniform();
        while (u1 <= 1e-300) u1 = uniform();
        const double u2 = uniform();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double a = 2.0 * 3.14159265358979323846 * u2;
        spare_ = r * std::sin(a);
        have_spare_ = true;
        return r * std::cos(a);
    }

    /// Seed for a named child stream; independent streams from one root seed.
    static uint64_t derive(uint64_t root, uint64_t stream) {
        return splitmix64(root ^ splitmix64(stream + 0x517cc1b727220a95ULL));
    }

    Rng child(uint64_t stream) const { return Rng(derive(seed_, stream)); }

private:
    uint64_t seed_;
    std::mt19937_64 gen_;
    bool have_spare_ = false;
    double spare_ = 0.0;
};

}  // namespace pignav
