#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>

namespace smi {

/// splitmix64 mixing step (Steele/Lea/Flood). Used for seeding and for the
/// documented stream split: derive_seed(master, tag, index).
inline std::uint64_t splitmix64(std::uint64_t& state) {
    std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

/// Fixed hash of (master seed, component tag, component index). Adding a new
/// noise component never reshuffles the streams of existing ones because each
/// stream's seed depends only on its own (tag, index).
inline std::uint64_t derive_seed(std::uint64_t master, std::uint64_t tag, std::uint64_t index = 0) {
    std::uint64_t s = master;
    std::uint64_t a = splitmix64(s);
    s = a ^ (tag * 0x9e3779b97f4a7c15ULL + index);
    std::uint64_t b = splitmix64(s);
    return b ^ (b >> 1 | 1ULL);
}

// Component tags for derive_seed. Values are arbitrary but frozen.
namespace seed_tag {
inline constexpr std::uint64_t rts = 0x525453;       // telegraph components, indexed
inline constexpr std::uint64_t flicker = 0x464c4b;   // 1/f component
inline constexpr std::uint64_t white = 0x574854;     // white component
inline constexpr std::uint64_t common = 0x434d4e;    // common-mode stream
inline constexpr std::uint64_t mixer = 0x4d4958;     // hidden mixer offsets
inline constexpr std::uint64_t readout = 0x524431;   // additive readout noise
inline constexpr std::uint64_t protocol = 0x50524f;  // protocol measurement noise
} // namespace seed_tag

/// xoshiro256++ 1.0 (Blackman & Vigna, public domain reference algorithm),
/// seeded through splitmix64. Chosen over std::mt19937 because every
/// distribution below is hand-rolled on top of the raw 64-bit stream, which
/// keeps output byte-reproducible across standard libraries; the algorithm
/// name is pinned in run manifests.
class Rng {
  public:
    explicit Rng(std::uint64_t seed) {
        std::uint64_t sm = seed;
        for (auto& word : s_) word = splitmix64(sm);
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

    /// Uniform in [0,1) with 53 random bits.
    double uniform01() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    /// Uniform in (0,1], safe as a log() argument.
    double uniform01_open() { return (static_cast<double>(next_u64() >> 11) + 1.0) * 0x1.0p-53; }

    /// Standard normal via Box-Muller. The spare value is cached, so draw
    /// order is part of the reproducibility contract.
    double gauss() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        const double u = uniform01_open();
        const double v = uniform01();
        const double r = std::sqrt(-2.0 * std::log(u));
        const double a = 2.0 * std::numbers::pi * v;
        spare_ = r * std::sin(a);
        have_spare_ = true;
        return r * std::cos(a);
    }

    /// Exponential with the given rate (mean 1/rate).
    double exponential(double rate) { return -std::log(uniform01_open()) / rate; }

  private:
    static std::uint64_t rotl(std::uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }

    std::uint64_t s_[4]{};
    double spare_ = 0.0;
    bool have_spare_ = false;
};

} // namespace smi
