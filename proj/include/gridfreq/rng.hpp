#pragma once

#include <cmath>
#include <cstdint>

namespace gridfreq::rng {

/// Splittable 64-bit generator (SplitMix64, the SplittableRandom core).
///
/// Every stochastic component in this project draws from one of these,
/// keyed by an explicit seed. Independent substreams are derived from
/// (seed, stream) so ensembles are reproducible and order-independent:
/// path k of a run always sees the same numbers no matter how paths are
/// scheduled across threads.
class SplitMix64 {
  public:
    explicit SplitMix64(std::uint64_t seed) : state_(seed) {}

    /// Decorrelated generator for substream `stream` of a master seed.
    static SplitMix64 substream(std::uint64_t seed, std::uint64_t stream) {
        return SplitMix64(mix(seed + kGolden) ^ mix(stream + 0x632be59bd9b4e019ull));
    }

    std::uint64_t next_u64() {
        state_ += kGolden;
        return mix(state_);
    }

    /// Uniform in [0, 1), 53-bit resolution.
    double next_unit() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    /// Uniform in (0, 1]; safe as a log() argument.
    double next_unit_open() {
        return static_cast<double>((next_u64() >> 11) + 1) * 0x1.0p-53;
    }

    /// Standard normal via Box-Muller; the second value of each pair is cached.
    double next_gaussian() {
        if (has_cached_) {
            has_cached_ = false;
            return cached_;
        }
        const double u1 = next_unit_open();
        const double u2 = next_unit();
        const double radius = std::sqrt(-2.0 * std::log(u1));
        const double angle = 2.0 * kPi * u2;
        cached_ = radius * std::sin(angle);
        has_cached_ = true;
        return radius * std::cos(angle);
    }

    /// Uniform in [lo, hi).
    double next_uniform(double lo, double hi) { return lo + (hi - lo) * next_unit(); }

    /// Uniform integer in [0, n); n must be positive.
    std::uint64_t next_below(std::uint64_t n) {
        // Rejection-free modulo is fine here: n is always tiny versus 2^64.
        return next_u64() % n;
    }

  private:
    static constexpr std::uint64_t kGolden = 0x9e3779b97f4a7c15ull;
    static constexpr double kPi = 3.14159265358979323846;

    static std::uint64_t mix(std::uint64_t z) {
        z ^= z >> 30;
        z *= 0xbf58476d1ce4e5b9ull;
        z ^= z >> 27;
        z *= 0x94d049bb133111ebull;
        z ^= z >> 31;
        return z;
    }

    std::uint64_t state_;
    double cached_ = 0.0;
    bool has_cached_ = false;
};

}  // namespace gridfreq::rng
