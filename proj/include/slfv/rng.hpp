#pragma once

#include <cmath>
#include <cstdint>

namespace slfv {

// Counter-based uniform generator (splitmix64 over an affine counter).
// State is exactly (seed, stream, counter), so any draw can be replayed
// by position and distinct streams are statistically independent.
class RngStream {
  public:
    RngStream() = default;
    RngStream(std::uint64_t seed, std::uint64_t stream, std::uint64_t counter = 0)
        : base_(mix(mix(seed ^ 0x5851f42d4c957f2dULL) + mix(stream * 0x9e3779b97f4a7c15ULL + 1))),
          counter_(counter) {}

    std::uint64_t next_u64() { return mix(base_ + (counter_++) * kGamma); }

    // Uniform on [0, 1); 53 random bits.
    double next_u01() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    // Exponential with the given rate; u < 1 keeps the log argument positive.
    double next_exponential(double rate) { return -std::log1p(-next_u01()) / rate; }

    std::uint64_t counter() const { return counter_; }
    void set_counter(std::uint64_t c) { counter_ = c; }

  private:
    static constexpr std::uint64_t kGamma = 0x9e3779b97f4a7c15ULL;

    static std::uint64_t mix(std::uint64_t z) {
        z ^= z >> 30;
        z *= 0xbf58476d1ce4e5b9ULL;
        z ^= z >> 27;
        z *= 0x94d049bb133111ebULL;
        z ^= z >> 31;
        return z;
    }

    std::uint64_t base_ = 0;
    std::uint64_t counter_ = 0;
};

}  // namespace slfv
