#pragma once

#include <cstdint>
#include <initializer_list>

namespace volterra {

/// SplitMix64 finalizer.
constexpr std::uint64_t mix64(std::uint64_t z)
{
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

/// Combines a base seed with stream tags (ratio index, run index, purpose...)
/// into a new, decorrelated seed.
std::uint64_t derive_seed(std::uint64_t base, std::initializer_list<std::uint64_t> tags);

/// Counter-based generator: draw i is mix64(seed + (i + 1) * golden), i.e. the
/// SplitMix64 sequence addressed by counter. Normals use Box-Muller on the
/// uniform pair (2i, 2i + 1), cosine branch only, so draw i of every stream is
/// a pure function of (seed, i).
class CounterRng {
public:
    explicit CounterRng(std::uint64_t seed) : seed_(seed) {}

    std::uint64_t bits_at(std::uint64_t counter) const;

    /// Uniform on [0, 1) with 53 random bits.
    double uniform_at(std::uint64_t counter) const;

    /// Standard normal built from uniforms 2*index and 2*index + 1.
    double normal_at(std::uint64_t index) const;

    std::uint64_t next_bits() { return bits_at(counter_++); }
    double uniform() { return uniform_at(counter_++); }
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
    double normal();

    std::uint64_t seed() const { return seed_; }

private:
    std::uint64_t seed_;
    std::uint64_t counter_ = 0;
    std::uint64_t normal_counter_ = 0;
};

}  // namespace volterra
