#include "volterra/random.hpp"

#include <cmath>
#include <numbers>

namespace volterra {

namespace {
constexpr std::uint64_t golden = 0x9e3779b97f4a7c15ULL;
}

std::uint64_t derive_seed(std::uint64_t base, std::initializer_list<std::uint64_t> tags)
{
    std::uint64_t s = mix64(base + golden);
    for (const std::uint64_t t : tags) {
        s = mix64(s ^ mix64(t + golden));
    }
    return s;
}

std::uint64_t CounterRng::bits_at(std::uint64_t counter) const
{
    return mix64(seed_ + (counter + 1) * golden);
}

double CounterRng::uniform_at(std::uint64_t counter) const
{
    return static_cast<double>(bits_at(counter) >> 11) * 0x1.0p-53;
}

double CounterRng::normal_at(std::uint64_t index) const
{
    // 1 - u keeps the log argument in (0, 1].
    const double u1 = 1.0 - uniform_at(2 * index);
    const double u2 = uniform_at(2 * index + 1);
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

double CounterRng::normal()
{
    // Normals live on their own counter so interleaving with uniform() stays reproducible.
    return normal_at((1ULL << 62) + normal_counter_++);
}

}  // namespace volterra
