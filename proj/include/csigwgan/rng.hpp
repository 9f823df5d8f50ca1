#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>

namespace csigwgan {

using Rng = std::mt19937_64;

inline std::uint64_t splitmix64(std::uint64_t x)
{
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

// Independent generator keyed by (seed, counters...). Streams for different
// keys do not depend on the order in which they are created.
inline Rng substream(std::uint64_t seed, std::initializer_list<std::uint64_t> counters)
{
    std::uint64_t h = splitmix64(seed);
    for (auto c : counters) h = splitmix64(h ^ splitmix64(c + 0x632be59bd9b4e019ULL));
    std::seed_seq seq{static_cast<std::uint32_t>(h), static_cast<std::uint32_t>(h >> 32)};
    return Rng(seq);
}

inline double standard_normal(Rng& rng)
{
    std::normal_distribution<double> n(0.0, 1.0);
    return n(rng);
}

// Stream tags keep the substreams of different consumers apart.
namespace stream {
inline constexpr std::uint64_t trajectory = 1;
inline constexpr std::uint64_t init = 2;
inline constexpr std::uint64_t split = 3;
inline constexpr std::uint64_t shuffle = 4;
inline constexpr std::uint64_t latent = 5;
inline constexpr std::uint64_t validation = 6;
inline constexpr std::uint64_t evaluation = 7;
inline constexpr std::uint64_t initial = 8;
} // namespace stream

} // namespace csigwgan
