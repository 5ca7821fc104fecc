// Seed derivation for reproducible, worker-count independent random streams.
//
// Every random stream in a run is keyed by (master seed, stage tag, i, j) and
// hashed with SplitMix64. A stream therefore depends only on *what* it is
// used for, never on which worker produced it or in which order.
#pragma once

#include <cstdint>
#include <random>

namespace muontag {

using Engine = std::mt19937_64;

//! Stage tags used in seed derivation. Values are part of the file-level
//! reproducibility contract; do not renumber.
enum class Stream : std::uint64_t
{
    MuonSlice = 1,
    GammaSlice = 2,
    OnsetJitter = 3,
    WhiteNoise = 4,
    PinkNoise = 5,
    TaggingFraction = 6,
    Toy = 7,
};

constexpr std::uint64_t splitmix64(std::uint64_t x)
{
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

constexpr std::uint64_t derive_seed(std::uint64_t master, Stream stream,
                                    std::uint64_t i = 0, std::uint64_t j = 0)
{
    std::uint64_t h = splitmix64(master);
    h = splitmix64(h ^ static_cast<std::uint64_t>(stream));
    h = splitmix64(h ^ i);
    h = splitmix64(h ^ (j + 0x632be59bd9b4e019ULL));
    return h;
}

inline Engine make_engine(std::uint64_t master, Stream stream,
                          std::uint64_t i = 0, std::uint64_t j = 0)
{
    return Engine(derive_seed(master, stream, i, j));
}

//! Uniform double in [0, 1) with 53 random bits.
inline double uniform01(Engine& rng)
{
    return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

}  // namespace muontag
