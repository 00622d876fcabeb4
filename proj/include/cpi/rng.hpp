#pragma once

#include <cstdint>
#include <random>

namespace cpi {

using Rng = std::mt19937_64;

inline std::uint64_t splitmix64(std::uint64_t x)
{
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

//! Child seed that depends only on (base, index).
inline std::uint64_t derive_seed(std::uint64_t base, std::uint64_t index)
{
  return splitmix64(splitmix64(base) ^ splitmix64(~index));
}

inline Rng make_rng(std::uint64_t base, std::uint64_t index)
{
  std::uint64_t s = derive_seed(base, index);
  std::seed_seq seq{ static_cast<std::uint32_t>(s), static_cast<std::uint32_t>(s >> 32),
                     static_cast<std::uint32_t>(index), static_cast<std::uint32_t>(index >> 32) };
  return Rng(seq);
}

} // namespace cpi
