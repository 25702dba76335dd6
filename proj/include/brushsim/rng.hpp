#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>
#include <vector>

namespace brushsim {

using Rng = std::mt19937_64;

// Derives an independent generator from a master seed and a path of
// stream tags (e.g. {trial, kEnvStream, user}). Identical (seed, path)
// pairs always yield identical streams.
inline Rng make_stream(std::uint64_t master, std::initializer_list<std::uint64_t> path) {
  std::vector<std::uint32_t> material;
  material.reserve(2 + 2 * path.size());
  material.push_back(static_cast<std::uint32_t>(master));
  material.push_back(static_cast<std::uint32_t>(master >> 32));
  for (std::uint64_t tag : path) {
    material.push_back(static_cast<std::uint32_t>(tag));
    material.push_back(static_cast<std::uint32_t>(tag >> 32));
  }
  std::seed_seq seq(material.begin(), material.end());
  return Rng(seq);
}

// Stream tags used by the experiment harness.
inline constexpr std::uint64_t kPopulationStream = 1;
inline constexpr std::uint64_t kEnvStream = 2;
inline constexpr std::uint64_t kAlgStream = 3;

}  // namespace brushsim
