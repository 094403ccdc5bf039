#pragma once

#include <cstdint>
#include <random>

namespace tailmoment {

using Rng = std::mt19937_64;

// SplitMix64 finalizer.
constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

// Seed of an independent substream identified by (master, a, b). Work units
// draw from their own substream so results do not depend on scheduling.
constexpr std::uint64_t derive_seed(std::uint64_t master, std::uint64_t a,
                                    std::uint64_t b = 0) noexcept {
  return mix64(mix64(mix64(master) ^ a) ^ (b * 0xd1b54a32d192ed03ULL));
}

inline Rng substream(std::uint64_t master, std::uint64_t a, std::uint64_t b = 0) {
  return Rng(derive_seed(master, a, b));
}

// Stream tags used with derive_seed so different consumers of one master seed
// never share a substream.
enum class StreamTag : std::uint64_t {
  kProposalPool = 0x100,
  kVerification = 0x200,
  kPowerCurve = 0x300,
  kReplication = 0x400,
  kRetry = 0x500,
};

inline std::uint64_t tagged(std::uint64_t master, StreamTag tag, std::uint64_t extra = 0) {
  return derive_seed(master, static_cast<std::uint64_t>(tag), extra);
}

}  // namespace tailmoment
