#ifndef AMFSL_RANDOM_H_
#define AMFSL_RANDOM_H_

#include <cstdint>
#include <random>

namespace amfsl {

using Rng = std::mt19937_64;

// Independent generator per (seed, stream) pair.
inline Rng make_rng(std::uint64_t seed, std::uint64_t stream = 0) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed),
                    static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream),
                    static_cast<std::uint32_t>(stream >> 32)};
  return Rng(seq);
}

// Stream tags, so that one run seed feeds unrelated consumers without
// correlating them.
namespace streams {
inline constexpr std::uint64_t kData = 1;
inline constexpr std::uint64_t kInit = 2;
inline constexpr std::uint64_t kTrainEpisodes = 3;
inline constexpr std::uint64_t kValidation = 4;
inline constexpr std::uint64_t kEval = 5;
inline constexpr std::uint64_t kGfsl = 6;
inline constexpr std::uint64_t kProbe = 7;
}  // namespace streams

}  // namespace amfsl

#endif  // AMFSL_RANDOM_H_
