#ifndef HYPOLANG_RNG_HPP
#define HYPOLANG_RNG_HPP

#include <cstdint>
#include <random>

namespace hypolang {

/// Reproducible random stream identified by (seed, stream id).
class RngStream {
 public:
  RngStream(std::uint64_t seed, std::uint64_t stream_id) : seed_(seed), id_(stream_id) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(stream_id),
                      static_cast<std::uint32_t>(stream_id >> 32), 0x68797065u};
    engine_.seed(seq);
  }

  std::uint64_t seed() const { return seed_; }
  std::uint64_t stream_id() const { return id_; }

  double normal() { return normal_(engine_); }
  double uniform() { return uniform_(engine_); }

  std::mt19937_64& engine() { return engine_; }

 private:
  std::uint64_t seed_;
  std::uint64_t id_;
  std::mt19937_64 engine_;
  std::normal_distribution<double> normal_{0.0, 1.0};
  std::uniform_real_distribution<double> uniform_{0.0, 1.0};
};

// Named stream families so that different experiments never share draws.
namespace streams {
inline constexpr std::uint64_t kStationary = 1ull << 40;
inline constexpr std::uint64_t kTrajectories = 2ull << 40;
inline constexpr std::uint64_t kDecay = 3ull << 40;
inline constexpr std::uint64_t kErgodic = 4ull << 40;
inline constexpr std::uint64_t kVerify = 5ull << 40;
inline constexpr std::uint64_t kMeanEstimate = 6ull << 40;
}  // namespace streams

}  // namespace hypolang

#endif  // HYPOLANG_RNG_HPP
