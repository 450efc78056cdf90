#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

namespace serlab {

// Counter-based splitmix64 stream. split() derives child streams as a pure
// function of (stream identity, tag), so per-item streams never depend on
// how much the parent has drawn or on scheduling order. state() exposes the
// evolving 64-bit splitmix state; constructing from it resumes the draw
// sequence exactly.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : seed_(seed) {}

  static std::uint64_t mix(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }

  std::uint64_t next_u64() { return mix(seed_ + ++counter_ * kGamma); }

  // Child stream for a fixed tag, independent of this stream's draws.
  Rng split(std::uint64_t tag) const {
    return Rng(mix(seed_ ^ mix(tag * kGamma + kGamma)));
  }

  // Uniform in [0, 1), 53-bit resolution.
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  // Uniform in (0, 1]; safe as a log() argument.
  double uniform_pos() {
    return static_cast<double>((next_u64() >> 11) + 1) * 0x1.0p-53;
  }

  // Standard normal via Box-Muller, one value per two draws.
  double normal() {
    const double u1 = uniform_pos();
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(kTwoPi * u2);
  }

  // Uniform integer in [0, n). n must be > 0.
  std::uint64_t below(std::uint64_t n) {
    return static_cast<std::uint64_t>(
        (static_cast<unsigned __int128>(next_u64()) * n) >> 64);
  }

  std::uint64_t state() const { return seed_ + counter_ * kGamma; }

 private:
  static constexpr std::uint64_t kGamma = 0x9E3779B97F4A7C15ULL;
  static constexpr double kTwoPi = 6.283185307179586476925287;
  std::uint64_t seed_;
  std::uint64_t counter_ = 0;
};

// Deterministic Fisher-Yates; std::shuffle's draw pattern is not pinned by
// the standard, this is.
template <class T>
void shuffle(std::vector<T>& v, Rng& rng) {
  for (std::size_t i = v.size(); i > 1; --i) {
    std::swap(v[i - 1], v[rng.below(i)]);
  }
}

// Stage tags for fanning one global seed out to per-stage streams. Adding a
// stage never perturbs earlier stages.
namespace stage {
inline constexpr std::uint64_t kWorld = 1;
inline constexpr std::uint64_t kSplits = 2;
inline constexpr std::uint64_t kSeedTrain = 3;
inline constexpr std::uint64_t kSerLoop = 4;
inline constexpr std::uint64_t kPpo = 5;
inline constexpr std::uint64_t kEval = 6;
inline constexpr std::uint64_t kTheory = 7;
}  // namespace stage

}  // namespace serlab
