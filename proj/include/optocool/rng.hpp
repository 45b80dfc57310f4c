#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>

namespace optocool {

// Identifies one noise stream. Every trajectory in a batch owns a distinct
// (seed, stream_id) pair, so trajectories can be integrated concurrently and
// replayed individually.
struct NoiseConfig {
  std::uint64_t seed = 0;
  std::uint64_t stream_id = 0;
};

namespace detail {

// SplitMix64 output function (Vigna). Bijective 64-bit mix, used both to
// hash (seed, stream_id) and to expand the hash into generator state.
constexpr std::uint64_t mix64(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

struct SplitMix64 {
  std::uint64_t state = 0;
  constexpr std::uint64_t next() {
    return mix64(state += 0x9e3779b97f4a7c15ull);
  }
};

constexpr std::uint64_t rotl64(std::uint64_t x, int k) {
  return (x << k) | (x >> (64 - k));
}

}  // namespace detail

// xoshiro256++ seeded per stream through SplitMix64, with Box-Muller normal
// deviates. Both the uniform and the normal path are rejection-free, so the
// number of raw draws consumed per call is fixed and a stream replays
// bit-exactly given the same call sequence.
class Rng {
 public:
  Rng(std::uint64_t seed, std::uint64_t stream_id) {
    // seed-hash combined with a rotated stream-hash; distinct stream ids
    // under one seed always start the expander at distinct points.
    detail::SplitMix64 sm{detail::mix64(seed) ^
                          detail::rotl64(detail::mix64(stream_id + 0x9e3779b97f4a7c15ull), 32)};
    for (auto& word : state_) word = sm.next();
    if ((state_[0] | state_[1] | state_[2] | state_[3]) == 0) state_[0] = 1;
  }

  explicit Rng(NoiseConfig cfg) : Rng(cfg.seed, cfg.stream_id) {}

  std::uint64_t next_u64() {
    const std::uint64_t result = detail::rotl64(state_[0] + state_[3], 23) + state_[0];
    const std::uint64_t t = state_[1] << 17;
    state_[2] ^= state_[0];
    state_[3] ^= state_[1];
    state_[1] ^= state_[2];
    state_[0] ^= state_[3];
    state_[2] ^= t;
    state_[3] = detail::rotl64(state_[3], 45);
    return result;
  }

  // Uniform on [0, 1), 53-bit resolution.
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  // Standard normal via the trigonometric Box-Muller transform. Pairs are
  // generated together and the second value cached, so two calls consume
  // exactly two uniforms.
  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    const double u1 = 1.0 - uniform();  // (0, 1], keeps the log finite
    const double u2 = uniform();
    const double radius = std::sqrt(-2.0 * std::log(u1));
    const double angle = 2.0 * std::numbers::pi * u2;
    spare_ = radius * std::sin(angle);
    has_spare_ = true;
    return radius * std::cos(angle);
  }

 private:
  std::uint64_t state_[4];
  double spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace optocool
