#pragma once

// Reproducible random streams.
//
// Every random draw in the library comes from an Rng obtained through
// make_stream(seed, index, purpose). The stream state is a pure function of
// that triple, so results never depend on how trials are spread over workers.
//
// Key derivation: the triple is folded through SplitMix64
//   s0 = splitmix(seed), s1 = splitmix(s0 ^ index), s2 = splitmix(s1 ^ purpose)
// and s2 seeds a SplitMix64 sequence that fills the 256-bit xoshiro256** state.

#include <array>
#include <cstdint>
#include <limits>

namespace equicov {

// Purpose tags separate the streams drawn for one trial index.
enum class Purpose : std::uint64_t {
  Scene = 0x01,
  Fading = 0x02,
  CoUsers = 0x03,
  VoidScaled = 0x10,
  VoidReference = 0x11,
  Bootstrap = 0x20,
  Ergodic = 0x30,
  ErgodicThinning = 0x31,
  ErgodicPick = 0x32,
  ErgodicBs = 0x33,
  Contour = 0x40,
  Sweep = 0x50,
  Identity = 0x60,
};

constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// xoshiro256** (Blackman & Vigna). Satisfies UniformRandomBitGenerator.
class Rng {
 public:
  using result_type = std::uint64_t;

  explicit Rng(std::uint64_t key = 0) noexcept {
    std::uint64_t x = key;
    for (auto& w : state_) {
      w = splitmix64(x);
      x += 0x9e3779b97f4a7c15ULL;
    }
  }

  static constexpr result_type min() noexcept { return 0; }
  static constexpr result_type max() noexcept { return std::numeric_limits<result_type>::max(); }

  result_type operator()() noexcept {
    const std::uint64_t result = rotl(state_[1] * 5, 7) * 9;
    const std::uint64_t t = state_[1] << 17;
    state_[2] ^= state_[0];
    state_[3] ^= state_[1];
    state_[1] ^= state_[2];
    state_[0] ^= state_[3];
    state_[2] ^= t;
    state_[3] = rotl(state_[3], 45);
    return result;
  }

  // Uniform on [0, 1) with 53 random bits.
  double uniform() noexcept { return static_cast<double>((*this)() >> 11) * 0x1.0p-53; }

  // Uniform on (0, 1]; safe to pass to log().
  double uniform_open0() noexcept { return (static_cast<double>((*this)() >> 11) + 1.0) * 0x1.0p-53; }

  friend bool operator==(const Rng&, const Rng&) = default;

 private:
  static constexpr std::uint64_t rotl(std::uint64_t x, int k) noexcept {
    return (x << k) | (x >> (64 - k));
  }

  std::array<std::uint64_t, 4> state_{};
};

constexpr std::uint64_t stream_key(std::uint64_t seed, std::uint64_t index, Purpose purpose) noexcept {
  const std::uint64_t s0 = splitmix64(seed);
  const std::uint64_t s1 = splitmix64(s0 ^ index);
  return splitmix64(s1 ^ static_cast<std::uint64_t>(purpose));
}

inline Rng make_stream(std::uint64_t seed, std::uint64_t index, Purpose purpose) noexcept {
  return Rng(stream_key(seed, index, purpose));
}

// Derives an independent child seed, e.g. one per k-value or grid cell.
constexpr std::uint64_t child_seed(std::uint64_t seed, std::uint64_t index, Purpose purpose) noexcept {
  return stream_key(seed, index, purpose);
}

}  // namespace equicov
