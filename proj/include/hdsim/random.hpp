#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>

namespace hdsim {

/// Philox4x32-10 counter-based generator (Salmon et al., SC'11).
///
/// Every output block is a pure function of (key, counter), so any element of
/// a simulated matrix can be produced independently of how the work is split
/// across threads.
class Philox4x32 {
 public:
  using Counter = std::array<std::uint32_t, 4>;
  using Key = std::array<std::uint32_t, 2>;

  static constexpr Counter generate(Counter ctr, Key key) noexcept {
    for (int round = 0; round < 10; ++round) {
      ctr = single_round(ctr, key);
      key[0] += 0x9E3779B9u;
      key[1] += 0xBB67AE85u;
    }
    return ctr;
  }

  static constexpr Key key_from_seed(std::uint64_t seed) noexcept {
    return {static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)};
  }

 private:
  static constexpr Counter single_round(const Counter& c, const Key& k) noexcept {
    const std::uint64_t p0 = std::uint64_t{0xD2511F53u} * c[0];
    const std::uint64_t p1 = std::uint64_t{0xCD9E8D57u} * c[2];
    const auto hi0 = static_cast<std::uint32_t>(p0 >> 32);
    const auto lo0 = static_cast<std::uint32_t>(p0);
    const auto hi1 = static_cast<std::uint32_t>(p1 >> 32);
    const auto lo1 = static_cast<std::uint32_t>(p1);
    return {hi1 ^ c[1] ^ k[0], lo1, hi0 ^ c[3] ^ k[1], lo0};
  }
};

/// Purpose tags keep streams used for different jobs disjoint.
enum class StreamTag : std::uint32_t {
  Sample = 1,
  Gaussian = 2,
  Matrix = 3,
  Synthetic = 4,
};

/// Maps 64 random bits to a double in the open interval (0, 1).
constexpr double to_open_unit(std::uint64_t bits) noexcept {
  return (static_cast<double>(bits >> 12) + 0.5) * 0x1.0p-52;
}

constexpr std::uint64_t join(std::uint32_t hi, std::uint32_t lo) noexcept {
  return (std::uint64_t{hi} << 32) | lo;
}

/// Two uniforms for block `index` of stream (`seed`, `stream`, `tag`).
inline std::array<double, 2> uniform_pair(std::uint64_t seed, std::uint32_t stream,
                                          StreamTag tag, std::uint64_t index) noexcept {
  const Philox4x32::Counter ctr{static_cast<std::uint32_t>(index),
                                static_cast<std::uint32_t>(index >> 32), stream,
                                static_cast<std::uint32_t>(tag)};
  const auto out = Philox4x32::generate(ctr, Philox4x32::key_from_seed(seed));
  return {to_open_unit(join(out[0], out[1])), to_open_unit(join(out[2], out[3]))};
}

/// Two independent standard normals (Box-Muller) for block `index`.
inline std::array<double, 2> normal_pair(std::uint64_t seed, std::uint32_t stream,
                                         StreamTag tag, std::uint64_t index) noexcept {
  const auto [u1, u2] = uniform_pair(seed, stream, tag, index);
  const double radius = std::sqrt(-2.0 * std::log(u1));
  const double angle = 2.0 * std::numbers::pi * u2;
  return {radius * std::cos(angle), radius * std::sin(angle)};
}

/// Sequential view over one counter stream, for small serial draws.
class CounterRng {
 public:
  CounterRng(std::uint64_t seed, std::uint32_t stream, StreamTag tag)
      : seed_(seed), stream_(stream), tag_(tag) {}

  double uniform() noexcept {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    const auto pair = uniform_pair(seed_, stream_, tag_, index_++);
    spare_ = pair[1];
    have_spare_ = true;
    return pair[0];
  }

  double uniform(double lo, double hi) noexcept { return lo + (hi - lo) * uniform(); }

  double normal() noexcept {
    const double u1 = uniform();
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
  }

  double exponential(double mean) noexcept { return -mean * std::log(uniform()); }

 private:
  std::uint64_t seed_;
  std::uint32_t stream_;
  StreamTag tag_;
  std::uint64_t index_ = 0;
  double spare_ = 0.0;
  bool have_spare_ = false;
};

/// SplitMix64 finalizer; derives well-separated child seeds.
constexpr std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t salt) noexcept {
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ull * (salt + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

}  // namespace hdsim
