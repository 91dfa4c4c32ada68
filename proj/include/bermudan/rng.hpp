#pragma once

// Counter-based random streams. Every simulated path owns a stream keyed by
// (seed, path index), so a path's draws never depend on batch size, chunking
// or thread count.

#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>

namespace bermudan::rng {

/// Philox4x32 with 10 rounds (Salmon et al., SC'11).
struct Philox4x32 {
  using Counter = std::array<std::uint32_t, 4>;
  using Key = std::array<std::uint32_t, 2>;

  static constexpr std::uint32_t kMul0 = 0xD2511F53u;
  static constexpr std::uint32_t kMul1 = 0xCD9E8D57u;
  static constexpr std::uint32_t kWeyl0 = 0x9E3779B9u;
  static constexpr std::uint32_t kWeyl1 = 0xBB67AE85u;

  static constexpr Counter generate(Counter ctr, Key key) {
    for (int round = 0; round < 10; ++round) {
      if (round > 0) {
        key[0] += kWeyl0;
        key[1] += kWeyl1;
      }
      const std::uint64_t p0 = static_cast<std::uint64_t>(kMul0) * ctr[0];
      const std::uint64_t p1 = static_cast<std::uint64_t>(kMul1) * ctr[2];
      ctr = {static_cast<std::uint32_t>(p1 >> 32) ^ ctr[1] ^ key[0],
             static_cast<std::uint32_t>(p1),
             static_cast<std::uint32_t>(p0 >> 32) ^ ctr[3] ^ key[1],
             static_cast<std::uint32_t>(p0)};
    }
    return ctr;
  }
};

/// SplitMix64 finalizer; used to derive independent seeds from a base seed.
constexpr std::uint64_t mix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

/// Seed for sample set `tag` of run `index`, derived from a user base seed.
constexpr std::uint64_t derive_seed(std::uint64_t base, std::uint64_t tag,
                                    std::uint64_t index) {
  return mix64(mix64(mix64(base) ^ tag) ^ (index * 0xD1B54A32D192ED03ull));
}

/// Uniform and standard-normal draws for a single path.
class PathStream {
 public:
  PathStream(std::uint64_t seed, std::uint64_t path)
      : key_{static_cast<std::uint32_t>(seed),
             static_cast<std::uint32_t>(seed >> 32)},
        path_(path) {}

  /// Uniform on the open interval (0, 1) with 53 random bits.
  double uniform() {
    if (next_word_ >= 4) refill();
    const std::uint64_t hi = block_[next_word_++];
    const std::uint64_t lo = block_[next_word_++];
    const std::uint64_t bits = ((hi << 32) | lo) >> 11;
    return (static_cast<double>(bits) + 0.5) * 0x1.0p-53;
  }

  /// Box-Muller; the second variate of each pair is cached.
  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    const double radius = std::sqrt(-2.0 * std::log(uniform()));
    const double angle = 2.0 * std::numbers::pi * uniform();
    spare_ = radius * std::sin(angle);
    has_spare_ = true;
    return radius * std::cos(angle);
  }

 private:
  void refill() {
    block_ = Philox4x32::generate(
        {static_cast<std::uint32_t>(path_), static_cast<std::uint32_t>(path_ >> 32),
         static_cast<std::uint32_t>(block_index_),
         static_cast<std::uint32_t>(block_index_ >> 32)},
        key_);
    ++block_index_;
    next_word_ = 0;
  }

  Philox4x32::Key key_;
  std::uint64_t path_;
  std::uint64_t block_index_ = 0;
  Philox4x32::Counter block_{};
  int next_word_ = 4;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace bermudan::rng
