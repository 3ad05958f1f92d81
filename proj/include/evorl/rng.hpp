#pragma once

#include <array>
#include <cstdint>
#include <vector>

namespace evorl {

// Splittable 128-bit RNG key. Child keys are derived with Threefry2x64-20
// (counter-based block cipher), so fold_in/split are pure, order-independent,
// and distinct indices give distinct children (the cipher is a bijection of
// the counter for a fixed key).
struct RngKey {
  std::uint64_t hi = 0;
  std::uint64_t lo = 0;
  bool operator==(const RngKey&) const = default;
};

// Threefry2x64, 20 rounds. Rotation constants {16,42,12,31,16,32,24,21} and
// key-schedule parity constant 0x1BD11BDAA9FC1A22 are the published ones.
std::array<std::uint64_t, 2> threefry2x64(const std::array<std::uint64_t, 2>& key,
                                          const std::array<std::uint64_t, 2>& ctr);

RngKey key_from_seed(std::uint64_t seed);

// Domain separation: fold_in uses counter block (0, index); RandomStream
// draws use (1, block). Nested fold_in chains re-key at every level.
RngKey fold_in(RngKey key, std::uint64_t index);
std::vector<RngKey> split(RngKey key, std::size_t n);

// Buffered stream of draws derived from one key. Streams are transient: all
// persistent state holds bare keys, a stream is (re)built where draws happen.
class RandomStream {
 public:
  RandomStream() = default;
  explicit RandomStream(RngKey key) : key_(key) {}

  std::uint64_t next_u64();
  double uniform();                          // [0, 1)
  double uniform(double lo, double hi);      // [lo, hi)
  double normal();                           // N(0,1), Box-Muller
  std::uint64_t randint(std::uint64_t n);    // uniform over [0, n), unbiased

 private:
  RngKey key_;
  std::uint64_t block_ = 0;
  std::uint64_t pending_word_ = 0;
  bool has_pending_word_ = false;
  double pending_normal_ = 0.0;
  bool has_pending_normal_ = false;
};

}  // namespace evorl
