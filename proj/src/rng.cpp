#include "evorl/rng.hpp"

#include <cmath>

namespace evorl {

namespace {

constexpr std::uint64_t kParity = 0x1BD11BDAA9FC1A22ull;
constexpr int kRot[8] = {16, 42, 12, 31, 16, 32, 24, 21};

inline std::uint64_t rotl(std::uint64_t x, int r) {
  return (x << r) | (x >> (64 - r));
}

}  // namespace

std::array<std::uint64_t, 2> threefry2x64(const std::array<std::uint64_t, 2>& key,
                                          const std::array<std::uint64_t, 2>& ctr) {
  const std::uint64_t ks[3] = {key[0], key[1], kParity ^ key[0] ^ key[1]};
  std::uint64_t x0 = ctr[0] + ks[0];
  std::uint64_t x1 = ctr[1] + ks[1];
  for (int r = 0; r < 20; ++r) {
    x0 += x1;
    x1 = rotl(x1, kRot[r % 8]);
    x1 ^= x0;
    if ((r + 1) % 4 == 0) {
      const std::uint64_t j = static_cast<std::uint64_t>(r + 1) / 4;
      x0 += ks[j % 3];
      x1 += ks[(j + 1) % 3] + j;
    }
  }
  return {x0, x1};
}

RngKey key_from_seed(std::uint64_t seed) {
  // Fixed root key (fractional bits of phi and sqrt(3)); seeds 0,1,2,... then
  // map to well-separated keys through the cipher.
  const auto out = threefry2x64({0x9E3779B97F4A7C15ull, 0xBB67AE8584CAA73Bull}, {0, seed});
  return {out[0], out[1]};
}

RngKey fold_in(RngKey key, std::uint64_t index) {
  const auto out = threefry2x64({key.hi, key.lo}, {0, index});
  return {out[0], out[1]};
}

std::vector<RngKey> split(RngKey key, std::size_t n) {
  std::vector<RngKey> out(n);
  for (std::size_t i = 0; i < n; ++i) out[i] = fold_in(key, i);
  return out;
}

std::uint64_t RandomStream::next_u64() {
  if (has_pending_word_) {
    has_pending_word_ = false;
    return pending_word_;
  }
  const auto out = threefry2x64({key_.hi, key_.lo}, {1, block_++});
  pending_word_ = out[1];
  has_pending_word_ = true;
  return out[0];
}

double RandomStream::uniform() {
  // Top 53 bits -> [0, 1) on the 2^-53 grid.
  return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

double RandomStream::uniform(double lo, double hi) {
  return lo + (hi - lo) * uniform();
}

double RandomStream::normal() {
  if (has_pending_normal_) {
    has_pending_normal_ = false;
    return pending_normal_;
  }
  // Box-Muller; u1 shifted into (0, 1] so log stays finite.
  const double u1 = static_cast<double>((next_u64() >> 11) + 1) * 0x1.0p-53;
  const double u2 = uniform();
  const double r = std::sqrt(-2.0 * std::log(u1));
  const double a = 2.0 * M_PI * u2;
  pending_normal_ = r * std::sin(a);
  has_pending_normal_ = true;
  return r * std::cos(a);
}

std::uint64_t RandomStream::randint(std::uint64_t n) {
  // Reject the top partial block of 2^64 so every residue is equally likely.
  const std::uint64_t m = (~std::uint64_t{0} % n + 1) % n;  // 2^64 mod n
  for (;;) {
    const std::uint64_t x = next_u64();
    if (m == 0 || x < std::uint64_t{0} - m) return x % n;
  }
}

}  // namespace evorl
