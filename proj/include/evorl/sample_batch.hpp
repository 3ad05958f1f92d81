#pragma once

#include <cstdint>
#include <vector>

#include "evorl/net.hpp"

namespace evorl {

// Batched transitions, one row per step. next_obs is the true successor
// observation even across auto-resets (it bootstraps TD targets). logp /
// values / advantages / returns are optional and empty unless filled.
struct SampleBatch {
  Mat obs;
  Mat actions;  // discrete actions stored as the index in column 0
  Vec rewards;
  std::vector<std::uint8_t> terminated;
  std::vector<std::uint8_t> truncated;
  Mat next_obs;
  Vec logp;
  Vec values;
  Vec advantages;
  Vec returns;

  Eigen::Index size() const { return obs.rows(); }
};

// Row-wise concatenation of the mandatory fields plus logp when all parts have it.
SampleBatch concat_batches(const std::vector<SampleBatch>& parts);

}  // namespace evorl
