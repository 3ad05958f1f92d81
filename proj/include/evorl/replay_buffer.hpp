#pragma once

#include "evorl/rng.hpp"
#include "evorl/sample_batch.hpp"

namespace evorl {

// Uniform-replay ring buffer. Storage is column-per-slot so sampling gathers
// contiguous columns. Writes wrap FIFO once full; sampling is with
// replacement over the filled prefix.
class ReplayBuffer {
 public:
  ReplayBuffer() = default;
  ReplayBuffer(std::int64_t capacity, int obs_dim, int act_dim);

  void add(const SampleBatch& rows);
  SampleBatch sample(RandomStream& stream, int n) const;

  std::int64_t capacity() const { return capacity_; }
  std::int64_t size() const { return size_; }
  std::int64_t cursor() const { return cursor_; }
  int obs_dim() const { return obs_dim_; }
  int act_dim() const { return act_dim_; }

  // Row view of slot i (oldest-independent physical index), for tests/serialization.
  SampleBatch slots(std::int64_t begin, std::int64_t end) const;
  void restore(std::int64_t cursor, const SampleBatch& rows);  // refill after load

 private:
  std::int64_t capacity_ = 0, size_ = 0, cursor_ = 0;
  int obs_dim_ = 0, act_dim_ = 0;
  Mat obs_, actions_, next_obs_;  // dim x capacity
  Vec rewards_;
  std::vector<std::uint8_t> terminated_, truncated_;
};

}  // namespace evorl
