#include "evorl/replay_buffer.hpp"

#include <stdexcept>

namespace evorl {

ReplayBuffer::ReplayBuffer(std::int64_t capacity, int obs_dim, int act_dim)
    : capacity_(capacity), obs_dim_(obs_dim), act_dim_(act_dim) {
  if (capacity <= 0) throw std::invalid_argument("ReplayBuffer: capacity must be positive");
  obs_ = Mat::Zero(obs_dim, capacity);
  next_obs_ = Mat::Zero(obs_dim, capacity);
  actions_ = Mat::Zero(act_dim, capacity);
  rewards_ = Vec::Zero(capacity);
  terminated_.assign(capacity, 0);
  truncated_.assign(capacity, 0);
}

void ReplayBuffer::add(const SampleBatch& rows) {
  const auto n = rows.size();
  for (Eigen::Index r = 0; r < n; ++r) {
    obs_.col(cursor_) = rows.obs.row(r).transpose();
    next_obs_.col(cursor_) = rows.next_obs.row(r).transpose();
    actions_.col(cursor_) = rows.actions.row(r).transpose();
    rewards_[cursor_] = rows.rewards[r];
    terminated_[cursor_] = rows.terminated[r];
    truncated_[cursor_] = rows.truncated[r];
    cursor_ = (cursor_ + 1) % capacity_;
    if (size_ < capacity_) ++size_;
  }
}

SampleBatch ReplayBuffer::sample(RandomStream& stream, int n) const {
  if (size_ == 0) throw std::logic_error("ReplayBuffer::sample: empty buffer");
  SampleBatch out;
  out.obs.resize(n, obs_dim_);
  out.next_obs.resize(n, obs_dim_);
  out.actions.resize(n, act_dim_);
  out.rewards.resize(n);
  out.terminated.resize(n);
  out.truncated.resize(n);
  for (int r = 0; r < n; ++r) {
    const auto i = static_cast<std::int64_t>(stream.randint(static_cast<std::uint64_t>(size_)));
    out.obs.row(r) = obs_.col(i).transpose();
    out.next_obs.row(r) = next_obs_.col(i).transpose();
    out.actions.row(r) = actions_.col(i).transpose();
    out.rewards[r] = rewards_[i];
    out.terminated[r] = terminated_[i];
    out.truncated[r] = truncated_[i];
  }
  return out;
}

SampleBatch ReplayBuffer::slots(std::int64_t begin, std::int64_t end) const {
  const auto n = end - begin;
  SampleBatch out;
  out.obs.resize(n, obs_dim_);
  out.next_obs.resize(n, obs_dim_);
  out.actions.resize(n, act_dim_);
  out.rewards.resize(n);
  out.terminated.resize(n);
  out.truncated.resize(n);
  for (std::int64_t i = begin; i < end; ++i) {
    const auto r = i - begin;
    out.obs.row(r) = obs_.col(i).transpose();
    out.next_obs.row(r) = next_obs_.col(i).transpose();
    out.actions.row(r) = actions_.col(i).transpose();
    out.rewards[r] = rewards_[i];
    out.terminated[r] = terminated_[i];
    out.truncated[r] = truncated_[i];
  }
  return out;
}

void ReplayBuffer::restore(std::int64_t cursor, const SampleBatch& rows) {
  if (rows.size() > capacity_) throw std::invalid_argument("ReplayBuffer::restore: overflow");
  cursor_ = 0;
  size_ = 0;
  add(rows);
  cursor_ = cursor;
  size_ = rows.size();
}

SampleBatch concat_batches(const std::vector<SampleBatch>& parts) {
  Eigen::Index total = 0;
  bool with_logp = !parts.empty();
  for (const auto& p : parts) {
    total += p.size();
    with_logp = with_logp && p.logp.size() == p.size();
  }
  SampleBatch out;
  if (parts.empty()) return out;
  const auto od = parts[0].obs.cols(), ad = parts[0].actions.cols();
  out.obs.resize(total, od);
  out.next_obs.resize(total, od);
  out.actions.resize(total, ad);
  out.rewards.resize(total);
  out.terminated.resize(total);
  out.truncated.resize(total);
  if (with_logp) out.logp.resize(total);
  Eigen::Index at = 0;
  for (const auto& p : parts) {
    const auto n = p.size();
    out.obs.middleRows(at, n) = p.obs;
    out.next_obs.middleRows(at, n) = p.next_obs;
    out.actions.middleRows(at, n) = p.actions;
    out.rewards.segment(at, n) = p.rewards;
    std::copy(p.terminated.begin(), p.terminated.end(), out.terminated.begin() + at);
    std::copy(p.truncated.begin(), p.truncated.end(), out.truncated.begin() + at);
    if (with_logp) out.logp.segment(at, n) = p.logp;
    at += n;
  }
  return out;
}

}  // namespace evorl
