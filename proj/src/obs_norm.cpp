#include "evorl/obs_norm.hpp"

#include <cmath>

namespace evorl {

void WelfordStats::add(const Eigen::Ref<const Vec>& row) {
  if (count == 0.0) {
    mean = row;
    m2 = Vec::Zero(row.size());
    count = 1.0;
    return;
  }
  count += 1.0;
  const Vec delta = row - mean;
  mean += delta / count;
  m2.array() += delta.array() * (row - mean).array();
}

void WelfordStats::merge(const WelfordStats& other) {
  if (other.count == 0.0) return;
  if (count == 0.0) {
    *this = other;
    return;
  }
  const double total = count + other.count;
  const Vec delta = other.mean - mean;
  m2.array() += other.m2.array() + delta.array().square() * (count * other.count / total);
  mean += delta * (other.count / total);
  count = total;
}

Vec WelfordStats::variance() const {
  if (count == 0.0) return mean;  // empty
  return m2 / count;
}

ObsNormState ObsNormState::running_stats(int dim) {
  ObsNormState s;
  s.mode = ObsNormMode::RunningStats;
  s.mean = Vec::Zero(dim);
  s.var = Vec::Ones(dim);
  s.count = 0.0;
  return s;
}

ObsNormState ObsNormState::from_stats(ObsNormMode mode, const WelfordStats& stats) {
  ObsNormState s;
  s.mode = mode;
  s.mean = stats.mean;
  s.var = stats.variance();
  s.count = stats.count;
  return s;
}

void rs_update(ObsNormState& state, const WelfordStats& batch) {
  if (state.mode != ObsNormMode::RunningStats || batch.count == 0.0) return;
  WelfordStats current;
  if (state.count > 0.0) {
    current.count = state.count;
    current.mean = state.mean;
    current.m2 = state.var * state.count;
  }
  current.merge(batch);
  state.mean = current.mean;
  state.var = current.variance();
  state.count = current.count;
}

void rs_update(ObsNormState& state, const Mat& obs_rows) {
  WelfordStats batch;
  for (Eigen::Index r = 0; r < obs_rows.rows(); ++r) batch.add(obs_rows.row(r).transpose());
  rs_update(state, batch);
}

Vec normalize(const ObsNormState& state, const Eigen::Ref<const Vec>& obs) {
  if (state.mode == ObsNormMode::None || state.count == 0.0) return obs;
  return ((obs - state.mean).array() / state.var.array().sqrt().max(1e-8)).matrix();
}

Mat normalize_rows(const ObsNormState& state, const Mat& obs_rows) {
  if (state.mode == ObsNormMode::None || state.count == 0.0) return obs_rows;
  const Eigen::RowVectorXd mean = state.mean.transpose();
  const Eigen::RowVectorXd denom = state.var.transpose().array().sqrt().max(1e-8).matrix();
  return ((obs_rows.rowwise() - mean).array().rowwise() / denom.array()).matrix();
}

}  // namespace evorl
