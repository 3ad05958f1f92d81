#pragma once

#include "evorl/net.hpp"

namespace evorl {

// Streaming mean/variance accumulator (Welford with batch merge).
struct WelfordStats {
  double count = 0.0;
  Vec mean;  // empty until first add
  Vec m2;    // sum of squared deviations

  void add(const Eigen::Ref<const Vec>& row);
  void merge(const WelfordStats& other);
  Vec variance() const;  // population variance; zeros when count == 0
};

enum class ObsNormMode { None, VBN, RunningStats };

// mean/var are the normalization statistics; VBN freezes them after fitting,
// RunningStats merges new batches between iterations.
struct ObsNormState {
  ObsNormMode mode = ObsNormMode::None;
  Vec mean, var;
  double count = 0.0;

  static ObsNormState none() { return {}; }
  static ObsNormState running_stats(int dim);
  static ObsNormState from_stats(ObsNormMode mode, const WelfordStats& stats);
};

// Merges batch statistics into a RunningStats state.
void rs_update(ObsNormState& state, const WelfordStats& batch);
void rs_update(ObsNormState& state, const Mat& obs_rows);

// (obs - mean) / max(sqrt(var), 1e-8); identity for mode None.
Vec normalize(const ObsNormState& state, const Eigen::Ref<const Vec>& obs);
Mat normalize_rows(const ObsNormState& state, const Mat& obs_rows);

}  // namespace evorl
