#pragma once

#include <cstdint>
#include <initializer_list>

#include "evorl/net.hpp"

namespace evorl {

struct AdamState {
  Vec m, v;
  std::int64_t t = 0;
  static AdamState zeros(Eigen::Index n) { return {Vec::Zero(n), Vec::Zero(n), 0}; }
};

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.0;  // decoupled: params -= lr * wd * params, outside the moments
};

// Standard bias-corrected Adam descent step; grad is d(loss)/d(params).
void adam_step(ParamVector& params, const ParamVector& grad, AdamState& state,
               const AdamConfig& cfg);

void sgd_step(ParamVector& params, const ParamVector& grad, double lr);

double global_grad_norm(std::initializer_list<const ParamVector*> grads);

// Scales all gradients by max_norm/norm when the joint norm exceeds max_norm.
// Returns the pre-clip norm.
double clip_global_grad_norm(std::initializer_list<ParamVector*> grads, double max_norm);

}  // namespace evorl
