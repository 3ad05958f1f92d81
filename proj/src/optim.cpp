#include "evorl/optim.hpp"

#include <cmath>

namespace evorl {

void adam_step(ParamVector& params, const ParamVector& grad, AdamState& state,
               const AdamConfig& cfg) {
  state.t += 1;
  state.m = cfg.beta1 * state.m + (1.0 - cfg.beta1) * grad;
  state.v = (cfg.beta2 * state.v.array() + (1.0 - cfg.beta2) * grad.array().square()).matrix();
  const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.t));
  const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.t));
  params.array() -=
      cfg.lr * (state.m.array() / bc1) / ((state.v.array() / bc2).sqrt() + cfg.eps);
  if (cfg.weight_decay != 0.0) params -= cfg.lr * cfg.weight_decay * params;
}

void sgd_step(ParamVector& params, const ParamVector& grad, double lr) {
  params -= lr * grad;
}

double global_grad_norm(std::initializer_list<const ParamVector*> grads) {
  double sq = 0.0;
  for (const auto* g : grads) sq += g->squaredNorm();
  return std::sqrt(sq);
}

double clip_global_grad_norm(std::initializer_list<ParamVector*> grads, double max_norm) {
  double sq = 0.0;
  for (auto* g : grads) sq += g->squaredNorm();
  const double norm = std::sqrt(sq);
  if (norm > max_norm && norm > 0.0) {
    const double scale = max_norm / norm;
    for (auto* g : grads) *g *= scale;
  }
  return norm;
}

}  // namespace evorl
