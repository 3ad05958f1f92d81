#include "evorl/env.hpp"

#include <cmath>

namespace evorl {

namespace {

// CartPole constants (classic control conventions).
constexpr double kGravity = 9.8;
constexpr double kCartMass = 1.0;
constexpr double kPoleMass = 0.1;
constexpr double kTotalMass = kCartMass + kPoleMass;
constexpr double kPoleHalfLength = 0.5;
constexpr double kPoleMassLength = kPoleMass * kPoleHalfLength;
constexpr double kForceMag = 10.0;
constexpr double kCartDt = 0.02;
constexpr double kXLimit = 2.4;
constexpr double kThetaLimit = 12.0 * M_PI / 180.0;

// Pendulum constants.
constexpr double kPenG = 10.0;
constexpr double kPenDt = 0.05;
constexpr double kMaxSpeed = 8.0;
constexpr double kMaxTorque = 2.0;

// Wraps into (-pi, pi].
double wrap_angle(double th) {
  double w = std::fmod(th + M_PI, 2.0 * M_PI);
  if (w <= 0.0) w += 2.0 * M_PI;
  return w - M_PI;
}

void check_finite(const EnvSpec& spec, const EnvState& state, const double* action) {
  const int nphys = spec.id == EnvId::CartPole ? 4 : 2;
  for (int i = 0; i < nphys; ++i)
    if (!std::isfinite(state.phys[i]))
      throw EnvFault("env_step: non-finite state value (numeric divergence)");
  for (int i = 0; i < spec.act_dim; ++i)
    if (!std::isfinite(action[i]))
      throw EnvFault("env_step: non-finite action value (numeric divergence)");
}

}  // namespace

void pendulum_physics(double& th, double& thdot, double torque, double dt) {
  // th'' = (3g/2l) sin th + (3/ml^2) u with g=10, m=l=1; semi-implicit Euler.
  thdot += (1.5 * kPenG * std::sin(th) + 3.0 * torque) * dt;
  thdot = std::clamp(thdot, -kMaxSpeed, kMaxSpeed);
  th += thdot * dt;
}

EnvSpec EnvSpec::cartpole(bool fixed_horizon, int max_episode_steps) {
  EnvSpec s;
  s.id = EnvId::CartPole;
  s.obs_dim = 4;
  s.discrete = true;
  s.num_actions = 2;
  s.act_dim = 1;
  s.max_episode_steps = max_episode_steps;
  s.fixed_horizon = fixed_horizon;
  return s;
}

EnvSpec EnvSpec::pendulum(bool fixed_horizon, int max_episode_steps) {
  EnvSpec s;
  s.id = EnvId::Pendulum;
  s.obs_dim = 3;
  s.discrete = false;
  s.num_actions = 0;
  s.act_dim = 1;
  s.act_low = -kMaxTorque;
  s.act_high = kMaxTorque;
  s.max_episode_steps = max_episode_steps;
  s.fixed_horizon = fixed_horizon;
  return s;
}

EnvSpec EnvSpec::by_name(std::string_view name, bool fixed_horizon, int max_episode_steps) {
  if (name == "cartpole")
    return cartpole(fixed_horizon, max_episode_steps > 0 ? max_episode_steps : 500);
  if (name == "pendulum")
    return pendulum(fixed_horizon, max_episode_steps > 0 ? max_episode_steps : 200);
  throw std::invalid_argument("unknown env id: " + std::string(name));
}

Obs observe(const EnvSpec& spec, const EnvState& state) {
  Obs obs(spec.obs_dim);
  if (spec.id == EnvId::CartPole) {
    for (int i = 0; i < 4; ++i) obs[i] = state.phys[i];
  } else {
    obs[0] = std::cos(state.phys[0]);
    obs[1] = std::sin(state.phys[0]);
    obs[2] = state.phys[1];
  }
  return obs;
}

std::pair<EnvState, Obs> env_reset(const EnvSpec& spec, RngKey key) {
  RandomStream stream(fold_in(key, 0));
  EnvState state;
  if (spec.id == EnvId::CartPole) {
    for (int i = 0; i < 4; ++i) state.phys[i] = stream.uniform(-0.05, 0.05);
  } else {
    state.phys[0] = stream.uniform(-M_PI, M_PI);
    state.phys[1] = stream.uniform(-1.0, 1.0);
  }
  state.step_count = 0;
  state.rng = fold_in(key, 1);
  return {state, observe(spec, state)};
}

std::pair<EnvState, StepResult> env_step(const EnvSpec& spec, const EnvState& state,
                                         const double* action) {
  check_finite(spec, state, action);
  EnvState next = state;
  StepResult result;

  if (spec.id == EnvId::CartPole) {
    const double force = action[0] > 0.5 ? kForceMag : -kForceMag;
    const double x = state.phys[0], xdot = state.phys[1];
    const double th = state.phys[2], thdot = state.phys[3];
    const double costh = std::cos(th), sinth = std::sin(th);
    const double temp = (force + kPoleMassLength * thdot * thdot * sinth) / kTotalMass;
    const double thacc = (kGravity * sinth - costh * temp) /
                         (kPoleHalfLength * (4.0 / 3.0 - kPoleMass * costh * costh / kTotalMass));
    const double xacc = temp - kPoleMassLength * thacc * costh / kTotalMass;
    next.phys[0] = x + kCartDt * xdot;
    next.phys[1] = xdot + kCartDt * xacc;
    next.phys[2] = th + kCartDt * thdot;
    next.phys[3] = thdot + kCartDt * thacc;
    result.reward = 1.0;
    if (!spec.fixed_horizon)
      result.terminated =
          std::abs(next.phys[0]) > kXLimit || std::abs(next.phys[2]) > kThetaLimit;
  } else {
    const double u = std::clamp(action[0], -kMaxTorque, kMaxTorque);
    const double th = state.phys[0], thdot = state.phys[1];
    const double w = wrap_angle(th);
    result.reward = -(w * w + 0.1 * thdot * thdot + 0.001 * u * u);
    next.phys[0] = th;
    next.phys[1] = thdot;
    pendulum_physics(next.phys[0], next.phys[1], u, kPenDt);
  }

  next.step_count = state.step_count + 1;
  result.truncated = next.step_count >= spec.max_episode_steps && !result.terminated;
  result.obs = observe(spec, next);
  result.final_obs = result.obs;

  for (int i = 0; i < (spec.id == EnvId::CartPole ? 4 : 2); ++i)
    if (!std::isfinite(next.phys[i]))
      throw EnvFault("env_step: non-finite successor state (numeric divergence)");
  return {next, result};
}

std::vector<StepResult> batched_step(const EnvSpec& spec, std::vector<EnvState>& states,
                                     const Eigen::MatrixXd& actions) {
  std::vector<StepResult> results(states.size());
  for (std::size_t i = 0; i < states.size(); ++i) {
    try {
      auto [next, result] = env_step(spec, states[i], actions.col(static_cast<int>(i)).data());
      if (result.terminated || result.truncated) {
        auto [fresh, obs] = env_reset(spec, next.rng);
        next = fresh;
        result.obs = std::move(obs);
      }
      states[i] = next;
      results[i] = std::move(result);
    } catch (const EnvFault& e) {
      throw EnvFault(std::string(e.what()) + " [lane " + std::to_string(i) + "]");
    }
  }
  return results;
}

}  // namespace evorl
