#pragma once

#include <Eigen/Core>
#include <array>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "evorl/rng.hpp"

namespace evorl {

// Observation: small stack-allocated vector (max dim 4 across supported envs).
using Obs = Eigen::Matrix<double, Eigen::Dynamic, 1, Eigen::ColMajor, 4, 1>;

enum class EnvId { CartPole, Pendulum };

struct EnvFault : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct EnvSpec {
  EnvId id = EnvId::CartPole;
  int obs_dim = 4;
  bool discrete = true;   // discrete: num_actions; continuous: [act_low, act_high]^act_dim
  int num_actions = 2;
  int act_dim = 1;        // action entries per step in either case (discrete index stored as double)
  double act_low = 0.0;
  double act_high = 0.0;
  int max_episode_steps = 500;
  bool fixed_horizon = false;  // suppress termination; episodes end only at the horizon

  static EnvSpec cartpole(bool fixed_horizon = false, int max_episode_steps = 500);
  static EnvSpec pendulum(bool fixed_horizon = false, int max_episode_steps = 200);
  static EnvSpec by_name(std::string_view name, bool fixed_horizon = false,
                         int max_episode_steps = 0);  // 0 = env default
};

struct EnvState {
  std::array<double, 4> phys{};  // CartPole: x, xdot, th, thdot; Pendulum: th, thdot
  int step_count = 0;
  RngKey rng;  // fresh key owned by this episode, consumed by its auto-reset
};

struct StepResult {
  Obs obs;       // post-reset observation when the episode just ended (batched path)
  double reward = 0.0;
  bool terminated = false;
  bool truncated = false;
  Obs final_obs;  // true successor observation (pre-reset); equals obs mid-episode
};

Obs observe(const EnvSpec& spec, const EnvState& state);

// Draws initial conditions from fold_in(key, 0); the state keeps fold_in(key, 1)
// for its eventual auto-reset.
std::pair<EnvState, Obs> env_reset(const EnvSpec& spec, RngKey key);

// action points at spec.act_dim doubles. Continuous actions are clipped to
// bounds; discrete actions must already be a valid index.
std::pair<EnvState, StepResult> env_step(const EnvSpec& spec, const EnvState& state,
                                         const double* action);

// Element-wise env_step with auto-reset; finished lanes restart from their own
// state key. actions is act_dim x n (one column per lane).
std::vector<StepResult> batched_step(const EnvSpec& spec, std::vector<EnvState>& states,
                                     const Eigen::MatrixXd& actions);

// Exposed for the small-dt integration tests.
void pendulum_physics(double& th, double& thdot, double torque, double dt);

}  // namespace evorl
