#pragma once

#include <cstdint>

#include "evorl/net.hpp"
#include "evorl/optim.hpp"
#include "evorl/replay_buffer.hpp"
#include "evorl/rng.hpp"

namespace evorl {

struct Td3Hyper {
  double gamma = 0.99;
  double tau = 0.005;
  double policy_noise = 0.2;  // std of target-action smoothing noise
  double noise_clip = 0.5;
  double exploration_noise = 0.1;
  int actor_update_interval = 2;
  int batch_size = 256;
  double lr = 3e-4;
  double act_low = -1.0;
  double act_high = 1.0;
};

// Critic nets score (obs ++ action) rows with a Linear head; twin critics share
// the spec but never the parameters. Targets start equal to their online nets.
struct Td3Agent {
  MlpSpec actor_spec, critic_spec;
  ParamVector actor, critic1, critic2;
  ParamVector target_actor, target_critic1, target_critic2;
  AdamState actor_adam, critic1_adam, critic2_adam;
  std::int64_t update_count = 0;  // critic updates applied so far
};

Td3Agent td3_init(const MlpSpec& actor_spec, const MlpSpec& critic_spec, RngKey key);

// y = r + gamma*(1-terminated)*min(Qt1, Qt2)(s', clip(target_actor(s') + noise)),
// noise = clip(policy_noise*N(0,1), +-noise_clip) drawn row-major from stream.
Vec td3_targets(const Td3Agent& agent, const SampleBatch& mb, const Td3Hyper& hp,
                RandomStream& stream);

// mean((q1-y)^2) + mean((q2-y)^2); fills d(loss)/d(params) when grads non-null.
double td3_critic_loss(const MlpSpec& critic_spec, const ParamVector& c1, const ParamVector& c2,
                       const Mat& obs_act, const Vec& y, ParamVector* g1, ParamVector* g2);

// -mean(Q1(s, actor(s))): the actor gradient flows through the frozen critic.
double td3_actor_loss(const MlpSpec& actor_spec, const MlpSpec& critic_spec,
                      const ParamVector& actor, const ParamVector& critic1, const Mat& obs,
                      ParamVector* actor_grad);

// target = tau*online + (1-tau)*target
void soft_update(ParamVector& target, const ParamVector& online, double tau);

struct Td3UpdateStats {
  double critic_loss = 0.0;
  double actor_loss = 0.0;
  double q_mean = 0.0;
  bool actor_updated = false;
};

// One critic update on a uniform minibatch; the actor and every target net
// update each hp.actor_update_interval-th call.
Td3UpdateStats td3_update(Td3Agent& agent, const ReplayBuffer& buffer, const Td3Hyper& hp,
                          RngKey key);

}  // namespace evorl
