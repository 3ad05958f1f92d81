#include "evorl/td3.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace evorl {

Td3Agent td3_init(const MlpSpec& actor_spec, const MlpSpec& critic_spec, RngKey key) {
  Td3Agent a;
  a.actor_spec = actor_spec;
  a.critic_spec = critic_spec;
  a.actor = init_params(actor_spec, fold_in(key, 0));
  a.critic1 = init_params(critic_spec, fold_in(key, 1));
  a.critic2 = init_params(critic_spec, fold_in(key, 2));
  a.target_actor = a.actor;
  a.target_critic1 = a.critic1;
  a.target_critic2 = a.critic2;
  a.actor_adam = AdamState::zeros(a.actor.size());
  a.critic1_adam = AdamState::zeros(a.critic1.size());
  a.critic2_adam = AdamState::zeros(a.critic2.size());
  return a;
}

Vec td3_targets(const Td3Agent& agent, const SampleBatch& mb, const Td3Hyper& hp,
                RandomStream& stream) {
  const Eigen::Index m = mb.size();
  Mat next_act = forward(agent.actor_spec, agent.target_actor, mb.next_obs);
  for (Eigen::Index i = 0; i < m; ++i) {
    for (Eigen::Index d = 0; d < next_act.cols(); ++d) {
      const double noise =
          std::clamp(hp.policy_noise * stream.normal(), -hp.noise_clip, hp.noise_clip);
      next_act(i, d) = std::clamp(next_act(i, d) + noise, hp.act_low, hp.act_high);
    }
  }
  Mat xa(m, mb.next_obs.cols() + next_act.cols());
  xa << mb.next_obs, next_act;
  const Vec q1 = forward(agent.critic_spec, agent.target_critic1, xa).col(0);
  const Vec q2 = forward(agent.critic_spec, agent.target_critic2, xa).col(0);
  Vec y(m);
  for (Eigen::Index i = 0; i < m; ++i) {
    const double mask = mb.terminated[static_cast<std::size_t>(i)] ? 0.0 : 1.0;
    y[i] = mb.rewards[i] + hp.gamma * mask * std::min(q1[i], q2[i]);
  }
  return y;
}

double td3_critic_loss(const MlpSpec& critic_spec, const ParamVector& c1, const ParamVector& c2,
                       const Mat& obs_act, const Vec& y, ParamVector* g1, ParamVector* g2) {
  const double m = static_cast<double>(obs_act.rows());
  double loss = 0.0;
  const ParamVector* params[2] = {&c1, &c2};
  ParamVector* grads[2] = {g1, g2};
  for (int k = 0; k < 2; ++k) {
    GradTape tape;
    const Vec q = forward(critic_spec, *params[k], obs_act, &tape).col(0);
    const Vec err = q - y;
    loss += err.squaredNorm() / m;
    if (grads[k]) {
      const Mat dq = (2.0 / m) * err;
      *grads[k] = backward(critic_spec, *params[k], tape, dq);
    }
  }
  return loss;
}

double td3_actor_loss(const MlpSpec& actor_spec, const MlpSpec& critic_spec,
                      const ParamVector& actor, const ParamVector& critic1, const Mat& obs,
                      ParamVector* actor_grad) {
  const Eigen::Index m = obs.rows();
  GradTape atape;
  const Mat act = forward(actor_spec, actor, obs, actor_grad ? &atape : nullptr);
  Mat xa(m, obs.cols() + act.cols());
  xa << obs, act;
  GradTape ctape;
  const Vec q = forward(critic_spec, critic1, xa, actor_grad ? &ctape : nullptr).col(0);
  const double loss = -q.mean();
  if (actor_grad) {
    const Mat dq = Mat::Constant(m, 1, -1.0 / static_cast<double>(m));
    Mat dxa;
    backward(critic_spec, critic1, ctape, dq, &dxa);
    const Mat dact = dxa.rightCols(act.cols());
    *actor_grad = backward(actor_spec, actor, atape, dact);
  }
  return loss;
}

void soft_update(ParamVector& target, const ParamVector& online, double tau) {
  target = tau * online + (1.0 - tau) * target;
}

Td3UpdateStats td3_update(Td3Agent& agent, const ReplayBuffer& buffer, const Td3Hyper& hp,
                          RngKey key) {
  if (buffer.size() <= 0) throw std::invalid_argument("td3_update: empty replay buffer");
  Td3UpdateStats st;
  RandomStream stream(key);
  const SampleBatch mb = buffer.sample(stream, hp.batch_size);
  const Vec y = td3_targets(agent, mb, hp, stream);

  Mat xa(mb.size(), mb.obs.cols() + mb.actions.cols());
  xa << mb.obs, mb.actions;
  ParamVector g1, g2;
  st.critic_loss = td3_critic_loss(agent.critic_spec, agent.critic1, agent.critic2, xa, y, &g1, &g2);
  st.q_mean = y.mean();
  adam_step(agent.critic1, g1, agent.critic1_adam, {.lr = hp.lr});
  adam_step(agent.critic2, g2, agent.critic2_adam, {.lr = hp.lr});
  agent.update_count += 1;

  if (agent.update_count % hp.actor_update_interval == 0) {
    ParamVector ag;
    st.actor_loss =
        td3_actor_loss(agent.actor_spec, agent.critic_spec, agent.actor, agent.critic1, mb.obs, &ag);
    adam_step(agent.actor, ag, agent.actor_adam, {.lr = hp.lr});
    soft_update(agent.target_actor, agent.actor, hp.tau);
    soft_update(agent.target_critic1, agent.critic1, hp.tau);
    soft_update(agent.target_critic2, agent.critic2, hp.tau);
    st.actor_updated = true;
  }
  return st;
}

}  // namespace evorl
