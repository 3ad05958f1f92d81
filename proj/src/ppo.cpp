#include "evorl/ppo.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

namespace evorl {

PpoAgent ppo_init(const MlpSpec& actor_spec, const MlpSpec& critic_spec, RngKey key) {
  PpoAgent a;
  a.actor_spec = actor_spec;
  a.critic_spec = critic_spec;
  a.actor = init_params(actor_spec, fold_in(key, 0));
  a.critic = init_params(critic_spec, fold_in(key, 1));
  a.actor_adam = AdamState::zeros(a.actor.size());
  a.critic_adam = AdamState::zeros(a.critic.size());
  return a;
}

PpoLoss ppo_loss(const PpoAgent& agent, const SampleBatch& mb, const PpoHyper& hp) {
  const Eigen::Index m = mb.size();
  const double wa = hp.actor_weight, wc = hp.critic_weight, we = hp.entropy_weight;
  PpoLoss out;

  GradTape atape;
  const Mat pol = forward(agent.actor_spec, agent.actor, mb.obs, &atape);
  Mat dpol = Mat::Zero(pol.rows(), pol.cols());

  double sur_sum = 0.0, ent_sum = 0.0;
  if (agent.actor_spec.head == Head::Categorical) {
    for (Eigen::Index i = 0; i < m; ++i) {
      const Eigen::Index ai = static_cast<Eigen::Index>(mb.actions(i, 0));
      const double mx = pol.row(i).maxCoeff();
      const Eigen::ArrayXd lsm =
          pol.row(i).transpose().array() - mx - std::log((pol.row(i).array() - mx).exp().sum());
      const Eigen::ArrayXd p = lsm.exp();
      const double ratio = std::exp(lsm[ai] - mb.logp[i]);
      const double adv = mb.advantages[i];
      const double s1 = ratio * adv;
      const double s2 = std::clamp(ratio, 1.0 - hp.clip_eps, 1.0 + hp.clip_eps) * adv;
      sur_sum += std::min(s1, s2);
      const double ent = -(p * lsm).sum();
      ent_sum += ent;
      // d(total)/d(logits): surrogate routes through the unclipped branch only
      // (ties resolve to it); entropy term: dH/dz_j = -p_j (lsm_j + H).
      const double s = s1 <= s2 ? -(wa / m) * adv * ratio : 0.0;
      dpol.row(i) = (-s * p - (we / m) * p * (lsm + ent)).matrix().transpose();
      dpol(i, ai) += s;
    }
    out.actor_grad = backward(agent.actor_spec, agent.actor, atape, dpol);
  } else {  // Gaussian head
    const ParamLayout lay = param_layout(agent.actor_spec);
    const ParamSegment& lseg =
        lay.find(static_cast<int>(agent.actor_spec.hidden.size()) + 1, "logstd");
    const Vec raw = segment_vec(agent.actor, lseg);
    const Vec logstd = gaussian_logstd(agent.actor_spec, agent.actor);
    const Vec inv_var = (-2.0 * logstd.array()).exp();
    Vec dlogstd = Vec::Zero(lseg.rows);
    const double half_log_2pi = 0.5 * std::log(2.0 * 3.14159265358979323846);
    for (Eigen::Index i = 0; i < m; ++i) {
      const Vec diff = mb.actions.row(i).transpose() - pol.row(i).transpose();
      const double lp =
          (-0.5 * diff.array().square() * inv_var.array() - logstd.array() - half_log_2pi).sum();
      const double ratio = std::exp(lp - mb.logp[i]);
      const double adv = mb.advantages[i];
      const double s1 = ratio * adv;
      const double s2 = std::clamp(ratio, 1.0 - hp.clip_eps, 1.0 + hp.clip_eps) * adv;
      sur_sum += std::min(s1, s2);
      ent_sum += (logstd.array() + half_log_2pi + 0.5).sum();
      const double s = s1 <= s2 ? -(wa / m) * adv * ratio : 0.0;
      dpol.row(i) = (s * diff.array() * inv_var.array()).matrix().transpose();
      dlogstd += (s * (diff.array().square() * inv_var.array() - 1.0)).matrix();
    }
    dlogstd.array() += we;  // entropy: dH/dlogstd = 1 per dimension per row, meaned
    // Route through the clamp: zero where the raw parameter sits outside the band.
    for (Eigen::Index d = 0; d < dlogstd.size(); ++d)
      if (raw[d] <= agent.actor_spec.min_logstd || raw[d] >= agent.actor_spec.max_logstd)
        dlogstd[d] = 0.0;
    out.actor_grad = backward(agent.actor_spec, agent.actor, atape, dpol);
    segment_vec(out.actor_grad, lseg) = dlogstd;
  }

  out.actor = -sur_sum / static_cast<double>(m);
  out.entropy = ent_sum / static_cast<double>(m);

  GradTape ctape;
  const Mat v = forward(agent.critic_spec, agent.critic, mb.obs, &ctape);
  const Vec err = v.col(0) - mb.returns;
  out.critic = 0.5 * err.squaredNorm() / static_cast<double>(m);
  const Mat dv = (wc / static_cast<double>(m)) * err;
  out.critic_grad = backward(agent.critic_spec, agent.critic, ctape, dv);

  out.total = wa * out.actor + wc * out.critic + we * out.entropy;
  return out;
}

namespace {

SampleBatch gather_rows(const SampleBatch& b, const std::vector<Eigen::Index>& idx,
                        std::size_t lo, std::size_t hi) {
  const Eigen::Index n = static_cast<Eigen::Index>(hi - lo);
  SampleBatch mb;
  mb.obs.resize(n, b.obs.cols());
  mb.actions.resize(n, b.actions.cols());
  mb.logp.resize(n);
  mb.advantages.resize(n);
  mb.returns.resize(n);
  mb.rewards.resize(n);
  for (Eigen::Index r = 0; r < n; ++r) {
    const Eigen::Index src = idx[lo + static_cast<std::size_t>(r)];
    mb.obs.row(r) = b.obs.row(src);
    mb.actions.row(r) = b.actions.row(src);
    mb.logp[r] = b.logp[src];
    mb.advantages[r] = b.advantages[src];
    mb.returns[r] = b.returns[src];
    mb.rewards[r] = b.rewards[src];
  }
  return mb;
}

}  // namespace

PpoUpdateStats ppo_update(PpoAgent& agent, SampleBatch batch, const PpoHyper& hp, RngKey key) {
  PpoUpdateStats st;
  const Eigen::Index n = batch.size();
  if (n == 0) return st;

  const double mean = batch.advantages.mean();
  const double var = (batch.advantages.array() - mean).square().mean();
  batch.advantages = (batch.advantages.array() - mean) / (std::sqrt(var) + 1e-8);

  std::vector<Eigen::Index> perm(static_cast<std::size_t>(n));
  const std::size_t mb_size = static_cast<std::size_t>(std::max(1, hp.minibatch_size));
  for (int epoch = 0; epoch < hp.epochs; ++epoch) {
    for (Eigen::Index i = 0; i < n; ++i) perm[static_cast<std::size_t>(i)] = i;
    RandomStream stream(fold_in(key, static_cast<std::uint64_t>(epoch)));
    for (std::size_t i = perm.size() - 1; i > 0; --i)
      std::swap(perm[i], perm[stream.randint(i + 1)]);

    for (std::size_t lo = 0; lo < perm.size(); lo += mb_size) {
      const std::size_t hi = std::min(lo + mb_size, perm.size());
      const SampleBatch mb = gather_rows(batch, perm, lo, hi);
      PpoLoss loss = ppo_loss(agent, mb, hp);
      const double norm =
          clip_global_grad_norm({&loss.actor_grad, &loss.critic_grad}, hp.max_grad_norm);
      if (!std::isfinite(loss.total) || !std::isfinite(norm)) {
        st.aborted_non_finite = true;
        return st;
      }
      adam_step(agent.actor, loss.actor_grad, agent.actor_adam, {.lr = hp.lr});
      adam_step(agent.critic, loss.critic_grad, agent.critic_adam, {.lr = hp.lr});
      st.loss += loss.total;
      st.actor_loss += loss.actor;
      st.critic_loss += loss.critic;
      st.entropy += loss.entropy;
      st.grad_norm += norm;
      st.minibatches += 1;
    }
  }
  if (st.minibatches > 0) {
    st.loss /= st.minibatches;
    st.actor_loss /= st.minibatches;
    st.critic_loss /= st.minibatches;
    st.entropy /= st.minibatches;
    st.grad_norm /= st.minibatches;
  }
  return st;
}

}  // namespace evorl
