#include <algorithm>
#include <string>
#include <vector>

#include "evorl/td3.hpp"
#include "workflow_internal.hpp"

namespace evorl {

namespace {

struct Td3WfState final : WorkflowState {
  Td3Agent agent;
  ReplayBuffer buffer;
  EnvState env;  // single persistent lane
  double lane_return = 0.0;

  std::unique_ptr<WorkflowState> clone() const override {
    return std::make_unique<Td3WfState>(*this);
  }
};

class Td3Workflow final : public Workflow {
 public:
  explicit Td3Workflow(const Config& cfg)
      : env_(env_from_config(cfg)),
        buffer_capacity_(cfg.get_int("td3.buffer_capacity")),
        random_timesteps_(cfg.get_int("td3.random_timesteps")),
        rollout_steps_(static_cast<int>(cfg.get_int("td3.rollout_steps"))),
        updates_per_iter_(static_cast<int>(cfg.get_int("td3.updates_per_iter"))) {
    if (env_.discrete) throw ConfigError("td3 requires a continuous-action environment");
    if (resolve_obs_norm_mode(cfg, "td3") != ObsNormMode::None) {
      throw ConfigError("td3 does not support observation normalization");
    }
    const std::vector<int> hidden = cfg.get_int_list("net.hidden");
    const bool ln = cfg.get_bool("net.layer_norm");
    actor_spec_ = policy_net_spec(env_, hidden, ln);
    critic_spec_.input_dim = env_.obs_dim + env_.act_dim;
    critic_spec_.hidden = hidden;
    critic_spec_.layer_norm = ln;
    critic_spec_.head = Head::Linear;
    critic_spec_.output_dim = 1;

    hp_.gamma = cfg.get_double("rl.gamma");
    hp_.tau = cfg.get_double("td3.tau");
    hp_.policy_noise = cfg.get_double("td3.policy_noise");
    hp_.noise_clip = cfg.get_double("td3.noise_clip");
    hp_.exploration_noise = cfg.get_double("td3.exploration_noise");
    hp_.actor_update_interval = static_cast<int>(cfg.get_int("td3.actor_update_interval"));
    hp_.batch_size = static_cast<int>(cfg.get_int("td3.batch_size"));
    hp_.lr = cfg.get_double("td3.lr");
    hp_.act_low = env_.act_low;
    hp_.act_high = env_.act_high;
  }

  std::string id() const override { return "td3"; }

  std::unique_ptr<WorkflowState> init(RngKey key, ExecContext&) const override {
    auto st = std::make_unique<Td3WfState>();
    st->rng = key;
    st->agent = td3_init(actor_spec_, critic_spec_, init_key(key, 0));
    st->buffer = ReplayBuffer(buffer_capacity_, env_.obs_dim, env_.act_dim);
    st->env = env_reset(env_, init_key(key, 1)).first;
    return st;
  }

  StepMetrics step(WorkflowState& state, ExecContext&) const override {
    auto& st = static_cast<Td3WfState&>(state);
    const RngKey k = st.step_key();
    RandomStream act_stream(fold_in(k, 0));

    std::int64_t done_count = 0;
    double finished_return_sum = 0.0;
    std::vector<EnvState> lane{st.env};
    for (int t = 0; t < rollout_steps_; ++t) {
      const Obs obs = observe(env_, lane[0]);
      Vec a(env_.act_dim);
      if (st.env_steps + t < random_timesteps_) {
        for (int d = 0; d < env_.act_dim; ++d) a[d] = act_stream.uniform(env_.act_low, env_.act_high);
      } else {
        const Mat out = forward(actor_spec_, st.agent.actor, obs.transpose());
        for (int d = 0; d < env_.act_dim; ++d) {
          a[d] = std::clamp(out(0, d) + hp_.exploration_noise * act_stream.normal(), env_.act_low,
                            env_.act_high);
        }
      }
      const std::vector<StepResult> res = batched_step(env_, lane, a);
      const StepResult& sr = res[0];

      SampleBatch row;
      row.obs = obs.transpose();
      row.actions = a.transpose();
      row.rewards = Vec::Constant(1, sr.reward);
      row.terminated.assign(1, sr.terminated ? 1 : 0);
      row.truncated.assign(1, sr.truncated ? 1 : 0);
      row.next_obs = Mat(1, env_.obs_dim);
      row.next_obs.row(0) = sr.final_obs;
      st.buffer.add(row);

      st.lane_return += sr.reward;
      if (sr.terminated || sr.truncated) {
        done_count += 1;
        finished_return_sum += st.lane_return;
        st.lane_return = 0.0;
      }
    }
    st.env = lane[0];
    st.env_steps += rollout_steps_;
    st.episodes += done_count;

    double critic_loss = 0.0, actor_loss = 0.0, q_mean = 0.0;
    int updates_run = 0, actor_updates = 0;
    const bool warm = st.env_steps >= random_timesteps_ && st.buffer.size() >= hp_.batch_size;
    if (warm) {
      for (int u = 0; u < updates_per_iter_; ++u) {
        const Td3UpdateStats s =
            td3_update(st.agent, st.buffer, hp_, fold_in(fold_in(k, 1), static_cast<std::uint64_t>(u)));
        critic_loss += s.critic_loss;
        q_mean += s.q_mean;
        if (s.actor_updated) {
          actor_loss += s.actor_loss;
          actor_updates += 1;
        }
        updates_run += 1;
      }
      st.rl_updates += updates_run;
    }
    st.iteration += 1;

    StepMetrics m;
    m.add("buffer/size", static_cast<double>(st.buffer.size()));
    if (updates_run > 0) {
      m.add("td3/critic_loss", critic_loss / updates_run);
      m.add("td3/q_mean", q_mean / updates_run);
      if (actor_updates > 0) m.add("td3/actor_loss", actor_loss / actor_updates);
    }
    if (done_count > 0) {
      m.add("rollout/episode_return_mean", finished_return_sum / static_cast<double>(done_count));
      m.add("rollout/episodes", static_cast<double>(done_count));
    }
    return m;
  }

  EvalReport evaluate(const WorkflowState& state, int episodes, RngKey key,
                      ExecContext& ctx) const override {
    const auto& st = static_cast<const Td3WfState&>(state);
    const ObsNormState none = ObsNormState::none();
    return eval_params(*ctx.pool, env_, actor_spec_, {&st.agent.actor}, &none, episodes, key);
  }

  void save(const WorkflowState& state, SegmentWriter& w, const std::string& p) const override {
    const auto& st = static_cast<const Td3WfState&>(state);
    st.save_base(w, p);
    w.put(p + "actor", st.agent.actor);
    w.put(p + "critic1", st.agent.critic1);
    w.put(p + "critic2", st.agent.critic2);
    w.put(p + "target_actor", st.agent.target_actor);
    w.put(p + "target_critic1", st.agent.target_critic1);
    w.put(p + "target_critic2", st.agent.target_critic2);
    save_adam(w, p + "actor_adam/", st.agent.actor_adam);
    save_adam(w, p + "critic1_adam/", st.agent.critic1_adam);
    save_adam(w, p + "critic2_adam/", st.agent.critic2_adam);
    w.put(p + "update_count", st.agent.update_count);
    save_buffer(w, p + "buffer/", st.buffer);
    save_env_state(w, p + "env/", st.env);
    w.put(p + "lane_return", st.lane_return);
  }

  std::unique_ptr<WorkflowState> load(const SegmentReader& r, const std::string& p) const override {
    auto st = std::make_unique<Td3WfState>();
    st->load_base(r, p);
    st->agent.actor_spec = actor_spec_;
    st->agent.critic_spec = critic_spec_;
    st->agent.actor = r.get_vec(p + "actor");
    st->agent.critic1 = r.get_vec(p + "critic1");
    st->agent.critic2 = r.get_vec(p + "critic2");
    st->agent.target_actor = r.get_vec(p + "target_actor");
    st->agent.target_critic1 = r.get_vec(p + "target_critic1");
    st->agent.target_critic2 = r.get_vec(p + "target_critic2");
    st->agent.actor_adam = load_adam(r, p + "actor_adam/");
    st->agent.critic1_adam = load_adam(r, p + "critic1_adam/");
    st->agent.critic2_adam = load_adam(r, p + "critic2_adam/");
    st->agent.update_count = r.get_i64(p + "update_count");
    st->buffer = ReplayBuffer(buffer_capacity_, env_.obs_dim, env_.act_dim);
    load_buffer(r, p + "buffer/", st->buffer);
    st->env = load_env_state(r, p + "env/");
    st->lane_return = r.get_f64(p + "lane_return");
    return st;
  }

 private:
  EnvSpec env_;
  MlpSpec actor_spec_, critic_spec_;
  Td3Hyper hp_;
  std::int64_t buffer_capacity_;
  std::int64_t random_timesteps_;
  int rollout_steps_;
  int updates_per_iter_;
};

}  // namespace

std::unique_ptr<Workflow> make_td3_workflow(const Config& cfg) {
  return std::make_unique<Td3Workflow>(cfg);
}

}  // namespace evorl
