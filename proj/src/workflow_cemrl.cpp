#include <algorithm>
#include <numeric>
#include <string>
#include <vector>

#include "evorl/ec.hpp"
#include "evorl/td3.hpp"
#include "workflow_internal.hpp"

namespace evorl {

namespace {

struct CemrlState final : WorkflowState {
  CemState cem;
  ParamVector critic1, critic2, target_critic1, target_critic2;
  AdamState critic1_adam, critic2_adam;
  ReplayBuffer buffer;
  std::int64_t last_ts = 0;  // aligned mode: updates consume the previous iteration's sample count

  std::unique_ptr<WorkflowState> clone() const override {
    return std::make_unique<CemrlState>(*this);
  }
};

class CemrlWorkflow final : public Workflow {
 public:
  explicit CemrlWorkflow(const Config& cfg)
      : env_(env_from_config(cfg)),
        pop_(static_cast<int>(cfg.get_int("cemrl.pop"))),
        rl_agents_(static_cast<int>(cfg.get_int("cemrl.rl_agents"))),
        fitness_episodes_(static_cast<int>(cfg.get_int("cemrl.fitness_episodes"))),
        warmup_iters_(cfg.get_int("cemrl.warmup_iters")),
        random_timesteps_(cfg.get_int("cemrl.random_timesteps")),
        aligned_(cfg.get_string("cemrl.rl_mode") == "aligned"),
        fixed_updates_(cfg.get_int("cemrl.fixed_updates")),
        buffer_capacity_(cfg.get_int("td3.buffer_capacity")) {
    if (env_.discrete) throw ConfigError("cemrl requires a continuous-action environment");
    if (resolve_obs_norm_mode(cfg, "cemrl") != ObsNormMode::None) {
      throw ConfigError("cemrl does not support observation normalization");
    }
    if (!aligned_ && cfg.get_string("cemrl.rl_mode") != "fixed") {
      throw ConfigError("cemrl.rl_mode must be 'aligned' or 'fixed'");
    }
    if (rl_agents_ <= 0 || rl_agents_ > pop_) {
      throw ConfigError("cemrl.rl_agents must be in [1, pop]");
    }
    const std::vector<int> hidden = cfg.get_int_list("net.hidden");
    const bool ln = cfg.get_bool("net.layer_norm");
    actor_spec_ = policy_net_spec(env_, hidden, ln);
    critic_spec_.input_dim = env_.obs_dim + env_.act_dim;
    critic_spec_.hidden = hidden;
    critic_spec_.layer_norm = ln;
    critic_spec_.head = Head::Linear;
    critic_spec_.output_dim = 1;

    cem_cfg_ = {pop_,
                static_cast<int>(cfg.get_int("ec.cem.elites")),
                cfg.get_double("ec.cem.var_init"),
                cfg.get_double("ec.cem.noise_start"),
                cfg.get_double("ec.cem.noise_end"),
                cfg.get_int("ec.cem.decay_iters")};

    hp_.gamma = cfg.get_double("rl.gamma");
    hp_.tau = cfg.get_double("td3.tau");
    hp_.policy_noise = cfg.get_double("td3.policy_noise");
    hp_.noise_clip = cfg.get_double("td3.noise_clip");
    hp_.batch_size = static_cast<int>(cfg.get_int("td3.batch_size"));
    hp_.lr = cfg.get_double("td3.lr");
    hp_.act_low = env_.act_low;
    hp_.act_high = env_.act_high;
  }

  std::string id() const override { return "cemrl"; }

  std::unique_ptr<WorkflowState> init(RngKey key, ExecContext&) const override {
    auto st = std::make_unique<CemrlState>();
    st->rng = key;
    const RngKey ck = init_key(key, 0);
    st->critic1 = init_params(critic_spec_, fold_in(ck, 0));
    st->critic2 = init_params(critic_spec_, fold_in(ck, 1));
    st->target_critic1 = st->critic1;
    st->target_critic2 = st->critic2;
    st->critic1_adam = AdamState::zeros(st->critic1.size());
    st->critic2_adam = AdamState::zeros(st->critic2.size());
    st->buffer = ReplayBuffer(buffer_capacity_, env_.obs_dim, env_.act_dim);
    if (random_timesteps_ > 0) {
      PolicyRef policy;
      policy.mode = ActionMode::UniformRandom;
      RolloutOptions opts;
      opts.collect_transitions = true;
      const AgentRollout r = rollout_lane(
          env_, policy, nullptr, RolloutMode::steps(static_cast<int>(random_timesteps_)), 0,
          init_key(key, 1), opts);
      st->buffer.add(r.batch);
      st->env_steps += r.steps;
      st->episodes += static_cast<std::int64_t>(r.episode_returns.size());
    }
    st->cem = CemState::init(cem_cfg_, init_params(actor_spec_, init_key(key, 2)));
    return st;
  }

  StepMetrics step(WorkflowState& state, ExecContext& ctx) const override {
    auto& st = static_cast<CemrlState&>(state);
    const RngKey k = st.step_key();
    const bool warmup = st.iteration < warmup_iters_;

    Mat candidates = cem_ask(st.cem, fold_in(k, 0), pop_);

    // Half-selection: rl_agents_ distinct indices via partial Fisher-Yates.
    RandomStream pick_stream(fold_in(k, 1));
    std::vector<int> idx(static_cast<std::size_t>(pop_));
    std::iota(idx.begin(), idx.end(), 0);
    for (int i = 0; i < rl_agents_; ++i) {
      const int j = i + static_cast<int>(pick_stream.randint(static_cast<std::uint64_t>(pop_ - i)));
      std::swap(idx[static_cast<std::size_t>(i)], idx[static_cast<std::size_t>(j)]);
    }
    std::vector<int> chosen(idx.begin(), idx.begin() + rl_agents_);

    // Updates precede evaluation, so aligned mode consumes last_ts: the
    // timesteps the previous iteration's evaluation pushed into the buffer.
    std::int64_t updates = 0;
    double critic_loss = 0.0;
    const std::int64_t u_target = aligned_ ? st.last_ts : fixed_updates_;
    if (!warmup && st.buffer.size() >= hp_.batch_size && u_target > 0) {
      std::vector<ParamVector> actors(chosen.size());
      std::vector<ParamVector> targets(chosen.size());
      std::vector<AdamState> adams(chosen.size());
      for (std::size_t c = 0; c < chosen.size(); ++c) {
        actors[c] = candidates.row(chosen[c]);
        targets[c] = actors[c];
        adams[c] = AdamState::zeros(actors[c].size());  // newborn candidates: fresh moments
      }
      Td3Agent scratch;
      scratch.actor_spec = actor_spec_;
      scratch.critic_spec = critic_spec_;
      RandomStream upd_stream(fold_in(k, 2));
      ParamVector g1, g2, ga;
      for (std::int64_t u = 0; u < u_target; ++u) {
        const SampleBatch mb = st.buffer.sample(upd_stream, hp_.batch_size);
        const std::size_t tgt = static_cast<std::size_t>(u % rl_agents_);
        scratch.target_actor = targets[tgt];
        scratch.target_critic1 = st.target_critic1;
        scratch.target_critic2 = st.target_critic2;
        const Vec y = td3_targets(scratch, mb, hp_, upd_stream);
        Mat obs_act(mb.size(), env_.obs_dim + env_.act_dim);
        obs_act << mb.obs, mb.actions;
        critic_loss += td3_critic_loss(critic_spec_, st.critic1, st.critic2, obs_act, y, &g1, &g2);
        adam_step(st.critic1, g1, st.critic1_adam, {.lr = hp_.lr});
        adam_step(st.critic2, g2, st.critic2_adam, {.lr = hp_.lr});
        for (std::size_t c = 0; c < chosen.size(); ++c) {
          td3_actor_loss(actor_spec_, critic_spec_, actors[c], st.critic1, mb.obs, &ga);
          adam_step(actors[c], ga, adams[c], {.lr = hp_.lr});
        }
        soft_update(st.target_critic1, st.critic1, hp_.tau);
        soft_update(st.target_critic2, st.critic2, hp_.tau);
        for (std::size_t c = 0; c < chosen.size(); ++c) {
          soft_update(targets[c], actors[c], hp_.tau);
        }
        updates += 1;
      }
      for (std::size_t c = 0; c < chosen.size(); ++c) {
        candidates.row(chosen[c]) = actors[c];
      }
      st.rl_updates += updates;
    }

    // Fitness of all candidates (RL-updated ones included); trajectories feed the buffer.
    std::vector<ParamVector> members(static_cast<std::size_t>(pop_));
    std::vector<const ParamVector*> agents(static_cast<std::size_t>(pop_));
    for (int i = 0; i < pop_; ++i) {
      members[static_cast<std::size_t>(i)] = candidates.row(i);
      agents[static_cast<std::size_t>(i)] = &members[static_cast<std::size_t>(i)];
    }
    PolicyRef policy;
    policy.spec = &actor_spec_;
    policy.mode = ActionMode::Deterministic;
    RolloutOptions opts;
    opts.collect_transitions = true;
    const std::vector<AgentRollout> rollouts =
        batched_rollout(*ctx.pool, env_, policy, agents, fitness_episodes_,
                        RolloutMode::episodes(fitness_episodes_), fold_in(k, 3), opts);
    Vec fitness(pop_);
    std::int64_t ts = 0;
    for (int i = 0; i < pop_; ++i) {
      const AgentRollout& r = rollouts[static_cast<std::size_t>(i)];
      double sum = 0.0;
      for (const double ret : r.episode_returns) sum += ret;
      fitness[i] = sum / static_cast<double>(r.episode_returns.size());
      st.buffer.add(r.batch);
      ts += r.steps;
      st.episodes += static_cast<std::int64_t>(r.episode_returns.size());
    }
    st.env_steps += ts;
    st.last_ts = ts;

    cem_tell(st.cem, candidates, fitness);
    st.iteration += 1;

    StepMetrics m;
    m.add("fitness/mean", fitness.mean());
    m.add("fitness/max", fitness.maxCoeff());
    m.add("fitness/min", fitness.minCoeff());
    m.add("cemrl/updates", static_cast<double>(updates));
    m.add("cem/var_mean", st.cem.diag_var.mean());
    m.add("buffer/size", static_cast<double>(st.buffer.size()));
    if (updates > 0) m.add("td3/critic_loss", critic_loss / static_cast<double>(updates));
    return m;
  }

  EvalReport evaluate(const WorkflowState& state, int episodes, RngKey key,
                      ExecContext& ctx) const override {
    const auto& st = static_cast<const CemrlState&>(state);
    const ObsNormState none = ObsNormState::none();
    return eval_params(*ctx.pool, env_, actor_spec_, {&st.cem.mean}, &none, episodes, key);
  }

  void save(const WorkflowState& state, SegmentWriter& w, const std::string& p) const override {
    const auto& st = static_cast<const CemrlState&>(state);
    st.save_base(w, p);
    w.put(p + "cem/mean", st.cem.mean);
    w.put(p + "cem/var", st.cem.diag_var);
    w.put(p + "cem/iter", st.cem.iter);
    w.put(p + "critic1", st.critic1);
    w.put(p + "critic2", st.critic2);
    w.put(p + "target_critic1", st.target_critic1);
    w.put(p + "target_critic2", st.target_critic2);
    save_adam(w, p + "critic1_adam/", st.critic1_adam);
    save_adam(w, p + "critic2_adam/", st.critic2_adam);
    w.put(p + "last_ts", st.last_ts);
    save_buffer(w, p + "buffer/", st.buffer);
  }

  std::unique_ptr<WorkflowState> load(const SegmentReader& r, const std::string& p) const override {
    auto st = std::make_unique<CemrlState>();
    st->load_base(r, p);
    st->cem = CemState::init(cem_cfg_, r.get_vec(p + "cem/mean"));
    st->cem.diag_var = r.get_vec(p + "cem/var");
    st->cem.iter = r.get_i64(p + "cem/iter");
    st->critic1 = r.get_vec(p + "critic1");
    st->critic2 = r.get_vec(p + "critic2");
    st->target_critic1 = r.get_vec(p + "target_critic1");
    st->target_critic2 = r.get_vec(p + "target_critic2");
    st->critic1_adam = load_adam(r, p + "critic1_adam/");
    st->critic2_adam = load_adam(r, p + "critic2_adam/");
    st->last_ts = r.get_i64(p + "last_ts");
    st->buffer = ReplayBuffer(buffer_capacity_, env_.obs_dim, env_.act_dim);
    load_buffer(r, p + "buffer/", st->buffer);
    return st;
  }

 private:
  EnvSpec env_;
  MlpSpec actor_spec_, critic_spec_;
  CemConfig cem_cfg_;
  Td3Hyper hp_;
  int pop_;
  int rl_agents_;
  int fitness_episodes_;
  std::int64_t warmup_iters_;
  std::int64_t random_timesteps_;
  bool aligned_;
  std::int64_t fixed_updates_;
  std::int64_t buffer_capacity_;
};

}  // namespace

std::unique_ptr<Workflow> make_cemrl_workflow(const Config& cfg) {
  return std::make_unique<CemrlWorkflow>(cfg);
}

}  // namespace evorl
