#include <algorithm>
#include <numeric>
#include <string>
#include <vector>

#include "evorl/ec.hpp"
#include "evorl/td3.hpp"
#include "workflow_internal.hpp"

namespace evorl {

namespace {

struct ErlState final : WorkflowState {
  std::vector<ParamVector> pop;  // slot 0 holds the elite of the last ranking
  Td3Agent rl;
  ReplayBuffer buffer;

  std::unique_ptr<WorkflowState> clone() const override {
    return std::make_unique<ErlState>(*this);
  }
};

class ErlWorkflow final : public Workflow {
 public:
  explicit ErlWorkflow(const Config& cfg)
      : env_(env_from_config(cfg)),
        pop_(static_cast<int>(cfg.get_int("erl.pop"))),
        elites_(static_cast<int>(cfg.get_int("erl.elites"))),
        tournament_k_(static_cast<int>(cfg.get_int("erl.tournament_k"))),
        mutation_prob_(cfg.get_double("erl.mutation_prob")),
        mutation_std_(cfg.get_double("erl.mutation_std")),
        fitness_episodes_(static_cast<int>(cfg.get_int("erl.fitness_episodes"))),
        warmup_iters_(cfg.get_int("erl.warmup_iters")),
        sync_period_(cfg.get_int("erl.sync_period")),
        aligned_(cfg.get_string("erl.rl_mode") == "aligned"),
        fixed_updates_(cfg.get_int("erl.fixed_updates")),
        random_timesteps_(cfg.get_int("erl.random_timesteps")),
        buffer_capacity_(cfg.get_int("td3.buffer_capacity")) {
    if (env_.discrete) throw ConfigError("erl requires a continuous-action environment");
    if (resolve_obs_norm_mode(cfg, "erl") != ObsNormMode::None) {
      throw ConfigError("erl does not support observation normalization");
    }
    if (!aligned_ && cfg.get_string("erl.rl_mode") != "fixed") {
      throw ConfigError("erl.rl_mode must be 'aligned' or 'fixed'");
    }
    if (elites_ < 0 || elites_ >= pop_) throw ConfigError("erl.elites must be in [0, pop)");
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
    hp_.actor_update_interval = static_cast<int>(cfg.get_int("erl.actor_update_interval"));
    hp_.batch_size = static_cast<int>(cfg.get_int("td3.batch_size"));
    hp_.lr = cfg.get_double("td3.lr");
    hp_.act_low = env_.act_low;
    hp_.act_high = env_.act_high;
  }

  std::string id() const override { return "erl"; }

  std::unique_ptr<WorkflowState> init(RngKey key, ExecContext&) const override {
    auto st = std::make_unique<ErlState>();
    st->rng = key;
    st->rl = td3_init(actor_spec_, critic_spec_, init_key(key, 0));
    st->buffer = ReplayBuffer(buffer_capacity_, env_.obs_dim, env_.act_dim);
    if (random_timesteps_ > 0) {
      PolicyRef policy;
      policy.mode = ActionMode::UniformRandom;
      RolloutOptions opts;
      opts.collect_transitions = true;
      const AgentRollout r =
          rollout_lane(env_, policy, nullptr, RolloutMode::steps(static_cast<int>(random_timesteps_)),
                       0, init_key(key, 1), opts);
      st->buffer.add(r.batch);
      st->env_steps += r.steps;
      st->episodes += static_cast<std::int64_t>(r.episode_returns.size());
    }
    st->pop.resize(static_cast<std::size_t>(pop_));
    for (int i = 0; i < pop_; ++i) {
      st->pop[static_cast<std::size_t>(i)] =
          init_params(actor_spec_, init_key(key, 2 + static_cast<std::uint64_t>(i)));
    }
    return st;
  }

  StepMetrics step(WorkflowState& state, ExecContext& ctx) const override {
    auto& st = static_cast<ErlState&>(state);
    const RngKey k = st.step_key();
    const bool warmup = st.iteration < warmup_iters_;

    // (1) population fitness; every trajectory feeds the shared buffer.
    std::vector<const ParamVector*> agents(st.pop.size());
    for (std::size_t i = 0; i < st.pop.size(); ++i) agents[i] = &st.pop[i];
    PolicyRef policy;
    policy.spec = &actor_spec_;
    policy.mode = ActionMode::Deterministic;
    RolloutOptions opts;
    opts.collect_transitions = true;
    const std::vector<AgentRollout> rollouts =
        batched_rollout(*ctx.pool, env_, policy, agents, fitness_episodes_,
                        RolloutMode::episodes(fitness_episodes_), fold_in(k, 0), opts);

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

    // (2) elitism + tournament/crossover/mutation; offspring fill slots by rank.
    std::vector<int> order(static_cast<std::size_t>(pop_));
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](int a, int b) { return fitness[a] > fitness[b]; });
    RandomStream gen_stream(fold_in(k, 1));
    std::vector<ParamVector> next(static_cast<std::size_t>(pop_));
    for (int i = 0; i < elites_; ++i) {
      next[static_cast<std::size_t>(i)] = st.pop[static_cast<std::size_t>(order[static_cast<std::size_t>(i)])];
    }
    for (int i = elites_; i < pop_; ++i) {
      const int pa = tournament_select(fitness, gen_stream, tournament_k_);
      const int pb = tournament_select(fitness, gen_stream, tournament_k_);
      Vec child = uniform_crossover(st.pop[static_cast<std::size_t>(pa)],
                                    st.pop[static_cast<std::size_t>(pb)], gen_stream);
      next[static_cast<std::size_t>(i)] = gaussian_mutate(child, gen_stream, mutation_std_, mutation_prob_);
    }
    st.pop = std::move(next);

    // (3) TD3 updates; U follows the configured accounting mode.
    std::int64_t updates = 0;
    double critic_loss = 0.0, q_mean = 0.0;
    if (!warmup) {
      const std::int64_t u_target = aligned_ ? ts : fixed_updates_;
      if (st.buffer.size() >= hp_.batch_size) {
        for (std::int64_t u = 0; u < u_target; ++u) {
          const Td3UpdateStats s =
              td3_update(st.rl, st.buffer, hp_, fold_in(fold_in(k, 2), static_cast<std::uint64_t>(u)));
          critic_loss += s.critic_loss;
          q_mean += s.q_mean;
          updates += 1;
        }
        st.rl_updates += updates;
      }
    }

    // (4) the RL actor displaces the lowest-ranked slot.
    bool synced = false;
    if (!warmup && sync_period_ > 0 && (st.iteration + 1) % sync_period_ == 0) {
      st.pop[static_cast<std::size_t>(pop_ - 1)] = st.rl.actor;
      synced = true;
    }
    st.iteration += 1;

    StepMetrics m;
    m.add("fitness/mean", fitness.mean());
    m.add("fitness/max", fitness.maxCoeff());
    m.add("fitness/min", fitness.minCoeff());
    m.add("erl/updates", static_cast<double>(updates));
    m.add("erl/synced", synced ? 1.0 : 0.0);
    m.add("buffer/size", static_cast<double>(st.buffer.size()));
    if (updates > 0) {
      m.add("td3/critic_loss", critic_loss / static_cast<double>(updates));
      m.add("td3/q_mean", q_mean / static_cast<double>(updates));
    }
    return m;
  }

  EvalReport evaluate(const WorkflowState& state, int episodes, RngKey key,
                      ExecContext& ctx) const override {
    const auto& st = static_cast<const ErlState&>(state);
    const ObsNormState none = ObsNormState::none();
    return eval_params(*ctx.pool, env_, actor_spec_, {&st.pop[0]}, &none, episodes, key);
  }

  void save(const WorkflowState& state, SegmentWriter& w, const std::string& p) const override {
    const auto& st = static_cast<const ErlState&>(state);
    st.save_base(w, p);
    Mat pop(pop_, st.pop[0].size());
    for (int i = 0; i < pop_; ++i) pop.row(i) = st.pop[static_cast<std::size_t>(i)];
    w.put(p + "pop", pop);
    w.put(p + "rl/actor", st.rl.actor);
    w.put(p + "rl/critic1", st.rl.critic1);
    w.put(p + "rl/critic2", st.rl.critic2);
    w.put(p + "rl/target_actor", st.rl.target_actor);
    w.put(p + "rl/target_critic1", st.rl.target_critic1);
    w.put(p + "rl/target_critic2", st.rl.target_critic2);
    save_adam(w, p + "rl/actor_adam/", st.rl.actor_adam);
    save_adam(w, p + "rl/critic1_adam/", st.rl.critic1_adam);
    save_adam(w, p + "rl/critic2_adam/", st.rl.critic2_adam);
    w.put(p + "rl/update_count", st.rl.update_count);
    save_buffer(w, p + "buffer/", st.buffer);
  }

  std::unique_ptr<WorkflowState> load(const SegmentReader& r, const std::string& p) const override {
    auto st = std::make_unique<ErlState>();
    st->load_base(r, p);
    const int d = param_count(actor_spec_);
    const Mat pop = r.get_mat(p + "pop", pop_, d);
    st->pop.resize(static_cast<std::size_t>(pop_));
    for (int i = 0; i < pop_; ++i) st->pop[static_cast<std::size_t>(i)] = pop.row(i);
    st->rl.actor_spec = actor_spec_;
    st->rl.critic_spec = critic_spec_;
    st->rl.actor = r.get_vec(p + "rl/actor");
    st->rl.critic1 = r.get_vec(p + "rl/critic1");
    st->rl.critic2 = r.get_vec(p + "rl/critic2");
    st->rl.target_actor = r.get_vec(p + "rl/target_actor");
    st->rl.target_critic1 = r.get_vec(p + "rl/target_critic1");
    st->rl.target_critic2 = r.get_vec(p + "rl/target_critic2");
    st->rl.actor_adam = load_adam(r, p + "rl/actor_adam/");
    st->rl.critic1_adam = load_adam(r, p + "rl/critic1_adam/");
    st->rl.critic2_adam = load_adam(r, p + "rl/critic2_adam/");
    st->rl.update_count = r.get_i64(p + "rl/update_count");
    st->buffer = ReplayBuffer(buffer_capacity_, env_.obs_dim, env_.act_dim);
    load_buffer(r, p + "buffer/", st->buffer);
    return st;
  }

 private:
  EnvSpec env_;
  MlpSpec actor_spec_, critic_spec_;
  Td3Hyper hp_;
  int pop_;
  int elites_;
  int tournament_k_;
  double mutation_prob_;
  double mutation_std_;
  int fitness_episodes_;
  std::int64_t warmup_iters_;
  std::int64_t sync_period_;
  bool aligned_;
  std::int64_t fixed_updates_;
  std::int64_t random_timesteps_;
  std::int64_t buffer_capacity_;
};

}  // namespace

std::unique_ptr<Workflow> make_erl_workflow(const Config& cfg) {
  return std::make_unique<ErlWorkflow>(cfg);
}

}  // namespace evorl
