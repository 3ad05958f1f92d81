#include <cmath>
#include <string>
#include <vector>

#include "evorl/gae.hpp"
#include "evorl/ppo.hpp"
#include "workflow_internal.hpp"

namespace evorl {

namespace {

struct PpoWfState final : WorkflowState {
  PpoAgent agent;
  PpoHyper hp;
  std::vector<EnvState> envs;  // persistent lanes; episodes straddle iterations
  Vec lane_return;             // running return of each lane's open episode
  ObsNormState obs_norm;

  std::unique_ptr<WorkflowState> clone() const override {
    return std::make_unique<PpoWfState>(*this);
  }
};

class PpoWorkflow final : public Workflow {
 public:
  explicit PpoWorkflow(const Config& cfg)
      : env_(env_from_config(cfg)),
        num_envs_(static_cast<int>(cfg.get_int("ppo.num_envs"))),
        norm_mode_(resolve_obs_norm_mode(cfg, "ppo")),
        vbn_samples_(static_cast<int>(cfg.get_int("obs_norm.vbn_samples"))) {
    const std::vector<int> hidden = cfg.get_int_list("net.hidden");
    const bool ln = cfg.get_bool("net.layer_norm");
    actor_spec_.input_dim = env_.obs_dim;
    actor_spec_.hidden = hidden;
    actor_spec_.layer_norm = ln;
    if (env_.discrete) {
      actor_spec_.head = Head::Categorical;
      actor_spec_.output_dim = env_.num_actions;
    } else {
      actor_spec_.head = Head::Gaussian;
      actor_spec_.output_dim = env_.act_dim;
    }
    critic_spec_.input_dim = env_.obs_dim;
    critic_spec_.hidden = hidden;
    critic_spec_.layer_norm = ln;
    critic_spec_.head = Head::Linear;
    critic_spec_.output_dim = 1;

    const std::int64_t total = cfg.get_int("ppo.timesteps_per_iter");
    if (num_envs_ <= 0 || total % num_envs_ != 0) {
      throw ConfigError("ppo.timesteps_per_iter must be a positive multiple of ppo.num_envs");
    }
    steps_per_lane_ = static_cast<int>(total / num_envs_);

    hp0_.gamma = cfg.get_double("rl.gamma");
    hp0_.gae_lambda = cfg.get_double("ppo.gae_lambda");
    hp0_.clip_eps = cfg.get_double("ppo.clip_eps");
    hp0_.actor_weight = cfg.get_double("ppo.actor_weight");
    hp0_.critic_weight = cfg.get_double("ppo.critic_weight");
    hp0_.entropy_weight = cfg.get_double("ppo.entropy_weight");
    hp0_.lr = cfg.get_double("ppo.lr");
    hp0_.max_grad_norm = cfg.get_double("ppo.max_grad_norm");
    hp0_.epochs = static_cast<int>(cfg.get_int("ppo.epochs"));
    hp0_.minibatch_size = static_cast<int>(cfg.get_int("ppo.minibatch_size"));
  }

  std::string id() const override { return "ppo"; }

  std::unique_ptr<WorkflowState> init(RngKey key, ExecContext&) const override {
    auto st = std::make_unique<PpoWfState>();
    st->rng = key;
    st->agent = ppo_init(actor_spec_, critic_spec_, init_key(key, 0));
    st->hp = hp0_;
    if (norm_mode_ == ObsNormMode::VBN) {
      st->obs_norm = vbn_fit(env_, init_key(key, 1), vbn_samples_);
    } else if (norm_mode_ == ObsNormMode::RunningStats) {
      st->obs_norm = ObsNormState::running_stats(env_.obs_dim);
    } else {
      st->obs_norm = ObsNormState::none();
    }
    st->envs.resize(static_cast<std::size_t>(num_envs_));
    for (int j = 0; j < num_envs_; ++j) {
      st->envs[static_cast<std::size_t>(j)] =
          env_reset(env_, init_key(key, 2 + static_cast<std::uint64_t>(j))).first;
    }
    st->lane_return = Vec::Zero(num_envs_);
    return st;
  }

  StepMetrics step(WorkflowState& state, ExecContext&) const override {
    auto& st = static_cast<PpoWfState&>(state);
    const RngKey k = st.step_key();
    const int m = num_envs_;
    const int T = steps_per_lane_;
    const Eigen::Index rows = static_cast<Eigen::Index>(T) * m;

    std::vector<RandomStream> streams;
    streams.reserve(static_cast<std::size_t>(m));
    for (int j = 0; j < m; ++j) {
      streams.emplace_back(fold_in(fold_in(k, 0), static_cast<std::uint64_t>(j)));
    }

    SampleBatch b;
    b.obs.resize(rows, env_.obs_dim);  // normalized, as consumed by the update
    b.actions.resize(rows, env_.act_dim);
    b.rewards.resize(rows);
    b.terminated.assign(static_cast<std::size_t>(rows), 0);
    b.truncated.assign(static_cast<std::size_t>(rows), 0);
    b.next_obs.resize(rows, env_.obs_dim);  // normalized true successor
    b.logp.resize(rows);

    const Vec logstd =
        env_.discrete ? Vec() : gaussian_logstd(actor_spec_, st.agent.actor);

    const bool track_raw = norm_mode_ == ObsNormMode::RunningStats;
    Mat raw_obs;
    if (track_raw) raw_obs.resize(rows, env_.obs_dim);

    std::int64_t done_count = 0;
    double finished_return_sum = 0.0;
    // Lockstep collection; row j*T + t keeps each lane contiguous for GAE.
    for (int t = 0; t < T; ++t) {
      Mat cur(m, env_.obs_dim);
      for (int j = 0; j < m; ++j) cur.row(j) = observe(env_, st.envs[static_cast<std::size_t>(j)]);
      const Mat cur_n = normalize_rows(st.obs_norm, cur);
      if (track_raw) {
        for (int j = 0; j < m; ++j) raw_obs.row(static_cast<Eigen::Index>(j) * T + t) = cur.row(j);
      }
      const Mat out = forward(actor_spec_, st.agent.actor, cur_n);

      Mat actions(env_.act_dim, m);
      for (int j = 0; j < m; ++j) {
        double lp = 0.0;
        if (env_.discrete) {
          actions(0, j) = static_cast<double>(sample_categorical(out.row(j), streams[static_cast<std::size_t>(j)], lp));
        } else {
          actions.col(j) = sample_gaussian(out.row(j), logstd, streams[static_cast<std::size_t>(j)], lp);
        }
        b.logp[static_cast<Eigen::Index>(j) * T + t] = lp;
      }

      const std::vector<StepResult> res = batched_step(env_, st.envs, actions);
      for (int j = 0; j < m; ++j) {
        const Eigen::Index r = static_cast<Eigen::Index>(j) * T + t;
        const StepResult& sr = res[static_cast<std::size_t>(j)];
        b.obs.row(r) = cur_n.row(j);
        b.actions.row(r) = actions.col(j);
        b.rewards[r] = sr.reward;
        b.terminated[static_cast<std::size_t>(r)] = sr.terminated ? 1 : 0;
        b.truncated[static_cast<std::size_t>(r)] = sr.truncated ? 1 : 0;
        b.next_obs.row(r) = normalize(st.obs_norm, sr.final_obs);
        st.lane_return[j] += sr.reward;
        if (sr.terminated || sr.truncated) {
          done_count += 1;
          finished_return_sum += st.lane_return[j];
          st.lane_return[j] = 0.0;
        }
      }
    }

    // Critic on every collected obs; GAE runs per episode segment with the
    // segment's own successor value as bootstrap (gae masks terminations).
    const Vec values = forward(critic_spec_, st.agent.critic, b.obs).col(0);
    b.advantages.resize(rows);
    b.returns.resize(rows);
    for (int j = 0; j < m; ++j) {
      Eigen::Index seg = static_cast<Eigen::Index>(j) * T;
      const Eigen::Index lane_end = seg + T;
      while (seg < lane_end) {
        Eigen::Index end = seg;
        while (end < lane_end - 1 && !b.terminated[static_cast<std::size_t>(end)] &&
               !b.truncated[static_cast<std::size_t>(end)]) {
          ++end;
        }
        const Eigen::Index len = end - seg + 1;
        Vec seg_values(len + 1);
        seg_values.head(len) = values.segment(seg, len);
        seg_values[len] =
            forward(critic_spec_, st.agent.critic, b.next_obs.row(end))(0, 0);
        std::vector<std::uint8_t> terminals(b.terminated.begin() + seg,
                                            b.terminated.begin() + end + 1);
        Vec adv, ret;
        gae(b.rewards.segment(seg, len), seg_values, terminals, st.hp.gamma, st.hp.gae_lambda,
            adv, ret);
        b.advantages.segment(seg, len) = adv;
        b.returns.segment(seg, len) = ret;
        seg = end + 1;
      }
    }

    // Stats stay frozen within the iteration; they advance only once the
    // update batch has been built from the pre-iteration statistics.
    if (track_raw) rs_update(st.obs_norm, raw_obs);

    const PpoUpdateStats up = ppo_update(st.agent, std::move(b), st.hp, fold_in(k, 2));

    st.env_steps += rows;
    st.episodes += done_count;
    st.rl_updates += up.minibatches;
    st.iteration += 1;

    StepMetrics metrics;
    metrics.add("ppo/loss", up.loss);
    metrics.add("ppo/actor_loss", up.actor_loss);
    metrics.add("ppo/critic_loss", up.critic_loss);
    metrics.add("ppo/entropy", up.entropy);
    metrics.add("ppo/grad_norm", up.grad_norm);
    metrics.add("ppo/minibatches", static_cast<double>(up.minibatches));
    metrics.add("ppo/non_finite_abort", up.aborted_non_finite ? 1.0 : 0.0);
    if (done_count > 0) {
      metrics.add("rollout/episode_return_mean",
                  finished_return_sum / static_cast<double>(done_count));
      metrics.add("rollout/episodes", static_cast<double>(done_count));
    }
    return metrics;
  }

  EvalReport evaluate(const WorkflowState& state, int episodes, RngKey key,
                      ExecContext& ctx) const override {
    const auto& st = static_cast<const PpoWfState&>(state);
    return eval_params(*ctx.pool, env_, actor_spec_, {&st.agent.actor}, &st.obs_norm, episodes,
                       key);
  }

  std::vector<std::string> tunable_keys() const override {
    return {"actor_weight", "critic_weight", "entropy_weight",
            "gamma",        "gae_lambda",    "clip_eps",
            "lr"};
  }

  void set_hyper(WorkflowState& state, const std::string& key, double v) const override {
    *hyper_slot(static_cast<PpoWfState&>(state).hp, key) = v;
  }

  double get_hyper(const WorkflowState& state, const std::string& key) const override {
    return *hyper_slot(const_cast<PpoHyper&>(static_cast<const PpoWfState&>(state).hp), key);
  }

  void save(const WorkflowState& state, SegmentWriter& w, const std::string& p) const override {
    const auto& st = static_cast<const PpoWfState&>(state);
    st.save_base(w, p);
    w.put(p + "actor", st.agent.actor);
    w.put(p + "critic", st.agent.critic);
    save_adam(w, p + "actor_adam/", st.agent.actor_adam);
    save_adam(w, p + "critic_adam/", st.agent.critic_adam);
    save_obs_norm(w, p + "obs_norm/", st.obs_norm);
    w.put(p + "lane_return", st.lane_return);
    for (int j = 0; j < num_envs_; ++j) {
      save_env_state(w, p + "env" + std::to_string(j) + "/", st.envs[static_cast<std::size_t>(j)]);
    }
    Vec hp(7);
    hp << st.hp.actor_weight, st.hp.critic_weight, st.hp.entropy_weight, st.hp.gamma,
        st.hp.gae_lambda, st.hp.clip_eps, st.hp.lr;
    w.put(p + "hyper", hp);
  }

  std::unique_ptr<WorkflowState> load(const SegmentReader& r, const std::string& p) const override {
    auto st = std::make_unique<PpoWfState>();
    st->load_base(r, p);
    st->agent.actor_spec = actor_spec_;
    st->agent.critic_spec = critic_spec_;
    st->agent.actor = r.get_vec(p + "actor");
    st->agent.critic = r.get_vec(p + "critic");
    st->agent.actor_adam = load_adam(r, p + "actor_adam/");
    st->agent.critic_adam = load_adam(r, p + "critic_adam/");
    st->obs_norm = load_obs_norm(r, p + "obs_norm/");
    st->lane_return = r.get_vec(p + "lane_return");
    st->envs.resize(static_cast<std::size_t>(num_envs_));
    for (int j = 0; j < num_envs_; ++j) {
      st->envs[static_cast<std::size_t>(j)] = load_env_state(r, p + "env" + std::to_string(j) + "/");
    }
    const Vec hp = r.get_vec(p + "hyper");
    st->hp = hp0_;
    st->hp.actor_weight = hp[0];
    st->hp.critic_weight = hp[1];
    st->hp.entropy_weight = hp[2];
    st->hp.gamma = hp[3];
    st->hp.gae_lambda = hp[4];
    st->hp.clip_eps = hp[5];
    st->hp.lr = hp[6];
    return st;
  }

 private:
  static double* hyper_slot(PpoHyper& hp, const std::string& key) {
    if (key == "actor_weight") return &hp.actor_weight;
    if (key == "critic_weight") return &hp.critic_weight;
    if (key == "entropy_weight") return &hp.entropy_weight;
    if (key == "gamma") return &hp.gamma;
    if (key == "gae_lambda") return &hp.gae_lambda;
    if (key == "clip_eps") return &hp.clip_eps;
    if (key == "lr") return &hp.lr;
    throw std::invalid_argument("ppo: unknown tunable hyperparameter '" + key + "'");
  }

  EnvSpec env_;
  MlpSpec actor_spec_, critic_spec_;
  int num_envs_;
  int steps_per_lane_ = 0;
  ObsNormMode norm_mode_;
  int vbn_samples_;
  PpoHyper hp0_;
};

}  // namespace

std::unique_ptr<Workflow> make_ppo_workflow(const Config& cfg) {
  return std::make_unique<PpoWorkflow>(cfg);
}

}  // namespace evorl
