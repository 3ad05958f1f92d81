#include "evorl/workflow.hpp"

#include <chrono>
#include <cmath>
#include <stdexcept>

#include "workflow_internal.hpp"

namespace evorl {

void WorkflowState::save_base(SegmentWriter& w, const std::string& p) const {
  w.put(p + "iteration", iteration);
  w.put(p + "rng", rng);
  w.put(p + "env_steps", env_steps);
  w.put(p + "episodes", episodes);
  w.put(p + "rl_updates", rl_updates);
}

void WorkflowState::load_base(const SegmentReader& r, const std::string& p) {
  iteration = r.get_i64(p + "iteration");
  rng = r.get_key(p + "rng");
  env_steps = r.get_i64(p + "env_steps");
  episodes = r.get_i64(p + "episodes");
  rl_updates = r.get_i64(p + "rl_updates");
}

void Workflow::set_hyper(WorkflowState&, const std::string& key, double) const {
  throw std::invalid_argument("workflow '" + id() + "' has no tunable hyperparameter '" + key + "'");
}

double Workflow::get_hyper(const WorkflowState&, const std::string& key) const {
  throw std::invalid_argument("workflow '" + id() + "' has no tunable hyperparameter '" + key + "'");
}

std::unique_ptr<Workflow> build_workflow(const Config& cfg) {
  const std::string& id = cfg.get_string("workflow");
  if (id == "es") return make_es_workflow(cfg);
  if (id == "ppo") return make_ppo_workflow(cfg);
  if (id == "td3") return make_td3_workflow(cfg);
  if (id == "erl") return make_erl_workflow(cfg);
  if (id == "cemrl") return make_cemrl_workflow(cfg);
  if (id == "pbt" || id == "pbt-cso") return make_pbt_workflow(cfg);
  throw ConfigError("unknown workflow: '" + id + "'");
}

void learn(const Workflow& wf, WorkflowState& state, ExecContext& ctx, const LearnOptions& opt,
           MetricsWriter& metrics) {
  using clock = std::chrono::steady_clock;
  while (!opt.budget.reached(state)) {
    const auto t0 = clock::now();
    const StepMetrics sm = wf.step(state, ctx);
    const double ms =
        std::chrono::duration_cast<std::chrono::duration<double, std::milli>>(clock::now() - t0)
            .count();
    metrics.write_step(state.iteration, state.env_steps, state.episodes, state.rl_updates, sm);
    metrics.write_timing(state.iteration, ms);
    if (opt.eval_interval > 0 && state.iteration % opt.eval_interval == 0) {
      const EvalReport er = wf.evaluate(state, opt.eval_episodes, state.eval_key(), ctx);
      metrics.write_eval(state.iteration, state.env_steps, state.episodes, state.rl_updates,
                         er.mean_return, er.return_std, er.episodes);
    }
    if (opt.checkpoint_interval > 0 && !opt.checkpoint_path.empty() &&
        state.iteration % opt.checkpoint_interval == 0)
      save_checkpoint_state(wf, state, opt.checkpoint_path);
  }
  if (!opt.checkpoint_path.empty()) save_checkpoint_state(wf, state, opt.checkpoint_path);
  metrics.flush();
}

void save_checkpoint_state(const Workflow& wf, const WorkflowState& state,
                           const std::string& path) {
  SegmentWriter w;
  wf.save(state, w, "");
  checkpoint_save(path, wf.id(), w);
}

std::unique_ptr<WorkflowState> load_checkpoint_state(const Workflow& wf, const std::string& path) {
  const SegmentReader r = checkpoint_load(path, wf.id());
  return wf.load(r, "");
}

EnvSpec env_from_config(const Config& cfg) {
  return EnvSpec::by_name(cfg.get_string("env.id"), cfg.get_bool("env.fixed_horizon"),
                          static_cast<int>(cfg.get_int("env.max_episode_steps")));
}

MlpSpec policy_net_spec(const EnvSpec& env, const std::vector<int>& hidden, bool layer_norm) {
  MlpSpec spec;
  spec.input_dim = env.obs_dim;
  spec.hidden = hidden;
  spec.layer_norm = layer_norm;
  if (env.discrete) {
    spec.output_dim = env.num_actions;
    spec.head = Head::Categorical;
  } else {
    spec.output_dim = env.act_dim;
    spec.head = Head::DeterministicTanh;
    spec.tanh_scale = env.act_high;
  }
  return spec;
}

EvalReport eval_params(ThreadPool& pool, const EnvSpec& env, const MlpSpec& spec,
                       const std::vector<const ParamVector*>& agents, const ObsNormState* norm,
                       int episodes, RngKey key) {
  PolicyRef policy;
  policy.spec = &spec;
  policy.obs_norm = norm;
  policy.mode = ActionMode::Deterministic;
  const std::vector<AgentRollout> rollouts =
      batched_rollout(pool, env, policy, agents, episodes, RolloutMode::episodes(episodes), key,
                      RolloutOptions{});
  EvalReport report;
  double sum = 0.0, sq = 0.0;
  for (const AgentRollout& r : rollouts) {
    double agent_sum = 0.0;
    for (const double ret : r.episode_returns) {
      sum += ret;
      sq += ret * ret;
      agent_sum += ret;
      report.episodes += 1;
    }
    report.per_agent.push_back(agent_sum / static_cast<double>(r.episode_returns.size()));
  }
  const double n = static_cast<double>(report.episodes);
  report.mean_return = sum / n;
  report.return_std = std::sqrt(std::max(0.0, sq / n - report.mean_return * report.mean_return));
  return report;
}

ObsNormMode resolve_obs_norm_mode(const Config& cfg, const std::string& workflow_id) {
  const std::string& mode = cfg.get_string("obs_norm.mode");
  if (mode == "none") return ObsNormMode::None;
  if (mode == "vbn") return ObsNormMode::VBN;
  if (mode == "running_stats") return ObsNormMode::RunningStats;
  if (mode != "auto") throw ConfigError("obs_norm.mode: unknown value '" + mode + "'");
  if (workflow_id == "es") {
    const std::string& algo = cfg.get_string("ec.algo");
    if (algo == "ars") return ObsNormMode::RunningStats;
    if (algo == "cem") return ObsNormMode::None;
    return ObsNormMode::VBN;  // openes / ves / cmaes tables
  }
  return ObsNormMode::None;
}

void save_adam(SegmentWriter& w, const std::string& p, const AdamState& a) {
  w.put(p + "m", a.m);
  w.put(p + "v", a.v);
  w.put(p + "t", a.t);
}

AdamState load_adam(const SegmentReader& r, const std::string& p) {
  AdamState a;
  a.m = r.get_vec(p + "m");
  a.v = r.get_vec(p + "v");
  a.t = r.get_i64(p + "t");
  return a;
}

void save_obs_norm(SegmentWriter& w, const std::string& p, const ObsNormState& s) {
  w.put(p + "mode", static_cast<std::int64_t>(s.mode));
  w.put(p + "mean", s.mean);
  w.put(p + "var", s.var);
  w.put(p + "count", s.count);
}

ObsNormState load_obs_norm(const SegmentReader& r, const std::string& p) {
  ObsNormState s;
  s.mode = static_cast<ObsNormMode>(r.get_i64(p + "mode"));
  s.mean = r.get_vec(p + "mean");
  s.var = r.get_vec(p + "var");
  s.count = r.get_f64(p + "count");
  return s;
}

void save_buffer(SegmentWriter& w, const std::string& p, const ReplayBuffer& b) {
  w.put(p + "cursor", b.cursor());
  const SampleBatch rows = b.slots(0, b.size());
  w.put(p + "obs", rows.obs);
  w.put(p + "actions", rows.actions);
  w.put(p + "rewards", rows.rewards);
  w.put(p + "terminated", rows.terminated);
  w.put(p + "truncated", rows.truncated);
  w.put(p + "next_obs", rows.next_obs);
}

void load_buffer(const SegmentReader& r, const std::string& p, ReplayBuffer& b) {
  const std::int64_t n =
      static_cast<std::int64_t>(r.count(p + "rewards"));
  SampleBatch rows;
  rows.obs = r.get_mat(p + "obs", n, b.obs_dim());
  rows.actions = r.get_mat(p + "actions", n, b.act_dim());
  rows.rewards = r.get_vec(p + "rewards");
  rows.terminated = r.get_flags(p + "terminated");
  rows.truncated = r.get_flags(p + "truncated");
  rows.next_obs = r.get_mat(p + "next_obs", n, b.obs_dim());
  b.restore(r.get_i64(p + "cursor"), rows);
}

void save_env_state(SegmentWriter& w, const std::string& p, const EnvState& s) {
  w.put_f64(p + "phys", s.phys.data(), s.phys.size());
  w.put(p + "step_count", static_cast<std::int64_t>(s.step_count));
  w.put(p + "rng", s.rng);
}

EnvState load_env_state(const SegmentReader& r, const std::string& p) {
  EnvState s;
  const Vec phys = r.get_vec(p + "phys");
  for (int i = 0; i < 4; ++i) s.phys[static_cast<std::size_t>(i)] = phys[i];
  s.step_count = static_cast<int>(r.get_i64(p + "step_count"));
  s.rng = r.get_key(p + "rng");
  return s;
}

}  // namespace evorl
