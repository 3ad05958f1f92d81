#include <algorithm>
#include <bit>
#include <cmath>
#include <variant>

#include "evorl/ec.hpp"
#include "workflow_internal.hpp"

namespace evorl {

namespace {

using EcVariant = std::variant<OpenEsState, ArsState, VesState, CmaState, CemState>;

struct EsState final : WorkflowState {
  EcVariant ec;
  ObsNormState obs_norm;

  std::unique_ptr<WorkflowState> clone() const override { return std::make_unique<EsState>(*this); }
};

const Vec& center_of(const EcVariant& ec) {
  return std::visit([](const auto& s) -> const Vec& { return s.mean; }, ec);
}

class EsWorkflow final : public Workflow {
 public:
  explicit EsWorkflow(const Config& cfg)
      : env_(env_from_config(cfg)),
        net_(policy_net_spec(env_, cfg.get_int_list("net.hidden"), cfg.get_bool("net.layer_norm"))),
        algo_(cfg.get_string("ec.algo")),
        pop_(static_cast<int>(cfg.get_int("ec.pop"))),
        fitness_episodes_(static_cast<int>(cfg.get_int("ec.fitness_episodes"))),
        norm_mode_(resolve_obs_norm_mode(cfg, "es")),
        vbn_samples_(static_cast<int>(cfg.get_int("obs_norm.vbn_samples"))) {
    if (algo_ == "openes") {
      openes_cfg_ = {pop_,
                     cfg.get_double("ec.openes.sigma"),
                     cfg.get_double("ec.openes.lr"),
                     cfg.get_double("ec.openes.weight_decay"),
                     cfg.get_bool("ec.openes.mirrored"),
                     cfg.get_bool("ec.openes.noise_table"),
                     cfg.get_int("ec.openes.noise_table_size")};
    } else if (algo_ == "ars") {
      ars_cfg_ = {pop_, static_cast<int>(cfg.get_int("ec.ars.elites")),
                  cfg.get_double("ec.ars.sigma"), cfg.get_double("ec.ars.lr")};
    } else if (algo_ == "ves") {
      ves_cfg_ = {pop_, static_cast<int>(cfg.get_int("ec.ves.elites")),
                  cfg.get_double("ec.ves.sigma"), cfg.get_bool("ec.ves.mirrored")};
    } else if (algo_ == "cmaes") {
      cma_cfg_ = {pop_, static_cast<int>(cfg.get_int("ec.cmaes.elites")),
                  cfg.get_double("ec.cmaes.sigma0"),
                  static_cast<int>(cfg.get_int("ec.cmaes.max_dim"))};
    } else if (algo_ == "cem") {
      cem_cfg_ = {pop_,
                  static_cast<int>(cfg.get_int("ec.cem.elites")),
                  cfg.get_double("ec.cem.var_init"),
                  cfg.get_double("ec.cem.noise_start"),
                  cfg.get_double("ec.cem.noise_end"),
                  cfg.get_int("ec.cem.decay_iters")};
    } else {
      throw ConfigError("ec.algo: unknown algorithm '" + algo_ + "'");
    }
  }

  std::string id() const override { return "es"; }

  std::unique_ptr<WorkflowState> init(RngKey key, ExecContext&) const override {
    auto st = std::make_unique<EsState>();
    st->rng = key;
    const Vec mean0 = init_params(net_, init_key(key, 1));
    if (algo_ == "openes") {
      st->ec = OpenEsState::init(openes_cfg_, mean0, init_key(key, 2));
    } else if (algo_ == "ars") {
      st->ec = ArsState{ars_cfg_, mean0};
    } else if (algo_ == "ves") {
      st->ec = VesState{ves_cfg_, mean0};
    } else if (algo_ == "cmaes") {
      st->ec = CmaState::init(cma_cfg_, mean0);
    } else {
      st->ec = CemState::init(cem_cfg_, mean0);
    }
    init_obs_norm(*st, key);
    return st;
  }

  StepMetrics step(WorkflowState& state, ExecContext& ctx) const override {
    auto& st = static_cast<EsState&>(state);
    const RngKey k = st.step_key();

    Mat candidates;
    Mat eps, deltas;  // openes / ars bookkeeping for tell
    if (auto* s = std::get_if<OpenEsState>(&st.ec)) {
      EsSample sample = openes_ask(*s, fold_in(k, 0), pop_);
      candidates = std::move(sample.candidates);
      eps = std::move(sample.eps);
    } else if (auto* s = std::get_if<ArsState>(&st.ec)) {
      ArsSample sample = ars_ask(*s, fold_in(k, 0), pop_);
      candidates = std::move(sample.candidates);
      deltas = std::move(sample.deltas);
    } else if (auto* s = std::get_if<VesState>(&st.ec)) {
      candidates = ves_ask(*s, fold_in(k, 0), pop_);
    } else if (auto* s = std::get_if<CmaState>(&st.ec)) {
      candidates = cmaes_ask(*s, fold_in(k, 0), pop_);
    } else {
      candidates = cem_ask(std::get<CemState>(st.ec), fold_in(k, 0), pop_);
    }

    const int n = static_cast<int>(candidates.rows());
    std::vector<ParamVector> members(static_cast<std::size_t>(n));
    std::vector<const ParamVector*> agents(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
      members[static_cast<std::size_t>(i)] = candidates.row(i);
      agents[static_cast<std::size_t>(i)] = &members[static_cast<std::size_t>(i)];
    }

    PolicyRef policy;
    policy.spec = &net_;
    policy.obs_norm = &st.obs_norm;
    policy.mode = ActionMode::Deterministic;
    RolloutOptions opts;
    opts.track_obs_stats = norm_mode_ == ObsNormMode::RunningStats;
    const std::vector<AgentRollout> rollouts =
        batched_rollout(*ctx.pool, env_, policy, agents, fitness_episodes_,
                        RolloutMode::episodes(fitness_episodes_), fold_in(k, 1), opts);

    Vec fitness(n);
    WelfordStats obs_stats;
    for (int i = 0; i < n; ++i) {
      const AgentRollout& r = rollouts[static_cast<std::size_t>(i)];
      double sum = 0.0;
      for (const double ret : r.episode_returns) sum += ret;
      fitness[i] = sum / static_cast<double>(r.episode_returns.size());
      st.env_steps += r.steps;
      st.episodes += static_cast<std::int64_t>(r.episode_returns.size());
      if (opts.track_obs_stats) obs_stats.merge(r.obs_stats);
    }
    if (opts.track_obs_stats) rs_update(st.obs_norm, obs_stats);

    StepMetrics m;
    bool skipped = false;
    if (auto* s = std::get_if<OpenEsState>(&st.ec)) {
      openes_tell(*s, eps, fitness);
      m.add("es/sigma", s->sigma);
    } else if (auto* s = std::get_if<ArsState>(&st.ec)) {
      const Eigen::Index half = fitness.size() / 2;
      Vec r_plus(half), r_minus(half);
      for (Eigen::Index i = 0; i < half; ++i) {
        r_plus[i] = fitness[2 * i];
        r_minus[i] = fitness[2 * i + 1];
      }
      skipped = !ars_tell(*s, deltas, r_plus, r_minus);
      m.add("es/sigma", s->cfg.sigma);
    } else if (auto* s = std::get_if<VesState>(&st.ec)) {
      ves_tell(*s, candidates, fitness);
      m.add("es/sigma", s->cfg.sigma);
    } else if (auto* s = std::get_if<CmaState>(&st.ec)) {
      cmaes_tell(*s, candidates, fitness);
      m.add("es/sigma", s->sigma);
    } else {
      auto& cem = std::get<CemState>(st.ec);
      cem_tell(cem, candidates, fitness);
      m.add("es/sigma", std::sqrt(cem.diag_var.mean()));
    }

    m.add("fitness/mean", fitness.mean());
    m.add("fitness/max", fitness.maxCoeff());
    m.add("fitness/min", fitness.minCoeff());
    m.add("es/update_skipped", skipped ? 1.0 : 0.0);
    st.iteration += 1;
    return m;
  }

  EvalReport evaluate(const WorkflowState& state, int episodes, RngKey key,
                      ExecContext& ctx) const override {
    const auto& st = static_cast<const EsState&>(state);
    const ParamVector center = center_of(st.ec);
    return eval_params(*ctx.pool, env_, net_, {&center}, &st.obs_norm, episodes, key);
  }

  void save(const WorkflowState& state, SegmentWriter& w, const std::string& p) const override {
    const auto& st = static_cast<const EsState&>(state);
    st.save_base(w, p);
    save_obs_norm(w, p + "obs_norm/", st.obs_norm);
    if (const auto* s = std::get_if<OpenEsState>(&st.ec)) {
      w.put(p + "ec/mean", s->mean);
      w.put(p + "ec/sigma", s->sigma);
      save_adam(w, p + "ec/adam/", s->adam);
      w.put(p + "ec/table_seed", std::bit_cast<std::int64_t>(s->table_seed));
    } else if (const auto* s = std::get_if<ArsState>(&st.ec)) {
      w.put(p + "ec/mean", s->mean);
    } else if (const auto* s = std::get_if<VesState>(&st.ec)) {
      w.put(p + "ec/mean", s->mean);
    } else if (const auto* s = std::get_if<CmaState>(&st.ec)) {
      w.put(p + "ec/mean", s->mean);
      w.put(p + "ec/sigma", s->sigma);
      w.put(p + "ec/C", s->C);
      w.put(p + "ec/B", s->B);
      w.put(p + "ec/D", s->D);
      w.put(p + "ec/ps", s->ps);
      w.put(p + "ec/pc", s->pc);
      w.put(p + "ec/generation", s->generation);
      w.put(p + "ec/recondition_count", s->recondition_count);
    } else {
      const auto& cem = std::get<CemState>(st.ec);
      w.put(p + "ec/mean", cem.mean);
      w.put(p + "ec/var", cem.diag_var);
      w.put(p + "ec/iter", cem.iter);
    }
  }

  std::unique_ptr<WorkflowState> load(const SegmentReader& r, const std::string& p) const override {
    auto st = std::make_unique<EsState>();
    st->load_base(r, p);
    st->obs_norm = load_obs_norm(r, p + "obs_norm/");
    const Vec mean = r.get_vec(p + "ec/mean");
    if (algo_ == "openes") {
      OpenEsState s;
      s.cfg = openes_cfg_;
      s.mean = mean;
      s.sigma = r.get_f64(p + "ec/sigma");
      s.adam = load_adam(r, p + "ec/adam/");
      s.table_seed = std::bit_cast<std::uint64_t>(r.get_i64(p + "ec/table_seed"));
      openes_rebuild_table(s);
      st->ec = std::move(s);
    } else if (algo_ == "ars") {
      st->ec = ArsState{ars_cfg_, mean};
    } else if (algo_ == "ves") {
      st->ec = VesState{ves_cfg_, mean};
    } else if (algo_ == "cmaes") {
      CmaState s = CmaState::init(cma_cfg_, mean);
      s.sigma = r.get_f64(p + "ec/sigma");
      const Eigen::Index d = mean.size();
      s.C = r.get_mat(p + "ec/C", d, d);
      s.B = r.get_mat(p + "ec/B", d, d);
      s.D = r.get_vec(p + "ec/D");
      s.ps = r.get_vec(p + "ec/ps");
      s.pc = r.get_vec(p + "ec/pc");
      s.generation = r.get_i64(p + "ec/generation");
      s.recondition_count = r.get_i64(p + "ec/recondition_count");
      st->ec = std::move(s);
    } else {
      CemState s = CemState::init(cem_cfg_, mean);
      s.diag_var = r.get_vec(p + "ec/var");
      s.iter = r.get_i64(p + "ec/iter");
      st->ec = std::move(s);
    }
    return st;
  }

 private:
  void init_obs_norm(EsState& st, RngKey key) const {
    if (norm_mode_ == ObsNormMode::VBN) {
      st.obs_norm = vbn_fit(env_, init_key(key, 0), vbn_samples_);
    } else if (norm_mode_ == ObsNormMode::RunningStats) {
      st.obs_norm = ObsNormState::running_stats(env_.obs_dim);
    } else {
      st.obs_norm = ObsNormState::none();
    }
  }

  EnvSpec env_;
  MlpSpec net_;
  std::string algo_;
  int pop_;
  int fitness_episodes_;
  ObsNormMode norm_mode_;
  int vbn_samples_;
  OpenEsConfig openes_cfg_;
  ArsConfig ars_cfg_;
  VesConfig ves_cfg_;
  CmaConfig cma_cfg_;
  CemConfig cem_cfg_;
};

}  // namespace

std::unique_ptr<Workflow> make_es_workflow(const Config& cfg) {
  return std::make_unique<EsWorkflow>(cfg);
}

}  // namespace evorl
