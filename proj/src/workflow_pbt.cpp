#include "evorl/workflow_pbt.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>
#include <vector>

#include "evorl/thread_pool.hpp"
#include "workflow_internal.hpp"

namespace evorl {

namespace {

struct PbtState final : WorkflowState {
  std::vector<std::unique_ptr<WorkflowState>> members;
  Mat velocity;  // pop x |search|, in each key's scale coordinates
  Vec meta;      // meta-objective recorded at the last selection

  std::unique_ptr<WorkflowState> clone() const override {
    auto c = std::make_unique<PbtState>();
    c->iteration = iteration;
    c->rng = rng;
    c->env_steps = env_steps;
    c->episodes = episodes;
    c->rl_updates = rl_updates;
    c->velocity = velocity;
    c->meta = meta;
    c->members.reserve(members.size());
    for (const auto& m : members) c->members.push_back(m->clone());
    return c;
  }
};

double to_scale(const HyperSpec& h, double x) { return h.log_scale ? std::log(std::abs(x)) : x; }

double from_scale(const HyperSpec& h, double u) {
  double x = u;
  if (h.log_scale) x = (h.low < 0.0 ? -1.0 : 1.0) * std::exp(u);
  return std::clamp(x, std::min(h.low, h.high), std::max(h.low, h.high));
}

double median(Vec v) {
  std::sort(v.begin(), v.end());
  const Eigen::Index n = v.size();
  return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

}  // namespace

PbtWorkflow::PbtWorkflow(std::unique_ptr<const Workflow> inner, PbtConfig cfg)
    : inner_(std::move(inner)), cfg_(std::move(cfg)) {
  if (cfg_.pop < 2) throw ConfigError("pbt.pop must be at least 2");
  if (cfg_.steps_per_iter < 1) throw ConfigError("pbt.steps_per_iter must be positive");
  const std::vector<std::string> tunable = inner_->tunable_keys();
  for (const HyperSpec& h : cfg_.search) {
    if (std::find(tunable.begin(), tunable.end(), h.key) == tunable.end()) {
      throw ConfigError("pbt.search." + h.key + ": inner workflow '" + inner_->id() +
                        "' has no such tunable");
    }
    if (h.log_scale && h.low * h.high <= 0.0) {
      throw ConfigError("pbt.search." + h.key + ": log scale needs same-sign nonzero bounds");
    }
    if (h.low == h.high) throw ConfigError("pbt.search." + h.key + ": empty range");
  }
}

std::string PbtWorkflow::id() const { return cfg_.cso ? "pbt-cso" : "pbt"; }

std::unique_ptr<WorkflowState> PbtWorkflow::init(RngKey key, ExecContext& ctx) const {
  auto st = std::make_unique<PbtState>();
  st->rng = key;
  const int n = cfg_.pop;
  const int nh = static_cast<int>(cfg_.search.size());
  st->members.resize(static_cast<std::size_t>(n));
  st->velocity = Mat::Zero(n, nh);
  st->meta = Vec::Zero(n);
  ctx.pool->for_each_index(static_cast<std::size_t>(n), [&](std::size_t i) {
    ThreadPool inline_pool(1);
    ExecContext ictx{&inline_pool};
    const RngKey mk = init_key(key, i);
    auto member = inner_->init(fold_in(mk, 0), ictx);
    RandomStream hyper_stream(fold_in(mk, 1));
    for (const HyperSpec& h : cfg_.search) {
      double v;
      if (h.log_scale) {
        const double a = std::log(std::abs(h.low));
        const double b = std::log(std::abs(h.high));
        v = from_scale(h, hyper_stream.uniform(std::min(a, b), std::max(a, b)));
      } else {
        v = hyper_stream.uniform(std::min(h.low, h.high), std::max(h.low, h.high));
      }
      inner_->set_hyper(*member, h.key, v);
    }
    st->members[i] = std::move(member);
  });
  return st;
}

StepMetrics PbtWorkflow::step(WorkflowState& state, ExecContext& ctx) const {
  auto& st = static_cast<PbtState&>(state);
  const RngKey k = st.step_key();
  const int n = cfg_.pop;
  const int nh = static_cast<int>(cfg_.search.size());

  // Advance + meta-evaluate every member in one parallel pass. Members use
  // inline pools so the outer index space is the only parallelism.
  ctx.pool->for_each_index(static_cast<std::size_t>(n), [&](std::size_t i) {
    ThreadPool inline_pool(1);
    ExecContext ictx{&inline_pool};
    for (int s = 0; s < cfg_.steps_per_iter; ++s) inner_->step(*st.members[i], ictx);
    st.meta[static_cast<Eigen::Index>(i)] =
        inner_->evaluate(*st.members[i], cfg_.meta_episodes, fold_in(fold_in(k, 0), i), ictx)
            .mean_return;
  });

  const Vec meta_at_selection = st.meta;
  const std::int64_t inner_total =
      (st.iteration + 1) * static_cast<std::int64_t>(cfg_.steps_per_iter);
  int replaced = 0;
  if (inner_total > cfg_.warmup_steps) {
    RandomStream ex(fold_in(k, 1));
    if (!cfg_.cso) {
      std::vector<int> order(static_cast<std::size_t>(n));
      std::iota(order.begin(), order.end(), 0);
      std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
        return meta_at_selection[a] > meta_at_selection[b];
      });
      const int n_sel = std::min(
          static_cast<int>(std::ceil(cfg_.selection_ratio * static_cast<double>(n))), n / 2);
      for (int rank = n - n_sel; rank < n; ++rank) {
        const int dst = order[static_cast<std::size_t>(rank)];
        const int src =
            order[static_cast<std::size_t>(ex.randint(static_cast<std::uint64_t>(n_sel)))];
        st.members[static_cast<std::size_t>(dst)] = st.members[static_cast<std::size_t>(src)]->clone();
        st.velocity.row(dst) = st.velocity.row(src);
        for (const HyperSpec& h : cfg_.search) {
          const double factor = ex.randint(2) == 0 ? 1.0 - cfg_.perturb : 1.0 + cfg_.perturb;
          const double v = inner_->get_hyper(*st.members[static_cast<std::size_t>(dst)], h.key) * factor;
          inner_->set_hyper(*st.members[static_cast<std::size_t>(dst)], h.key,
                            std::clamp(v, std::min(h.low, h.high), std::max(h.low, h.high)));
        }
        replaced += 1;
      }
    } else {
      std::vector<int> perm(static_cast<std::size_t>(n));
      std::iota(perm.begin(), perm.end(), 0);
      for (int i = 0; i < n - 1; ++i) {
        const int j = i + static_cast<int>(ex.randint(static_cast<std::uint64_t>(n - i)));
        std::swap(perm[static_cast<std::size_t>(i)], perm[static_cast<std::size_t>(j)]);
      }
      for (int p = 0; p + 1 < n; p += 2) {
        const int a = perm[static_cast<std::size_t>(p)];
        const int b = perm[static_cast<std::size_t>(p + 1)];
        const int t = meta_at_selection[a] >= meta_at_selection[b] ? a : b;
        const int s = t == a ? b : a;
        Vec student_u(nh), teacher_u(nh);
        for (int j = 0; j < nh; ++j) {
          const HyperSpec& h = cfg_.search[static_cast<std::size_t>(j)];
          student_u[j] = to_scale(h, inner_->get_hyper(*st.members[static_cast<std::size_t>(s)], h.key));
          teacher_u[j] = to_scale(h, inner_->get_hyper(*st.members[static_cast<std::size_t>(t)], h.key));
        }
        st.members[static_cast<std::size_t>(s)] = st.members[static_cast<std::size_t>(t)]->clone();
        double r1 = 0.0, r2 = 0.0;
        if (!cfg_.cso_per_coordinate) {
          r1 = ex.uniform();
          r2 = ex.uniform();
        }
        for (int j = 0; j < nh; ++j) {
          const HyperSpec& h = cfg_.search[static_cast<std::size_t>(j)];
          if (cfg_.cso_per_coordinate) {
            r1 = ex.uniform();
            r2 = ex.uniform();
          }
          st.velocity(s, j) = r1 * st.velocity(s, j) + r2 * (teacher_u[j] - student_u[j]);
          inner_->set_hyper(*st.members[static_cast<std::size_t>(s)], h.key,
                            from_scale(h, student_u[j] + st.velocity(s, j)));
        }
        replaced += 1;
      }
    }
  }

  st.env_steps = 0;
  st.episodes = 0;
  st.rl_updates = 0;
  for (const auto& m : st.members) {
    st.env_steps += m->env_steps;
    st.episodes += m->episodes;
    st.rl_updates += m->rl_updates;
  }
  st.iteration += 1;

  StepMetrics m;
  m.add("meta/best", meta_at_selection.maxCoeff());
  m.add("meta/mean", meta_at_selection.mean());
  m.add("meta/median", median(meta_at_selection));
  m.add("meta/min", meta_at_selection.minCoeff());
  m.add("pbt/replaced", static_cast<double>(replaced));
  for (int j = 0; j < nh; ++j) {
    const HyperSpec& h = cfg_.search[static_cast<std::size_t>(j)];
    Vec vals(n);
    for (int i = 0; i < n; ++i) {
      vals[i] = inner_->get_hyper(*st.members[static_cast<std::size_t>(i)], h.key);
    }
    m.add("hyper/" + h.key + "/median", median(vals));
  }
  return m;
}

EvalReport PbtWorkflow::evaluate(const WorkflowState& state, int episodes, RngKey key,
                                 ExecContext& ctx) const {
  const auto& st = static_cast<const PbtState&>(state);
  Eigen::Index best = 0;
  st.meta.maxCoeff(&best);
  return inner_->evaluate(*st.members[static_cast<std::size_t>(best)], episodes, key, ctx);
}

void PbtWorkflow::save(const WorkflowState& state, SegmentWriter& w,
                       const std::string& p) const {
  const auto& st = static_cast<const PbtState&>(state);
  st.save_base(w, p);
  w.put(p + "meta", st.meta);
  w.put(p + "velocity", st.velocity);
  for (int i = 0; i < cfg_.pop; ++i) {
    inner_->save(*st.members[static_cast<std::size_t>(i)], w, p + "m" + std::to_string(i) + "/");
  }
}

std::unique_ptr<WorkflowState> PbtWorkflow::load(const SegmentReader& r,
                                                 const std::string& p) const {
  auto st = std::make_unique<PbtState>();
  st->load_base(r, p);
  st->meta = r.get_vec(p + "meta");
  st->velocity = r.get_mat(p + "velocity", cfg_.pop, static_cast<Eigen::Index>(cfg_.search.size()));
  st->members.resize(static_cast<std::size_t>(cfg_.pop));
  for (int i = 0; i < cfg_.pop; ++i) {
    st->members[static_cast<std::size_t>(i)] = inner_->load(r, p + "m" + std::to_string(i) + "/");
  }
  return st;
}

std::unique_ptr<Workflow> make_pbt_workflow(const Config& cfg) {
  const std::string inner_id = cfg.get_string("pbt.inner");
  std::unique_ptr<Workflow> inner;
  if (inner_id == "es") {
    inner = make_es_workflow(cfg);
  } else if (inner_id == "ppo") {
    inner = make_ppo_workflow(cfg);
  } else if (inner_id == "td3") {
    inner = make_td3_workflow(cfg);
  } else if (inner_id == "erl") {
    inner = make_erl_workflow(cfg);
  } else if (inner_id == "cemrl") {
    inner = make_cemrl_workflow(cfg);
  } else {
    throw ConfigError("pbt.inner must be one of es, ppo, td3, erl, cemrl");
  }

  PbtConfig pc;
  pc.pop = static_cast<int>(cfg.get_int("pbt.pop"));
  pc.steps_per_iter = static_cast<int>(cfg.get_int("pbt.steps_per_iter"));
  pc.perturb = cfg.get_double("pbt.perturb");
  pc.selection_ratio = cfg.get_double("pbt.selection_ratio");
  pc.meta_episodes = static_cast<int>(cfg.get_int("pbt.meta_episodes"));
  pc.warmup_steps = cfg.get_int("pbt.warmup_steps");
  pc.cso = cfg.get_string("workflow") == "pbt-cso";
  pc.cso_per_coordinate = cfg.get_bool("pbt.cso_per_coordinate");
  for (const auto& [suffix, value] : cfg.prefixed("pbt.search")) {
    HyperSpec h;
    h.key = suffix;
    const auto c1 = value.find(',');
    const auto c2 = value.find(',', c1 == std::string::npos ? c1 : c1 + 1);
    if (c1 == std::string::npos || c2 == std::string::npos) {
      throw ConfigError("pbt.search." + suffix + ": expected \"low,high,scale\"");
    }
    try {
      h.low = std::stod(value.substr(0, c1));
      h.high = std::stod(value.substr(c1 + 1, c2 - c1 - 1));
    } catch (const std::exception&) {
      throw ConfigError("pbt.search." + suffix + ": bounds must be numbers");
    }
    const std::string scale = value.substr(c2 + 1);
    if (scale == "log") {
      h.log_scale = true;
    } else if (scale != "linear") {
      throw ConfigError("pbt.search." + suffix + ": scale must be 'log' or 'linear'");
    }
    pc.search.push_back(std::move(h));
  }
  return std::make_unique<PbtWorkflow>(std::move(inner), std::move(pc));
}

}  // namespace evorl
