#include "evorl/ec.hpp"

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace evorl {

namespace {

// Indices of fitnesses in descending order, ties by lower index.
std::vector<int> rank_desc(const Vec& fitnesses) {
  std::vector<int> idx(fitnesses.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(),
                   [&](int a, int b) { return fitnesses[a] > fitnesses[b]; });
  return idx;
}

Mat gaussian_matrix(RngKey key, int rows, int cols) {
  RandomStream stream(key);
  Mat m(rows, cols);
  for (int r = 0; r < rows; ++r)
    for (int c = 0; c < cols; ++c) m(r, c) = stream.normal();
  return m;
}

}  // namespace

Vec centered_ranks(const Vec& fitnesses) {
  const auto n = fitnesses.size();
  std::vector<int> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(),
                   [&](int a, int b) { return fitnesses[a] < fitnesses[b]; });
  Vec shaped(n);
  if (n == 1) {
    shaped[0] = 0.0;
    return shaped;
  }
  for (Eigen::Index rank = 0; rank < n; ++rank)
    shaped[idx[rank]] = static_cast<double>(rank) / static_cast<double>(n - 1) - 0.5;
  return shaped;
}

// --------------------------------------------------------------------------- OpenES

OpenEsState OpenEsState::init(const OpenEsConfig& cfg, const Vec& mean0, RngKey key) {
  OpenEsState s;
  s.cfg = cfg;
  s.mean = mean0;
  s.sigma = cfg.sigma;
  s.adam = AdamState::zeros(mean0.size());
  if (cfg.noise_table) {
    s.table_seed = fold_in(key, 0x7ab1e).lo;
    openes_rebuild_table(s);
  }
  return s;
}

void openes_rebuild_table(OpenEsState& state) {
  if (!state.cfg.noise_table) return;
  auto table = std::make_shared<Vec>(state.cfg.noise_table_size);
  RandomStream stream(key_from_seed(state.table_seed));
  for (std::int64_t i = 0; i < state.cfg.noise_table_size; ++i) (*table)[i] = stream.normal();
  state.table = std::move(table);
}

EsSample openes_ask(const OpenEsState& state, RngKey key, int n) {
  if (n < 2) throw std::invalid_argument("openes_ask: population must be at least 2");
  if (state.cfg.mirrored && n % 2 != 0)
    throw std::invalid_argument("openes_ask: mirrored sampling needs an even population");
  const auto d = state.mean.size();
  const int base = state.cfg.mirrored ? n / 2 : n;

  Mat eps(n, d);
  if (state.cfg.noise_table) {
    // Rows are random windows into the shared table.
    RandomStream stream(key);
    const auto span = static_cast<std::uint64_t>(state.cfg.noise_table_size - d);
    for (int i = 0; i < base; ++i) {
      const auto off = static_cast<Eigen::Index>(stream.randint(span + 1));
      eps.row(i) = state.table->segment(off, d).transpose();
    }
  } else {
    eps.topRows(base) = gaussian_matrix(key, base, static_cast<int>(d));
  }
  if (state.cfg.mirrored) eps.bottomRows(base) = -eps.topRows(base);

  EsSample out;
  out.candidates = state.sigma * eps;
  out.candidates.rowwise() += state.mean.transpose();
  out.eps = std::move(eps);
  return out;
}

void openes_tell(OpenEsState& state, const Mat& eps, const Vec& fitnesses) {
  const auto n = fitnesses.size();
  if (eps.rows() != n) throw std::invalid_argument("openes_tell: eps/fitness size mismatch");
  const Vec shaped = centered_ranks(fitnesses);
  // Ascent direction; Adam performs descent, so negate.
  const Vec g = (eps.transpose() * shaped) / (static_cast<double>(n) * state.sigma);
  AdamConfig cfg;
  cfg.lr = state.cfg.lr;
  cfg.weight_decay = state.cfg.weight_decay;
  adam_step(state.mean, -g, state.adam, cfg);
}

// --------------------------------------------------------------------------- ARS

ArsSample ars_ask(const ArsState& state, RngKey key, int n) {
  if (n < 2 || n % 2 != 0) throw std::invalid_argument("ars_ask: population must be even");
  const auto d = state.mean.size();
  const int half = n / 2;
  ArsSample out;
  out.deltas = gaussian_matrix(key, half, static_cast<int>(d));
  out.candidates.resize(n, d);
  for (int k = 0; k < half; ++k) {
    out.candidates.row(2 * k) = state.mean.transpose() + state.cfg.sigma * out.deltas.row(k);
    out.candidates.row(2 * k + 1) = state.mean.transpose() - state.cfg.sigma * out.deltas.row(k);
  }
  return out;
}

bool ars_tell(ArsState& state, const Mat& deltas, const Vec& r_plus, const Vec& r_minus) {
  const auto half = deltas.rows();
  if (r_plus.size() != half || r_minus.size() != half)
    throw std::invalid_argument("ars_tell: reward/direction size mismatch");
  const int b = std::min<int>(state.cfg.elites, static_cast<int>(half));

  const Vec scores = r_plus.cwiseMax(r_minus);
  std::vector<int> idx(half);
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(), [&](int a, int c) { return scores[a] > scores[c]; });
  idx.resize(b);

  // sigma_R: population std of the 2b elite rewards.
  Vec elite(2 * b);
  for (int k = 0; k < b; ++k) {
    elite[2 * k] = r_plus[idx[k]];
    elite[2 * k + 1] = r_minus[idx[k]];
  }
  const double mean = elite.mean();
  const double sigma_r = std::sqrt((elite.array() - mean).square().mean());
  if (sigma_r == 0.0) return false;

  Vec step = Vec::Zero(state.mean.size());
  for (int k = 0; k < b; ++k)
    step += (r_plus[idx[k]] - r_minus[idx[k]]) * deltas.row(idx[k]).transpose();
  state.mean += (state.cfg.lr / (b * sigma_r)) * step;
  return true;
}

// --------------------------------------------------------------------------- VanillaES

Vec canonical_es_weights(int mu) {
  Vec w(mu);
  for (int i = 0; i < mu; ++i) w[i] = std::log(mu + 0.5) - std::log(i + 1.0);
  return w / w.sum();
}

Mat ves_ask(const VesState& state, RngKey key, int n) {
  if (n < 2) throw std::invalid_argument("ves_ask: population must be at least 2");
  if (state.cfg.mirrored && n % 2 != 0)
    throw std::invalid_argument("ves_ask: mirrored sampling needs an even population");
  const auto d = state.mean.size();
  const int base = state.cfg.mirrored ? n / 2 : n;
  Mat eps(n, d);
  eps.topRows(base) = gaussian_matrix(key, base, static_cast<int>(d));
  if (state.cfg.mirrored) eps.bottomRows(base) = -eps.topRows(base);
  Mat candidates = state.cfg.sigma * eps;
  candidates.rowwise() += state.mean.transpose();
  return candidates;
}

void ves_tell(VesState& state, const Mat& candidates, const Vec& fitnesses) {
  if (candidates.rows() != fitnesses.size())
    throw std::invalid_argument("ves_tell: candidate/fitness size mismatch");
  const int mu = std::min<int>(state.cfg.elites, static_cast<int>(fitnesses.size()));
  const auto order = rank_desc(fitnesses);
  const Vec w = canonical_es_weights(mu);
  Vec mean = Vec::Zero(state.mean.size());
  for (int i = 0; i < mu; ++i) mean += w[i] * candidates.row(order[i]).transpose();
  state.mean = mean;
}

// --------------------------------------------------------------------------- CMA-ES

CmaState CmaState::init(const CmaConfig& cfg, const Vec& mean0) {
  const auto d = mean0.size();
  if (d > cfg.max_dim)
    throw std::length_error("cmaes: genotype dimension " + std::to_string(d) +
                            " exceeds the full-covariance capacity cap " +
                            std::to_string(cfg.max_dim));
  CmaState s;
  s.cfg = cfg;
  s.dim = static_cast<int>(d);
  s.mean = mean0;
  s.sigma = cfg.sigma0;
  s.C = Mat::Identity(d, d);
  s.B = Mat::Identity(d, d);
  s.D = Vec::Ones(d);
  s.ps = Vec::Zero(d);
  s.pc = Vec::Zero(d);

  const int mu = cfg.elites;
  Vec w(mu);
  for (int i = 0; i < mu; ++i) w[i] = std::log((cfg.pop + 1) / 2.0) - std::log(i + 1.0);
  w = (w.array() < 0).select(Vec::Zero(mu), w);
  s.weights = w / w.sum();
  s.mueff = 1.0 / s.weights.squaredNorm();

  const double dd = static_cast<double>(d);
  s.cs = (s.mueff + 2.0) / (dd + s.mueff + 5.0);
  s.ds = 1.0 + 2.0 * std::max(0.0, std::sqrt((s.mueff - 1.0) / (dd + 1.0)) - 1.0) + s.cs;
  s.cc = (4.0 + s.mueff / dd) / (dd + 4.0 + 2.0 * s.mueff / dd);
  s.c1 = 2.0 / ((dd + 1.3) * (dd + 1.3) + s.mueff);
  s.cmu = std::min(1.0 - s.c1, 2.0 * (s.mueff - 2.0 + 1.0 / s.mueff) /
                                   ((dd + 2.0) * (dd + 2.0) + s.mueff));
  s.chi_n = std::sqrt(dd) * (1.0 - 1.0 / (4.0 * dd) + 1.0 / (21.0 * dd * dd));
  return s;
}

Mat cmaes_ask(const CmaState& state, RngKey key, int n) {
  const auto d = state.mean.size();
  const Mat z = gaussian_matrix(key, n, static_cast<int>(d));
  // x_i = mean + sigma * B * (D .* z_i)
  Mat y = (z.array().rowwise() * state.D.transpose().array()).matrix() * state.B.transpose();
  y *= state.sigma;
  y.rowwise() += state.mean.transpose();
  return y;
}

void cmaes_tell(CmaState& state, const Mat& candidates, const Vec& fitnesses) {
  if (candidates.rows() != fitnesses.size())
    throw std::invalid_argument("cmaes_tell: candidate/fitness size mismatch");
  const auto d = state.mean.size();
  const int mu = static_cast<int>(state.weights.size());
  const auto order = rank_desc(fitnesses);

  Mat y_top(mu, d);  // elite steps in sigma-normalized coordinates
  for (int i = 0; i < mu; ++i)
    y_top.row(i) = (candidates.row(order[i]) - state.mean.transpose()) / state.sigma;
  const Vec yw = y_top.transpose() * state.weights;

  state.mean += state.sigma * yw;

  // CSA path uses C^{-1/2} = B D^{-1} B^T.
  const Vec c_inv_half_yw =
      state.B * (state.B.transpose() * yw).cwiseQuotient(state.D.cwiseMax(1e-300));
  state.ps = (1.0 - state.cs) * state.ps +
             std::sqrt(state.cs * (2.0 - state.cs) * state.mueff) * c_inv_half_yw;

  const double gen1 = static_cast<double>(state.generation + 1);
  const double ps_norm = state.ps.norm();
  const bool hsig = ps_norm / std::sqrt(1.0 - std::pow(1.0 - state.cs, 2.0 * gen1)) <
                    (1.4 + 2.0 / (d + 1.0)) * state.chi_n;

  state.pc = (1.0 - state.cc) * state.pc +
             (hsig ? std::sqrt(state.cc * (2.0 - state.cc) * state.mueff) : 0.0) * yw;

  Mat rank_mu = Mat::Zero(d, d);
  for (int i = 0; i < mu; ++i)
    rank_mu.noalias() += state.weights[i] * y_top.row(i).transpose() * y_top.row(i);

  const double dhsig = (hsig ? 0.0 : 1.0) * state.cc * (2.0 - state.cc);
  state.C = (1.0 - state.c1 - state.cmu) * state.C +
            state.c1 * (state.pc * state.pc.transpose() + dhsig * state.C) +
            state.cmu * rank_mu;

  state.sigma *= std::exp((state.cs / state.ds) * (ps_norm / state.chi_n - 1.0));
  state.generation += 1;

  // Re-factorize for the next ask; re-condition when eigenvalues fall to <= 0.
  state.C = 0.5 * (state.C + state.C.transpose()).eval();
  Eigen::SelfAdjointEigenSolver<Mat> eig(state.C);
  Vec evals = eig.eigenvalues();
  if (evals.minCoeff() <= 0.0) {
    state.C += (1e-10 - evals.minCoeff()) * Mat::Identity(d, d);
    eig.compute(state.C);
    evals = eig.eigenvalues();
    state.recondition_count += 1;
  }
  state.B = eig.eigenvectors();
  state.D = evals.cwiseMax(0.0).cwiseSqrt();
}

// --------------------------------------------------------------------------- CEM

double CemState::noise_floor() const {
  const double frac =
      cfg.decay_iters > 0
          ? std::min(1.0, static_cast<double>(iter) / static_cast<double>(cfg.decay_iters))
          : 1.0;
  return cfg.noise_start * std::pow(cfg.noise_end / cfg.noise_start, frac);
}

CemState CemState::init(const CemConfig& cfg, const Vec& mean0) {
  CemState s;
  s.cfg = cfg;
  s.mean = mean0;
  s.diag_var = Vec::Constant(mean0.size(), cfg.var_init);
  return s;
}

Mat cem_ask(const CemState& state, RngKey key, int n) {
  const auto d = state.mean.size();
  Mat z = gaussian_matrix(key, n, static_cast<int>(d));
  Mat out =
      (z.array().rowwise() * state.diag_var.transpose().array().sqrt()).matrix();
  out.rowwise() += state.mean.transpose();
  return out;
}

void cem_tell(CemState& state, const Mat& candidates, const Vec& fitnesses) {
  if (candidates.rows() != fitnesses.size())
    throw std::invalid_argument("cem_tell: candidate/fitness size mismatch");
  const int h = std::min<int>(state.cfg.elites, static_cast<int>(fitnesses.size()));
  const auto order = rank_desc(fitnesses);

  const auto d = state.mean.size();
  Vec mean = Vec::Zero(d);
  for (int i = 0; i < h; ++i) mean += candidates.row(order[i]).transpose();
  mean /= h;

  Vec var = Vec::Zero(d);
  for (int i = 0; i < h; ++i)
    var += (candidates.row(order[i]).transpose() - mean).array().square().matrix();
  var /= h;

  state.mean = mean;
  state.diag_var = var.array() + state.noise_floor();
  state.iter += 1;
}

// --------------------------------------------------------------------------- genetic ops

int tournament_select(const Vec& fitnesses, RandomStream& stream, int k) {
  const auto n = fitnesses.size();
  k = std::min<int>(k, static_cast<int>(n));
  std::vector<std::uint8_t> drawn(n, 0);
  int best = -1;
  for (int picked = 0; picked < k;) {
    const auto i = static_cast<int>(stream.randint(static_cast<std::uint64_t>(n)));
    if (drawn[i]) continue;
    drawn[i] = 1;
    ++picked;
    if (best < 0 || fitnesses[i] > fitnesses[best] ||
        (fitnesses[i] == fitnesses[best] && i < best))
      best = i;
  }
  return best;
}

Vec gaussian_mutate(const Vec& params, RandomStream& stream, double std, double prob) {
  Vec out = params;
  for (Eigen::Index i = 0; i < out.size(); ++i)
    if (stream.uniform() < prob) out[i] += std * stream.normal();
  return out;
}

Vec uniform_crossover(const Vec& a, const Vec& b, RandomStream& stream) {
  if (a.size() != b.size()) throw std::invalid_argument("uniform_crossover: size mismatch");
  Vec out(a.size());
  for (Eigen::Index i = 0; i < out.size(); ++i)
    out[i] = stream.uniform() < 0.5 ? a[i] : b[i];
  return out;
}

}  // namespace evorl
