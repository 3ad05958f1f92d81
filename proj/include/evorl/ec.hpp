#pragma once

#include <cstdint>
#include <memory>
#include <optional>

#include "evorl/net.hpp"
#include "evorl/optim.hpp"
#include "evorl/rng.hpp"

namespace evorl {

// Fitness is always maximized. Every ask draws only from the passed key;
// every tell is a deterministic state transition.

// Centered ranks in [-0.5, 0.5]; the best fitness maps to +0.5. Ties broken
// by index so shaping is deterministic.
Vec centered_ranks(const Vec& fitnesses);

// ---------------------------------------------------------------------------
// OpenES: mirrored gaussian perturbations, rank shaping, Adam with decoupled
// weight decay on the mean.
struct OpenEsConfig {
  int pop = 128;
  double sigma = 0.02;
  double lr = 0.01;
  double weight_decay = 0.005;
  bool mirrored = true;
  bool noise_table = false;  // sample perturbation rows from a pre-built table
  std::int64_t noise_table_size = 1 << 22;
};

struct OpenEsState {
  OpenEsConfig cfg;
  Vec mean;
  double sigma = 0.0;
  AdamState adam;
  std::uint64_t table_seed = 0;  // table rebuilt on demand; not serialized itself
  std::shared_ptr<const Vec> table;

  static OpenEsState init(const OpenEsConfig& cfg, const Vec& mean0, RngKey key);
};

// Rebuilds state.table from state.cfg and state.table_seed (checkpoint restore).
void openes_rebuild_table(OpenEsState& state);

struct EsSample {
  Mat candidates;  // n x d
  Mat eps;         // n x d perturbations actually applied
};

EsSample openes_ask(const OpenEsState& state, RngKey key, int n);
void openes_tell(OpenEsState& state, const Mat& eps, const Vec& fitnesses);

// ---------------------------------------------------------------------------
// ARS (V2-t): mirrored directions, top-b by max(r+, r-), SGD scaled by the
// std of the 2b elite rewards.
struct ArsConfig {
  int pop = 128;  // candidates = 2 * directions
  int elites = 16;
  double sigma = 0.03;
  double lr = 0.02;
};

struct ArsState {
  ArsConfig cfg;
  Vec mean;
};

struct ArsSample {
  Mat deltas;      // (n/2) x d raw directions
  Mat candidates;  // n x d; rows (2k, 2k+1) = mean +/- sigma*delta_k
};

ArsSample ars_ask(const ArsState& state, RngKey key, int n);
// Returns false when the elite rewards are degenerate (sigma_R = 0; update skipped).
bool ars_tell(ArsState& state, const Mat& deltas, const Vec& r_plus, const Vec& r_minus);

// ---------------------------------------------------------------------------
// VanillaES (canonical ES): fixed sigma, log-weight recombination of top-mu.
struct VesConfig {
  int pop = 128;
  int elites = 16;
  double sigma = 0.02;
  bool mirrored = true;
};

struct VesState {
  VesConfig cfg;
  Vec mean;
};

Vec canonical_es_weights(int mu);  // w_i ~ ln(mu+.5)-ln(i), normalized to sum 1

Mat ves_ask(const VesState& state, RngKey key, int n);
void ves_tell(VesState& state, const Mat& candidates, const Vec& fitnesses);

// ---------------------------------------------------------------------------
// Full CMA-ES (rank-1 + rank-mu updates, cumulative step-size adaptation).
struct CmaConfig {
  int pop = 128;
  int elites = 64;
  double sigma0 = 0.1;
  int max_dim = 4096;  // refuse the d x d covariance beyond this
};

struct CmaState {
  CmaConfig cfg;
  int dim = 0;
  Vec mean;
  double sigma = 0.0;
  Mat C;       // covariance
  Mat B;       // eigenvectors of C
  Vec D;       // sqrt of eigenvalues
  Vec ps, pc;  // evolution paths
  Vec weights;
  double mueff = 0, cs = 0, ds = 0, cc = 0, c1 = 0, cmu = 0, chi_n = 0;
  std::int64_t generation = 0;
  std::int64_t recondition_count = 0;  // times C needed the 1e-10 diagonal bump

  static CmaState init(const CmaConfig& cfg, const Vec& mean0);
};

Mat cmaes_ask(const CmaState& state, RngKey key, int n);
void cmaes_tell(CmaState& state, const Mat& candidates, const Vec& fitnesses);

// ---------------------------------------------------------------------------
// Diagonal CEM with an exponentially decaying additive variance floor.
struct CemConfig {
  int pop = 10;
  int elites = 5;
  double var_init = 1e-3;
  double noise_start = 1e-3;
  double noise_end = 1e-5;
  std::int64_t decay_iters = 2000;  // schedule horizon (floor clamps at noise_end after)
};

struct CemState {
  CemConfig cfg;
  Vec mean;
  Vec diag_var;
  std::int64_t iter = 0;

  double noise_floor() const;
  static CemState init(const CemConfig& cfg, const Vec& mean0);
};

Mat cem_ask(const CemState& state, RngKey key, int n);
void cem_tell(CemState& state, const Mat& candidates, const Vec& fitnesses);

// ---------------------------------------------------------------------------
// Genetic operators (ERL population management).

// Best of k distinct uniformly drawn indices (ties -> lowest index).
int tournament_select(const Vec& fitnesses, RandomStream& stream, int k);
Vec gaussian_mutate(const Vec& params, RandomStream& stream, double std, double prob);
Vec uniform_crossover(const Vec& a, const Vec& b, RandomStream& stream);

}  // namespace evorl
