#include <doctest.h>

#include <cmath>
#include <set>

#include "evorl/ec.hpp"

using namespace evorl;

namespace {

// Mirrors the internal sampling order (row-major normals from one stream).
Mat replicate_gaussians(RngKey key, int rows, int cols) {
  RandomStream stream(key);
  Mat m(rows, cols);
  for (int r = 0; r < rows; ++r)
    for (int c = 0; c < cols; ++c) m(r, c) = stream.normal();
  return m;
}

}  // namespace

TEST_CASE("centered ranks") {
  Vec f(3);
  f << 3.0, 1.0, 2.0;
  const Vec shaped = centered_ranks(f);
  CHECK(shaped[0] == 0.5);
  CHECK(shaped[1] == -0.5);
  CHECK(shaped[2] == 0.0);
  CHECK(shaped.sum() == doctest::Approx(0.0).epsilon(1e-15));

  // Ties resolve by index: the earlier entry gets the lower rank.
  Vec t(2);
  t << 7.0, 7.0;
  const Vec ts = centered_ranks(t);
  CHECK(ts[0] == -0.5);
  CHECK(ts[1] == 0.5);

  Vec one(1);
  one << 5.0;
  CHECK(centered_ranks(one)[0] == 0.0);
}

// --------------------------------------------------------------------------- OpenES

TEST_CASE("openes ask: mirrored pairs around the mean") {
  OpenEsConfig cfg;
  cfg.mirrored = true;
  Vec mean(3);
  mean << 1.0, -2.0, 0.5;
  OpenEsState st = OpenEsState::init(cfg, mean, key_from_seed(70));
  st.sigma = 0.1;

  const EsSample s = openes_ask(st, key_from_seed(71), 8);
  CHECK(s.candidates.rows() == 8);
  CHECK(s.eps.bottomRows(4) == -s.eps.topRows(4));
  CHECK(s.eps.topRows(4) == replicate_gaussians(key_from_seed(71), 4, 3));
  for (int i = 0; i < 8; ++i)
    CHECK((s.candidates.row(i) - (mean.transpose() + 0.1 * s.eps.row(i))).cwiseAbs().maxCoeff() <
          1e-15);

  // Pure function of the key.
  const EsSample again = openes_ask(st, key_from_seed(71), 8);
  CHECK(again.candidates == s.candidates);

  CHECK_THROWS_AS((void)openes_ask(st, key_from_seed(72), 7), std::invalid_argument);
}

TEST_CASE("openes tell: rank-shaped gradient into adam") {
  OpenEsConfig cfg;
  cfg.lr = 0.1;
  cfg.weight_decay = 0.0;
  Vec mean0 = Vec::Zero(2);
  OpenEsState st = OpenEsState::init(cfg, mean0, key_from_seed(73));
  st.sigma = 0.5;

  Mat eps(4, 2);
  eps << 1, 0, 0, 1, -1, 0, 0, -1;
  Vec fit(4);
  fit << 4.0, 3.0, 2.0, 1.0;  // shaped: .5, 1/6, -1/6, -.5
  openes_tell(st, eps, fit);

  // g = eps^T shaped / (n sigma) = (1/3, 1/3); first adam step ~ +lr per coord.
  const double g = (0.5 + 1.0 / 6.0) / (4.0 * 0.5);
  const double expect = 0.1 * g / (g + 1e-8);
  CHECK(st.mean[0] == doctest::Approx(expect).epsilon(1e-12));
  CHECK(st.mean[1] == doctest::Approx(expect).epsilon(1e-12));
  CHECK(st.adam.t == 1);
}

TEST_CASE("openes weight decay is decoupled") {
  OpenEsConfig cfg;
  cfg.lr = 0.5;
  cfg.weight_decay = 0.1;
  Vec mean0(1);
  mean0 << 2.0;
  OpenEsState st = OpenEsState::init(cfg, mean0, key_from_seed(74));

  Mat eps(2, 1);
  eps << 1.0, -1.0;
  Vec fit(2);
  fit << 1.0, 1.0;  // tie -> shaped (-.5, .5) -> g = -1/(2 sigma), nonzero
  openes_tell(st, eps, fit);
  // adam moves by lr*g/(|g|+eps), then decoupled decay scales by (1 - lr*wd).
  const double g = (-0.5 + (-1.0) * 0.5) / (2.0 * st.sigma);
  const double after_grad = 2.0 + 0.5 * g / (std::abs(g) + 1e-8);
  CHECK(st.mean[0] == doctest::Approx(after_grad * (1.0 - 0.5 * 0.1)).epsilon(1e-10));
}

TEST_CASE("openes noise table: rows are table windows, rebuild is exact") {
  OpenEsConfig cfg;
  cfg.noise_table = true;
  cfg.noise_table_size = 4096;
  cfg.mirrored = true;
  Vec mean0 = Vec::Zero(5);
  OpenEsState st = OpenEsState::init(cfg, mean0, key_from_seed(75));
  REQUIRE(st.table);
  CHECK(st.table->size() == 4096);

  const RngKey ask_key = key_from_seed(76);
  const EsSample s = openes_ask(st, ask_key, 6);
  RandomStream offs(ask_key);
  for (int i = 0; i < 3; ++i) {
    const auto off = static_cast<Eigen::Index>(offs.randint(4096 - 5 + 1));
    CHECK(s.eps.row(i).transpose() == st.table->segment(off, 5));
    CHECK(s.eps.row(3 + i) == -s.eps.row(i));
  }

  OpenEsState copy = st;
  copy.table.reset();
  openes_rebuild_table(copy);
  CHECK(*copy.table == *st.table);
}

// --------------------------------------------------------------------------- ARS

TEST_CASE("ars ask interleaves +/- pairs") {
  ArsState st;
  st.cfg.sigma = 0.25;
  st.mean = Vec::Zero(4);
  st.mean << 1.0, 2.0, 3.0, 4.0;

  const ArsSample s = ars_ask(st, key_from_seed(77), 6);
  CHECK(s.deltas.rows() == 3);
  CHECK(s.deltas == replicate_gaussians(key_from_seed(77), 3, 4));
  for (int k = 0; k < 3; ++k) {
    CHECK((s.candidates.row(2 * k) - (st.mean.transpose() + 0.25 * s.deltas.row(k)))
              .cwiseAbs()
              .maxCoeff() < 1e-15);
    CHECK((s.candidates.row(2 * k + 1) - (st.mean.transpose() - 0.25 * s.deltas.row(k)))
              .cwiseAbs()
              .maxCoeff() < 1e-15);
  }
  CHECK_THROWS_AS((void)ars_ask(st, key_from_seed(78), 5), std::invalid_argument);
}

TEST_CASE("ars tell: top-b elite update oracle") {
  ArsState st;
  st.cfg.elites = 1;
  st.cfg.lr = 0.02;
  st.mean = Vec::Zero(3);

  Mat deltas = Mat::Zero(2, 3);
  deltas(0, 0) = 1.0;  // e1
  deltas(1, 1) = 1.0;  // e2
  Vec r_plus(2), r_minus(2);
  r_plus << 2.0, 0.0;
  r_minus << 0.0, 0.0;

  // b=1 elite is direction 0 (score 2); sigma_R over {2,0} = 1;
  // mean += lr/(1*1) * (2-0) * e1 = 0.04 e1.
  CHECK(ars_tell(st, deltas, r_plus, r_minus));
  CHECK(st.mean[0] == doctest::Approx(0.04).epsilon(1e-14));
  CHECK(st.mean[1] == 0.0);
  CHECK(st.mean[2] == 0.0);
}

TEST_CASE("ars tell skips the update when elite rewards are degenerate") {
  ArsState st;
  st.cfg.elites = 2;
  st.mean = Vec::Ones(2);
  Mat deltas = replicate_gaussians(key_from_seed(79), 2, 2);
  const Vec flat = Vec::Constant(2, 3.0);
  CHECK(!ars_tell(st, deltas, flat, flat));
  CHECK(st.mean == Vec::Ones(2));
}

// --------------------------------------------------------------------------- VanillaES

TEST_CASE("canonical es weights") {
  const Vec w2 = canonical_es_weights(2);
  CHECK(w2[0] == doctest::Approx(0.8041628599327295).epsilon(1e-12));
  CHECK(w2[1] == doctest::Approx(0.19583714006727054).epsilon(1e-12));

  const Vec w16 = canonical_es_weights(16);
  CHECK(w16.sum() == doctest::Approx(1.0).epsilon(1e-12));
  for (int i = 1; i < 16; ++i) CHECK(w16[i] < w16[i - 1]);
  CHECK(w16.minCoeff() > 0.0);
}

TEST_CASE("ves tell recombines the top-mu candidates") {
  VesState st;
  st.cfg.elites = 2;
  st.cfg.sigma = 0.1;
  st.mean = Vec::Zero(2);

  Mat cand(4, 2);
  cand << 1, 0, 0, 1, 5, 5, -1, -1;
  Vec fit(4);
  fit << 10.0, 20.0, -5.0, 0.0;  // elites: rows 1 then 0

  ves_tell(st, cand, fit);
  const Vec w = canonical_es_weights(2);
  CHECK(st.mean[0] == doctest::Approx(w[0] * 0.0 + w[1] * 1.0).epsilon(1e-14));
  CHECK(st.mean[1] == doctest::Approx(w[0] * 1.0 + w[1] * 0.0).epsilon(1e-14));
}

TEST_CASE("ves ask mirrors around the current mean") {
  VesState st;
  st.cfg.mirrored = true;
  st.cfg.sigma = 0.3;
  st.mean = Vec::Constant(3, 2.0);
  const Mat cand = ves_ask(st, key_from_seed(80), 10);
  for (int k = 0; k < 5; ++k)
    CHECK((cand.row(k) + cand.row(5 + k) - 2.0 * st.mean.transpose()).cwiseAbs().maxCoeff() <
          1e-12);
}

// --------------------------------------------------------------------------- CMA-ES

TEST_CASE("cma init invariants") {
  CmaConfig cfg;
  cfg.pop = 16;
  cfg.elites = 8;
  cfg.sigma0 = 0.3;
  const CmaState st = CmaState::init(cfg, Vec::Zero(6));
  CHECK(st.sigma == 0.3);
  CHECK(st.C == Mat::Identity(6, 6));
  CHECK(st.D == Vec::Ones(6));
  CHECK(st.weights.size() == 8);
  CHECK(st.weights.sum() == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(st.mueff == doctest::Approx(1.0 / st.weights.squaredNorm()).epsilon(1e-12));
  CHECK(st.chi_n == doctest::Approx(std::sqrt(6.0) * (1.0 - 1.0 / 24.0 + 1.0 / (21.0 * 36.0)))
                        .epsilon(1e-12));

  CmaConfig tiny = cfg;
  tiny.max_dim = 4;
  CHECK_THROWS_AS((void)CmaState::init(tiny, Vec::Zero(6)), std::length_error);
}

TEST_CASE("cma ask equals mean + sigma * B D z with identity covariance") {
  CmaConfig cfg;
  cfg.pop = 8;
  cfg.elites = 4;
  cfg.sigma0 = 0.2;
  Vec mean = Vec::LinSpaced(4, 1.0, 4.0);
  const CmaState st = CmaState::init(cfg, mean);
  const Mat cand = cmaes_ask(st, key_from_seed(81), 8);
  const Mat z = replicate_gaussians(key_from_seed(81), 8, 4);
  CHECK((cand - ((0.2 * z).rowwise() + mean.transpose())).cwiseAbs().maxCoeff() < 1e-14);
}

TEST_CASE("cma keeps C symmetric and D positive across generations") {
  CmaConfig cfg;
  cfg.pop = 12;
  cfg.elites = 6;
  cfg.sigma0 = 0.5;
  CmaState st = CmaState::init(cfg, Vec::Zero(5));
  RandomStream fit_noise(key_from_seed(82));
  for (int gen = 0; gen < 30; ++gen) {
    const Mat cand = cmaes_ask(st, fold_in(key_from_seed(83), gen), cfg.pop);
    Vec fit(cfg.pop);
    for (int i = 0; i < cfg.pop; ++i) fit[i] = -cand.row(i).squaredNorm() + 0.01 * fit_noise.normal();
    cmaes_tell(st, cand, fit);
    CHECK((st.C - st.C.transpose()).cwiseAbs().maxCoeff() < 1e-12);
    CHECK(st.D.minCoeff() > 0.0);
    CHECK(std::isfinite(st.sigma));
  }
  CHECK(st.generation == 30);
}

TEST_CASE("cma solves an offset sphere") {
  CmaConfig cfg;
  cfg.pop = 16;
  cfg.elites = 8;
  cfg.sigma0 = 0.3;
  Vec target(8);
  target << 0.7, -0.3, 0.5, 0.1, -0.8, 0.25, -0.4, 0.6;
  CmaState st = CmaState::init(cfg, Vec::Zero(8));
  const RngKey root = key_from_seed(84);
  for (int gen = 0; gen < 200; ++gen) {
    const Mat cand = cmaes_ask(st, fold_in(root, gen), cfg.pop);
    Vec fit(cfg.pop);
    for (int i = 0; i < cfg.pop; ++i) fit[i] = -(cand.row(i).transpose() - target).squaredNorm();
    cmaes_tell(st, cand, fit);
  }
  CHECK((st.mean - target).norm() < 1e-3);
}

// --------------------------------------------------------------------------- CEM

TEST_CASE("cem noise floor decays geometrically and clamps") {
  CemConfig cfg;
  cfg.noise_start = 1e-3;
  cfg.noise_end = 1e-5;
  cfg.decay_iters = 100;
  CemState st = CemState::init(cfg, Vec::Zero(2));
  CHECK(st.noise_floor() == doctest::Approx(1e-3).epsilon(1e-12));
  st.iter = 50;
  CHECK(st.noise_floor() == doctest::Approx(1e-4).epsilon(1e-10));  // geometric midpoint
  st.iter = 100;
  CHECK(st.noise_floor() == doctest::Approx(1e-5).epsilon(1e-12));
  st.iter = 1000;
  CHECK(st.noise_floor() == doctest::Approx(1e-5).epsilon(1e-12));
}

TEST_CASE("cem tell refits mean and variance on the elites") {
  CemConfig cfg;
  cfg.elites = 2;
  cfg.noise_start = 1e-3;
  cfg.noise_end = 1e-3;  // constant floor keeps the oracle simple
  CemState st = CemState::init(cfg, Vec::Zero(2));

  Mat cand(4, 2);
  cand << 1, 2, 3, 6, -10, -10, 0, 0;
  Vec fit(4);
  fit << 5.0, 6.0, -50.0, 0.0;  // elites: rows 1, 0
  cem_tell(st, cand, fit);

  CHECK(st.mean[0] == doctest::Approx(2.0).epsilon(1e-14));  // (3+1)/2
  CHECK(st.mean[1] == doctest::Approx(4.0).epsilon(1e-14));  // (6+2)/2
  // population variance of {3,1} = 1, of {6,2} = 4, plus the 1e-3 floor
  CHECK(st.diag_var[0] == doctest::Approx(1.0 + 1e-3).epsilon(1e-12));
  CHECK(st.diag_var[1] == doctest::Approx(4.0 + 1e-3).epsilon(1e-12));
  CHECK(st.iter == 1);
}

TEST_CASE("cem ask scales independent normals by the diagonal std") {
  CemConfig cfg;
  CemState st = CemState::init(cfg, Vec::Zero(3));
  st.mean << 1.0, 2.0, 3.0;
  st.diag_var << 4.0, 0.25, 1.0;
  const Mat cand = cem_ask(st, key_from_seed(85), 5);
  const Mat z = replicate_gaussians(key_from_seed(85), 5, 3);
  for (int i = 0; i < 5; ++i)
    for (int j = 0; j < 3; ++j)
      CHECK(cand(i, j) ==
            doctest::Approx(st.mean[j] + std::sqrt(st.diag_var[j]) * z(i, j)).epsilon(1e-14));
}

TEST_CASE("cem contracts onto a sphere optimum") {
  CemConfig cfg;
  cfg.pop = 32;
  cfg.elites = 8;
  cfg.var_init = 1.0;
  cfg.noise_start = 1e-6;
  cfg.noise_end = 1e-8;
  cfg.decay_iters = 50;
  Vec target = Vec::Constant(4, 0.5);
  CemState st = CemState::init(cfg, Vec::Zero(4));
  const RngKey root = key_from_seed(86);
  for (int it = 0; it < 60; ++it) {
    const Mat cand = cem_ask(st, fold_in(root, it), cfg.pop);
    Vec fit(cfg.pop);
    for (int i = 0; i < cfg.pop; ++i) fit[i] = -(cand.row(i).transpose() - target).squaredNorm();
    cem_tell(st, cand, fit);
  }
  CHECK((st.mean - target).norm() < 0.05);
  CHECK(st.diag_var.maxCoeff() < 0.01);
}

// --------------------------------------------------------------------------- genetic ops

TEST_CASE("tournament with k=n returns the argmax, ties to the lowest index") {
  Vec fit(5);
  fit << 1.0, 9.0, 9.0, 3.0, -2.0;
  RandomStream st(key_from_seed(87));
  for (int i = 0; i < 20; ++i) CHECK(tournament_select(fit, st, 5) == 1);
}

TEST_CASE("tournament draws k distinct members and prefers fitter ones") {
  Vec fit(10);
  for (int i = 0; i < 10; ++i) fit[i] = i;  // best is index 9
  RandomStream st(key_from_seed(88));
  int wins9 = 0;
  for (int i = 0; i < 3000; ++i) {
    const int pick = tournament_select(fit, st, 3);
    CHECK(pick >= 0);
    CHECK(pick < 10);
    wins9 += pick == 9;
  }
  // P(9 in the 3 distinct draws) = 1 - C(9,3)/C(10,3) = 0.3.
  CHECK(wins9 > 3000 * 0.25);
  CHECK(wins9 < 3000 * 0.35);
  // Index 0 can never win a 3-tournament of distinct members.
  RandomStream st2(key_from_seed(89));
  for (int i = 0; i < 1000; ++i) CHECK(tournament_select(fit, st2, 3) != 0);
}

TEST_CASE("gaussian mutate") {
  Vec p = Vec::LinSpaced(64, 0.0, 6.3);
  RandomStream st(key_from_seed(90));
  CHECK(gaussian_mutate(p, st, 0.5, 0.0) == p);  // prob 0 is the identity

  RandomStream st2(key_from_seed(91));
  int changed = 0;
  Vec big = Vec::Zero(20000);
  const Vec mutated = gaussian_mutate(big, st2, 0.1, 0.3);
  double sum = 0.0, sq = 0.0;
  int nmut = 0;
  for (Eigen::Index i = 0; i < big.size(); ++i) {
    if (mutated[i] != 0.0) {
      ++nmut;
      sum += mutated[i];
      sq += mutated[i] * mutated[i];
    }
  }
  changed = nmut;
  CHECK(changed > 20000 * 0.27);
  CHECK(changed < 20000 * 0.33);
  const double mean = sum / nmut;
  CHECK(std::abs(mean) < 0.01);
  CHECK(std::abs(std::sqrt(sq / nmut - mean * mean) - 0.1) < 0.01);
}

TEST_CASE("uniform crossover mixes coordinates from both parents") {
  const Vec a = Vec::Constant(10000, 1.0);
  const Vec b = Vec::Constant(10000, 2.0);
  RandomStream st(key_from_seed(92));
  const Vec child = uniform_crossover(a, b, st);
  int from_a = 0;
  for (Eigen::Index i = 0; i < child.size(); ++i) {
    CHECK((child[i] == 1.0 || child[i] == 2.0));
    from_a += child[i] == 1.0;
  }
  CHECK(from_a > 4700);
  CHECK(from_a < 5300);
  CHECK_THROWS_AS((void)uniform_crossover(a, Vec::Zero(3), st), std::invalid_argument);
}
