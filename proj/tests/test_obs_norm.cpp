#include <doctest.h>

#include <cmath>

#include "evorl/obs_norm.hpp"
#include "evorl/rng.hpp"

using namespace evorl;

namespace {

Mat random_rows(int n, int dim, RngKey key, double shift = 0.0, double scale = 1.0) {
  RandomStream st(key);
  Mat rows(n, dim);
  for (int r = 0; r < n; ++r)
    for (int c = 0; c < dim; ++c) rows(r, c) = shift + scale * st.normal();
  return rows;
}

}  // namespace

TEST_CASE("welford matches the two-pass formula") {
  const Mat rows = random_rows(997, 3, key_from_seed(1), 5.0, 2.5);
  WelfordStats w;
  for (int r = 0; r < rows.rows(); ++r) w.add(rows.row(r).transpose());

  const Vec mean = rows.colwise().mean().transpose();
  Vec var = Vec::Zero(3);
  for (int r = 0; r < rows.rows(); ++r)
    var += (rows.row(r).transpose() - mean).array().square().matrix();
  var /= rows.rows();

  CHECK(w.count == 997.0);
  CHECK((w.mean - mean).cwiseAbs().maxCoeff() < 1e-8);
  CHECK((w.variance() - var).cwiseAbs().maxCoeff() < 1e-8);
}

TEST_CASE("welford merge equals a single pass over the union") {
  const Mat a = random_rows(300, 2, key_from_seed(2), -1.0, 0.5);
  const Mat b = random_rows(17, 2, key_from_seed(3), 8.0, 3.0);

  WelfordStats whole;
  for (int r = 0; r < a.rows(); ++r) whole.add(a.row(r).transpose());
  for (int r = 0; r < b.rows(); ++r) whole.add(b.row(r).transpose());

  WelfordStats wa, wb;
  for (int r = 0; r < a.rows(); ++r) wa.add(a.row(r).transpose());
  for (int r = 0; r < b.rows(); ++r) wb.add(b.row(r).transpose());
  wa.merge(wb);

  CHECK(wa.count == whole.count);
  CHECK((wa.mean - whole.mean).cwiseAbs().maxCoeff() < 1e-10);
  CHECK((wa.variance() - whole.variance()).cwiseAbs().maxCoeff() < 1e-8);

  // Merging into an empty accumulator is a copy.
  WelfordStats empty;
  empty.merge(wb);
  CHECK(empty.count == wb.count);
  CHECK((empty.mean - wb.mean).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("normalize: None is identity, stats modes standardize") {
  const ObsNormState none = ObsNormState::none();
  Vec obs(3);
  obs << 1.0, -2.0, 7.0;
  CHECK(normalize(none, obs) == obs);

  const Mat rows = random_rows(5000, 3, key_from_seed(4), 3.0, 4.0);
  WelfordStats w;
  for (int r = 0; r < rows.rows(); ++r) w.add(rows.row(r).transpose());
  const ObsNormState st = ObsNormState::from_stats(ObsNormMode::VBN, w);

  const Mat normed = normalize_rows(st, rows);
  for (int c = 0; c < 3; ++c) {
    const double mean = normed.col(c).mean();
    const double var = normed.col(c).array().square().mean() - mean * mean;
    CHECK(std::abs(mean) < 1e-6);
    CHECK(std::abs(std::sqrt(var) - 1.0) < 1e-6);
  }

  // Row and batch paths agree bitwise.
  for (int r = 0; r < 10; ++r)
    CHECK(normalize(st, rows.row(r).transpose()) == normed.row(r).transpose());
}

TEST_CASE("normalize guards zero variance") {
  WelfordStats w;
  Vec same(2);
  same << 4.0, -1.0;
  for (int i = 0; i < 10; ++i) w.add(same);
  const ObsNormState st = ObsNormState::from_stats(ObsNormMode::VBN, w);
  const Vec out = normalize(st, same);
  CHECK(std::isfinite(out[0]));
  CHECK(out.cwiseAbs().maxCoeff() == 0.0);  // (x - x) / max(0, 1e-8)
}

TEST_CASE("running stats accumulate across updates like one big batch") {
  const Mat all = random_rows(600, 4, key_from_seed(5), -2.0, 1.7);

  ObsNormState rs = ObsNormState::running_stats(4);
  CHECK(rs.mode == ObsNormMode::RunningStats);
  CHECK(rs.count == 0.0);
  rs_update(rs, Mat(all.topRows(100)));
  rs_update(rs, Mat(all.middleRows(100, 250)));
  rs_update(rs, Mat(all.bottomRows(250)));

  WelfordStats w;
  for (int r = 0; r < all.rows(); ++r) w.add(all.row(r).transpose());
  const ObsNormState ref = ObsNormState::from_stats(ObsNormMode::RunningStats, w);

  CHECK(rs.count == 600.0);
  CHECK((rs.mean - ref.mean).cwiseAbs().maxCoeff() < 1e-10);
  CHECK((rs.var - ref.var).cwiseAbs().maxCoeff() < 1e-8);
}

TEST_CASE("fresh running stats normalize to identity-ish defaults") {
  // Before any update the state must still be usable: mean 0, var 1.
  const ObsNormState rs = ObsNormState::running_stats(2);
  Vec obs(2);
  obs << 3.0, -3.0;
  CHECK(normalize(rs, obs) == obs);
}
