#include <doctest.h>

#include <cmath>

#include "evorl/optim.hpp"

using namespace evorl;

TEST_CASE("adam first step moves by lr per coordinate") {
  // With zero moments, m_hat = g and v_hat = g^2, so the first update is
  // -lr * g / (|g| + eps) ~= -lr * sign(g) regardless of magnitude.
  ParamVector p(3);
  p << 1.0, -2.0, 0.5;
  ParamVector g(3);
  g << 100.0, -0.001, 4.0;
  AdamState st = AdamState::zeros(3);
  AdamConfig cfg;
  cfg.lr = 0.1;

  adam_step(p, g, st, cfg);
  CHECK(st.t == 1);
  CHECK(p[0] == doctest::Approx(1.0 - 0.1 * (100.0 / (100.0 + 1e-8))).epsilon(1e-12));
  CHECK(p[1] == doctest::Approx(-2.0 + 0.1 * (0.001 / (0.001 + 1e-8))).epsilon(1e-12));
  CHECK(p[2] == doctest::Approx(0.5 - 0.1 * (4.0 / (4.0 + 1e-8))).epsilon(1e-12));
}

TEST_CASE("adam two steps match a hand-rolled reference") {
  ParamVector p(2);
  p << 0.3, -0.7;
  AdamState st = AdamState::zeros(2);
  AdamConfig cfg;
  cfg.lr = 0.01;

  Vec m = Vec::Zero(2), v = Vec::Zero(2);
  Vec q = p;
  const Vec g1 = (Vec(2) << 0.5, -1.5).finished();
  const Vec g2 = (Vec(2) << -0.25, 2.0).finished();
  int t = 0;
  for (const Vec& g : {g1, g2}) {
    ++t;
    m = 0.9 * m + 0.1 * g;
    v = 0.999 * v + 0.001 * g.cwiseProduct(g);
    const Vec mh = m / (1.0 - std::pow(0.9, t));
    const Vec vh = v / (1.0 - std::pow(0.999, t));
    q -= 0.01 * (mh.array() / (vh.array().sqrt() + 1e-8)).matrix();
  }

  adam_step(p, g1, st, cfg);
  adam_step(p, g2, st, cfg);
  CHECK((p - q).cwiseAbs().maxCoeff() < 1e-15);
}

TEST_CASE("decoupled weight decay shrinks params outside the moments") {
  ParamVector p(1);
  p << 2.0;
  ParamVector g(1);
  g << 0.0;
  AdamState st = AdamState::zeros(1);
  AdamConfig cfg;
  cfg.lr = 0.5;
  cfg.weight_decay = 0.1;

  adam_step(p, g, st, cfg);
  // Zero gradient: the only movement is -lr * wd * p = -0.5*0.1*2 = -0.1.
  CHECK(p[0] == doctest::Approx(2.0 - 0.1).epsilon(1e-12));
  CHECK(st.m[0] == 0.0);
  CHECK(st.v[0] == 0.0);
}

TEST_CASE("adam converges on a quadratic") {
  ParamVector p(2);
  p << 5.0, -3.0;
  AdamState st = AdamState::zeros(2);
  AdamConfig cfg;
  cfg.lr = 0.05;
  for (int i = 0; i < 2000; ++i) {
    const ParamVector g = 2.0 * p;  // d/dp of |p|^2
    adam_step(p, g, st, cfg);
  }
  CHECK(p.cwiseAbs().maxCoeff() < 1e-3);
}

TEST_CASE("sgd step") {
  ParamVector p(2);
  p << 1.0, 2.0;
  ParamVector g(2);
  g << 0.5, -0.5;
  sgd_step(p, g, 0.2);
  CHECK(p[0] == doctest::Approx(0.9).epsilon(1e-15));
  CHECK(p[1] == doctest::Approx(2.1).epsilon(1e-15));
}

TEST_CASE("global grad norm and joint clipping") {
  ParamVector a(2), b(1);
  a << 3.0, 0.0;
  b << 4.0;
  CHECK(global_grad_norm({&a, &b}) == doctest::Approx(5.0).epsilon(1e-15));

  // Norm above the cap: both vectors scale by max_norm/norm together.
  double pre = clip_global_grad_norm({&a, &b}, 1.0);
  CHECK(pre == doctest::Approx(5.0).epsilon(1e-15));
  CHECK(a[0] == doctest::Approx(0.6).epsilon(1e-12));
  CHECK(b[0] == doctest::Approx(0.8).epsilon(1e-12));
  CHECK(global_grad_norm({&a, &b}) == doctest::Approx(1.0).epsilon(1e-12));

  // Norm already under the cap: untouched.
  pre = clip_global_grad_norm({&a, &b}, 10.0);
  CHECK(pre == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(a[0] == doctest::Approx(0.6).epsilon(1e-12));
}
