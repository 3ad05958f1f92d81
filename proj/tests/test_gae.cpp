#include <doctest.h>

#include <cstdint>
#include <vector>

#include "evorl/gae.hpp"
#include "evorl/rng.hpp"

using namespace evorl;

namespace {

// O(T^2) reference: A_t = sum_{l>=0} (gamma*lambda)^l delta_{t+l}, with the
// sum cut at the first terminal at or after t. delta_t = r_t + gamma *
// (1-term_t) * V_{t+1} - V_t.
void gae_reference(const Vec& rewards, const Vec& values,
                   const std::vector<std::uint8_t>& terminals, double gamma, double lambda,
                   Vec& advantages, Vec& returns) {
  const Eigen::Index T = rewards.size();
  advantages.resize(T);
  returns.resize(T);
  for (Eigen::Index t = 0; t < T; ++t) {
    double acc = 0.0, w = 1.0;
    for (Eigen::Index l = t; l < T; ++l) {
      const double not_term = terminals[l] ? 0.0 : 1.0;
      acc += w * (rewards[l] + gamma * not_term * values[l + 1] - values[l]);
      if (terminals[l]) break;
      w *= gamma * lambda;
    }
    advantages[t] = acc;
    returns[t] = acc + values[t];
  }
}

struct Fixture {
  Vec rewards, values;
  std::vector<std::uint8_t> terminals;
};

Fixture random_fixture(RandomStream& st) {
  Fixture f;
  const int T = 1 + static_cast<int>(st.randint(40));
  f.rewards.resize(T);
  f.values.resize(T + 1);
  f.terminals.resize(T);
  for (int t = 0; t < T; ++t) {
    f.rewards[t] = st.normal() * 2.0;
    f.terminals[t] = st.uniform() < 0.2;
  }
  for (int t = 0; t <= T; ++t) f.values[t] = st.normal();
  return f;
}

}  // namespace

TEST_CASE("lambda=0 reduces to one-step TD errors") {
  Vec rewards(3), values(4);
  rewards << 1.0, -0.5, 2.0;
  values << 0.3, 0.7, -0.2, 1.1;
  std::vector<std::uint8_t> terminals = {0, 0, 0};
  Vec adv, ret;
  gae(rewards, values, terminals, 0.9, 0.0, adv, ret);
  for (int t = 0; t < 3; ++t) {
    const double delta = rewards[t] + 0.9 * values[t + 1] - values[t];
    CHECK(adv[t] == doctest::Approx(delta).epsilon(1e-14));
    CHECK(ret[t] == doctest::Approx(delta + values[t]).epsilon(1e-14));
  }
}

TEST_CASE("lambda=1 gives discounted Monte-Carlo minus baseline") {
  Vec rewards(4), values(5);
  rewards << 1.0, 2.0, 3.0, 4.0;
  values << 0.5, -0.5, 0.25, 1.0, 2.0;
  std::vector<std::uint8_t> terminals = {0, 0, 0, 0};
  const double g = 0.95;
  Vec adv, ret;
  gae(rewards, values, terminals, g, 1.0, adv, ret);
  for (int t = 0; t < 4; ++t) {
    double mc = 0.0, w = 1.0;
    for (int l = t; l < 4; ++l) {
      mc += w * rewards[l];
      w *= g;
    }
    mc += w * values[4];  // bootstrap tail
    CHECK(adv[t] == doctest::Approx(mc - values[t]).epsilon(1e-12));
    CHECK(ret[t] == doctest::Approx(mc).epsilon(1e-12));
  }
}

TEST_CASE("gamma=lambda=1, zero values: returns are reversed cumulative sums") {
  Vec rewards(5), values = Vec::Zero(6);
  rewards << 1.0, 1.0, 1.0, 1.0, 1.0;
  std::vector<std::uint8_t> terminals = {0, 0, 0, 0, 0};
  Vec adv, ret;
  gae(rewards, values, terminals, 1.0, 1.0, adv, ret);
  for (int t = 0; t < 5; ++t) CHECK(ret[t] == doctest::Approx(5.0 - t).epsilon(1e-14));
}

TEST_CASE("terminal masking cuts the accumulation and the bootstrap") {
  Vec rewards(4), values(5);
  rewards << 1.0, 1.0, 1.0, 1.0;
  values << 0.1, 0.2, 0.3, 0.4, 99.0;  // large tail value must not leak past terminal
  std::vector<std::uint8_t> terminals = {0, 1, 0, 0};
  const double g = 0.9, lam = 0.8;
  Vec adv, ret;
  gae(rewards, values, terminals, g, lam, adv, ret);

  // t=1 is terminal: A_1 = r_1 - V_1.
  CHECK(adv[1] == doctest::Approx(1.0 - 0.2).epsilon(1e-14));
  // t=0 accumulates only delta_0 + g*lam*delta_1.
  const double d0 = 1.0 + g * 0.2 - 0.1;
  const double d1 = 1.0 - 0.2;
  CHECK(adv[0] == doctest::Approx(d0 + g * lam * d1).epsilon(1e-14));
  // The segment after the terminal restarts cleanly.
  const double d3 = 1.0 + g * 99.0 - 0.4;
  const double d2 = 1.0 + g * 0.4 - 0.3;
  CHECK(adv[3] == doctest::Approx(d3).epsilon(1e-12));
  CHECK(adv[2] == doctest::Approx(d2 + g * lam * d3).epsilon(1e-12));
}

TEST_CASE("truncation is not masked: the caller bootstraps through values") {
  // A segment cut by truncation carries no terminal flag; the tail value
  // enters the last delta like any mid-episode step.
  Vec rewards(2), values(3);
  rewards << 1.0, 1.0;
  values << 0.0, 0.0, 10.0;
  std::vector<std::uint8_t> terminals = {0, 0};
  Vec adv, ret;
  gae(rewards, values, terminals, 0.5, 1.0, adv, ret);
  CHECK(adv[1] == doctest::Approx(1.0 + 0.5 * 10.0).epsilon(1e-14));
}

TEST_CASE("matches the quadratic reference on 200 random instances") {
  RandomStream st(key_from_seed(2024));
  for (int i = 0; i < 200; ++i) {
    CAPTURE(i);
    const Fixture f = random_fixture(st);
    const double gamma = st.uniform(0.5, 1.0);
    const double lambda = st.uniform(0.0, 1.0);
    Vec adv, ret, radv, rret;
    gae(f.rewards, f.values, f.terminals, gamma, lambda, adv, ret);
    gae_reference(f.rewards, f.values, f.terminals, gamma, lambda, radv, rret);
    REQUIRE(adv.size() == radv.size());
    CHECK((adv - radv).cwiseAbs().maxCoeff() < 1e-10);
    CHECK((ret - rret).cwiseAbs().maxCoeff() < 1e-10);
    CHECK((ret - (adv + f.values.head(adv.size()))).cwiseAbs().maxCoeff() < 1e-12);
  }
}
