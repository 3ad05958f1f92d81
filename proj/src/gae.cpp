#include "evorl/gae.hpp"

#include <stdexcept>

namespace evorl {

void gae(const Vec& rewards, const Vec& values, const std::vector<std::uint8_t>& terminals,
         double gamma, double lambda, Vec& advantages, Vec& returns) {
  const auto T = rewards.size();
  if (T == 0) throw std::invalid_argument("gae: empty segment");
  if (values.size() != T + 1 || static_cast<Eigen::Index>(terminals.size()) != T)
    throw std::invalid_argument("gae: shape mismatch");

  advantages.resize(T);
  returns.resize(T);
  double acc = 0.0;
  for (Eigen::Index t = T - 1; t >= 0; --t) {
    const double mask = terminals[t] ? 0.0 : 1.0;
    const double delta = rewards[t] + gamma * mask * values[t + 1] - values[t];
    acc = delta + gamma * lambda * mask * acc;
    advantages[t] = acc;
    returns[t] = acc + values[t];
  }
}

}  // namespace evorl
