#pragma once

#include <cstdint>
#include <vector>

#include "evorl/net.hpp"

namespace evorl {

// Generalized advantage estimation over one trajectory segment.
// values has T+1 entries (bootstrap value last); terminals masks true episode
// ends (terminations, not truncations — truncated segments bootstrap through
// their final value). returns = advantages + values[0..T).
void gae(const Vec& rewards, const Vec& values, const std::vector<std::uint8_t>& terminals,
         double gamma, double lambda, Vec& advantages, Vec& returns);

}  // namespace evorl
