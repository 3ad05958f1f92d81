#pragma once

#include "evorl/net.hpp"
#include "evorl/optim.hpp"
#include "evorl/rng.hpp"
#include "evorl/sample_batch.hpp"

namespace evorl {

struct PpoHyper {
  double clip_eps = 0.2;
  double actor_weight = 1.0;
  double critic_weight = 0.5;
  double entropy_weight = -0.01;
  double gamma = 0.99;
  double gae_lambda = 0.95;
  double lr = 3e-4;
  double max_grad_norm = 10.0;
  int epochs = 4;
  int minibatch_size = 256;
};

struct PpoAgent {
  MlpSpec actor_spec, critic_spec;
  ParamVector actor, critic;
  AdamState actor_adam, critic_adam;
};

PpoAgent ppo_init(const MlpSpec& actor_spec, const MlpSpec& critic_spec, RngKey key);

struct PpoLoss {
  double total = 0.0;
  double actor = 0.0;    // clipped surrogate term (unweighted)
  double critic = 0.0;   // half mean squared value error (unweighted)
  double entropy = 0.0;  // mean policy entropy (unweighted)
  ParamVector actor_grad, critic_grad;  // d(total)/d(params)
};

// total = actor_weight*actor + critic_weight*critic + entropy_weight*entropy.
// mb needs obs, actions, logp (behavior), advantages, returns.
PpoLoss ppo_loss(const PpoAgent& agent, const SampleBatch& mb, const PpoHyper& hp);

struct PpoUpdateStats {
  double loss = 0.0, actor_loss = 0.0, critic_loss = 0.0, entropy = 0.0;
  double grad_norm = 0.0;  // mean pre-clip joint norm
  int minibatches = 0;
  bool aborted_non_finite = false;
};

// Standardizes advantages over the whole batch, then hp.epochs passes of
// shuffled minibatches (epoch e shuffles with fold_in(key, e)); actor and
// critic gradients are clipped jointly by global norm, then stepped by
// separate Adam moments. A non-finite loss or gradient aborts the remaining
// updates and sets the flag.
PpoUpdateStats ppo_update(PpoAgent& agent, SampleBatch batch, const PpoHyper& hp, RngKey key);

}  // namespace evorl
