#pragma once

#include <functional>

#include "gpsmem/env.hpp"
#include "gpsmem/policy.hpp"
#include "gpsmem/rng.hpp"
#include "gpsmem/trajectory.hpp"

namespace gpsmem {

// Memory-state augmentation of an environment: the state, observation, and
// action are each extended with d_h memory coordinates. Memory evolves by
// h' = h + m + noise, noise ~ N(0, sigma2 I).
struct AugmentedSpec {
  int d_x = 0, d_u = 0, d_o = 0, T = 0;
  int d_h = 0;
  double sigma2 = 1e-6;

  AugmentedSpec() = default;
  AugmentedSpec(const EnvSpec& base, int memory_dim, double noise_var = 1e-6)
      : d_x(base.d_x), d_u(base.d_u), d_o(base.d_o), T(base.T),
        d_h(memory_dim), sigma2(noise_var) {}

  int d_xa() const { return d_x + d_h; }
  int d_ua() const { return d_u + d_h; }
  int d_oa() const { return d_o + d_h; }
};

VectorXd memory_step(const VectorXd& h, const VectorXd& m,
                     const VectorXd& noise);

// Chooses the augmented action given the step index, augmented state, and
// augmented observation. Controllers read the state, policies the observation.
using Actor = std::function<VectorXd(int t, const VectorXd& x_aug,
                                     const VectorXd& o_aug, Rng& rng)>;

Actor controller_actor(const TimeVaryingController& ctrl, bool stochastic);
Actor policy_actor(const MemoryPolicy& policy, bool stochastic);

// One rollout over the augmented spaces. Memory starts at zero; costs depend
// only on the physical components.
TrajectorySample augment_rollout(const Environment& env,
                                 const AugmentedSpec& aspec, const Actor& actor,
                                 int cond, Rng& rng,
                                 bool zero_memory_noise = false);

// Recurrent view of a memory policy: output function phi(o, h) -> u and
// memory map psi(o, h) -> h'.
struct RnnView {
  std::function<VectorXd(const VectorXd& o, const VectorXd& h)> output;
  std::function<VectorXd(const VectorXd& o, const VectorXd& h)> next_memory;
};

RnnView rnn_view(const MemoryPolicy& policy, int d_u, int d_h);

}  // namespace gpsmem
