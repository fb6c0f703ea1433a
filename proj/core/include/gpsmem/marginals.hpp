#pragma once

#include <vector>

#include "gpsmem/gaussian.hpp"
#include "gpsmem/trajectory.hpp"

namespace gpsmem {

struct Marginals {
  std::vector<Gaussian> state;         // T entries
  std::vector<Gaussian> state_action;  // T entries, joint over (x_t, u_t)
};

// Exact propagation of the trajectory distribution induced by an affine
// Gaussian controller under affine Gaussian dynamics.
Marginals forward_marginals(const LinearDynamics& dyn,
                            const TimeVaryingController& ctrl,
                            const Gaussian& init);

}  // namespace gpsmem
