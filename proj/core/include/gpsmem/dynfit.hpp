#pragma once

#include <vector>

#include "gpsmem/trajectory.hpp"

namespace gpsmem {

// Time-varying linear-Gaussian dynamics regression with a pooled
// normal-inverse-Wishart style prior: statistics of all (x_t, u_t, x_{t+1})
// tuples across time steps, prior strength = one effective sample.
//
// Samples may live in larger (augmented) spaces; only the first d_x state
// and d_u action coordinates are used.
LinearDynamics fit_dynamics(const std::vector<TrajectorySample>& samples,
                            int d_x, int d_u, double prior_strength = 1.0);

// Impose the exact memory-block structure on a physical fit. Memory rows are
// analytic (identity transition, identity write gain, sigma2 noise), never
// estimated from data.
LinearDynamics augment_fit(const LinearDynamics& physical, int d_h,
                           double sigma2);

}  // namespace gpsmem
