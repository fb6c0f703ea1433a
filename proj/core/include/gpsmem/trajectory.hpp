#pragma once

#include <Eigen/Dense>
#include <numeric>
#include <vector>

namespace gpsmem {

using Eigen::MatrixXd;
using Eigen::VectorXd;

// Per-time-step affine-Gaussian control law u_t ~ N(K_t x_t + k_t, C_t).
// Time indices run 0..T-1 throughout the codebase.
struct TimeVaryingController {
  std::vector<MatrixXd> K;
  std::vector<VectorXd> k;
  std::vector<MatrixXd> C;

  int horizon() const { return static_cast<int>(K.size()); }
  int action_dim() const { return K.empty() ? 0 : static_cast<int>(K[0].rows()); }
  int state_dim() const { return K.empty() ? 0 : static_cast<int>(K[0].cols()); }

  static TimeVaryingController zero_init(int T, int d_x, int d_u,
                                         double cov_scale);
};

// Per-time-step affine-Gaussian transition model
// x_{t+1} ~ N(f_x x_t + f_u u_t + f_c, F), with T-1 entries.
struct LinearDynamics {
  std::vector<MatrixXd> fx;
  std::vector<MatrixXd> fu;
  std::vector<VectorXd> fc;
  std::vector<MatrixXd> F;

  int steps() const { return static_cast<int>(fx.size()); }
  int state_dim() const { return fx.empty() ? 0 : static_cast<int>(fx[0].rows()); }
  int action_dim() const { return fu.empty() ? 0 : static_cast<int>(fu[0].cols()); }
};

// One rollout. For augmented rollouts, states/observations/actions hold the
// concatenated physical + memory vectors.
struct TrajectorySample {
  std::vector<VectorXd> states;
  std::vector<VectorXd> observations;
  std::vector<VectorXd> actions;
  std::vector<double> costs;

  int horizon() const { return static_cast<int>(states.size()); }
  double total_cost() const {
    return std::accumulate(costs.begin(), costs.end(), 0.0);
  }
};

inline TimeVaryingController TimeVaryingController::zero_init(
    int T, int d_x, int d_u, double cov_scale) {
  TimeVaryingController c;
  c.K.assign(T, MatrixXd::Zero(d_u, d_x));
  c.k.assign(T, VectorXd::Zero(d_u));
  c.C.assign(T, cov_scale * MatrixXd::Identity(d_u, d_u));
  return c;
}

}  // namespace gpsmem
