#pragma once

#include <cstdint>
#include <limits>
#include <vector>

#include "gpsmem/affine_fit.hpp"
#include "gpsmem/dynfit.hpp"
#include "gpsmem/env.hpp"
#include "gpsmem/memory.hpp"
#include "gpsmem/policy.hpp"
#include "gpsmem/trajopt.hpp"

namespace gpsmem {

struct GpsOptions {
  int num_samples = 5;        // rollouts per condition per iteration
  int inner_iters = 4;        // alternating C/S steps per outer iteration
  int outer_iters = 30;

  double eps_init = 1.0;      // trust region, nats per trajectory
  double eps_min = 0.1;
  double eps_max = 10.0;
  double eps_grow = 1.5;
  double eps_shrink = 0.5;
  double eps_tolerance = 0.0;  // relative cost slack before shrinking

  double nu_init = 0.01;      // policy-agreement weight schedule
  double nu_growth = 2.0;
  double nu_cap = 10.0;

  double lambda_rate = 0.1;   // dual step on mean disagreement

  double ctrl_cov_min = 1e-12;  // eigenvalue band on teacher exploration
  double ctrl_cov_max = 1e12;
  double mem_cov_max = 1e12;    // cap on the memory-write exploration block
  double glue_cov_min = 1e-12;  // floor on the linearized-policy covariance
                                // inside the C-step agreement penalty
  double pol_cov_floor = 1e-12;  // eigenvalue floor on the policy action
                                 // covariance after each S-step
  double train_prec_cap = 1e12;  // eigenvalue cap on S-step precision weights
  int cold_start_until = 0;  // refit the policy from fresh weights at the
                             // start of each outer iteration below this index

  double init_ctrl_cov = 0.1;
  double init_mem_cov = 0.1;  // initial exploration on the memory-write head
  double action_reg = 1e-4;   // quadratic effort on the full augmented action
  double memory_reg = 1e-2;   // extra quadratic effort on memory writes
  double lin_ridge = 1e-6;    // policy linearization regularizer
  double dyn_prior_strength = 1.0;

  std::vector<int> hidden{10};
  TrainOptions train;
  std::uint64_t seed = 0;
};

struct ConditionState {
  TimeVaryingController ctrl;
  std::vector<VectorXd> lambda;           // per t, d_ua
  std::vector<TrajectorySample> samples;  // current iteration's rollouts
  LinearDynamics dyn;                     // augmented fit
  double mean_sample_cost = 0.0;
};

struct IterationMetrics {
  int iter = 0;
  int cumulative_samples = 0;
  double mean_sample_cost = 0.0;
  double mean_agreement_kl = 0.0;  // traj KL between teachers and linearized policy
  double eps = 0.0;
  double nu = 0.0;
  std::vector<double> distances;   // evaluation metric per condition
};

// N augmented rollouts executing u ~ ctrl(.|x_aug).
std::vector<TrajectorySample> collect_samples(const Environment& env,
                                              const AugmentedSpec& aspec,
                                              const TimeVaryingController& ctrl,
                                              int cond, int n, Rng& rng);

// lambda_t += rate * nu_t * mean_j(policy_mean(o_t^j) - ctrl_mean(x_t^j))
void dual_update(std::vector<VectorXd>& lambda, const std::vector<double>& nu,
                 const std::vector<TrajectorySample>& samples,
                 const TimeVaryingController& ctrl, const MemoryPolicy& policy,
                 double rate);

// nu starts at nu_init, doubles each outer iteration, capped.
void nu_schedule(std::vector<double>& nu, double growth, double cap);

class GpsRun {
 public:
  GpsRun(const Environment& env, AugmentedSpec aspec, GpsOptions opt);

  IterationMetrics outer_iteration();
  std::vector<double> evaluate() const;  // zero-exploration metric per condition

  const Environment& env() const { return env_; }
  const AugmentedSpec& aspec() const { return aspec_; }
  const GpsOptions& options() const { return opt_; }

  std::vector<ConditionState>& conditions() { return conds_; }
  const std::vector<ConditionState>& conditions() const { return conds_; }
  MemoryPolicy& policy() { return policy_; }
  const MemoryPolicy& policy() const { return policy_; }
  std::vector<double>& nu() { return nu_; }
  const std::vector<double>& nu() const { return nu_; }
  double& eps() { return eps_; }
  double eps() const { return eps_; }
  int& iteration() { return iter_; }
  int iteration() const { return iter_; }
  double& prev_cost() { return prev_cost_; }
  double prev_cost() const { return prev_cost_; }
  bool& normalization_frozen() { return norm_frozen_; }
  bool normalization_frozen() const { return norm_frozen_; }

  // Affine-Gaussian view of the current policy along one condition's samples.
  TimeVaryingController policy_linearization(int cond) const;

 private:
  QuadCostExpansion augmented_cost_expansion(int cond) const;

  const Environment& env_;
  AugmentedSpec aspec_;
  GpsOptions opt_;
  std::vector<ConditionState> conds_;
  MemoryPolicy policy_;
  std::vector<double> nu_;
  double eps_;
  int iter_ = 0;
  double prev_cost_ = 0.0;
  bool norm_frozen_ = false;
};

// ---- reward-weighted regression baseline ----

struct LinearPolicy {
  MatrixXd W;   // d_ua x d_oa
  VectorXd b;
  MatrixXd cov; // exploration covariance over augmented actions
};

struct RwrOptions {
  int num_samples = 25;  // per iteration, spread across conditions
  double ess_lo = 1.0 / 3.0;  // effective-sample-size band, fractions of N
  double ess_hi = 1.0 / 2.0;
  double ridge = 1e-8;
  double cov_mix = 0.5;  // shrink rate toward the weighted residual covariance
};

// Exponentiated-cost weights with the temperature chosen by bisection so the
// effective sample size lands in [N/3, N/2]; weighted affine refit.
void rwr_iteration(LinearPolicy& pol, const Environment& env,
                   const AugmentedSpec& aspec, const RwrOptions& opt, Rng& rng);

// Weight computation alone (exposed for testing): returns normalized weights.
VectorXd rwr_weights(const VectorXd& costs, double ess_lo, double ess_hi);

std::vector<double> evaluate_policy(const Environment& env,
                                    const AugmentedSpec& aspec,
                                    const MemoryPolicy& policy);
std::vector<double> evaluate_linear(const Environment& env,
                                    const AugmentedSpec& aspec,
                                    const LinearPolicy& pol);

}  // namespace gpsmem
