#pragma once

#include <functional>
#include <utility>
#include <vector>

#include "gpsmem/cost_expansion.hpp"
#include "gpsmem/gaussian.hpp"
#include "gpsmem/trajectory.hpp"

namespace gpsmem {

// Stage cost for quadratization. Costs that are exactly quadratic expose
// their form directly; everything else goes through central finite
// differences about the nominal trajectory.
class StageCost {
 public:
  virtual ~StageCost() = default;
  virtual double eval(const VectorXd& x, const VectorXd& u, int t) const = 0;
  virtual bool has_quadratic() const { return false; }
  virtual QuadStage quadratic(int t) const;
};

class FunctionStageCost final : public StageCost {
 public:
  using Fn = std::function<double(const VectorXd&, const VectorXd&, int)>;
  explicit FunctionStageCost(Fn fn) : fn_(std::move(fn)) {}
  double eval(const VectorXd& x, const VectorXd& u, int t) const override {
    return fn_(x, u, t);
  }

 private:
  Fn fn_;
};

// Second-order model of the stage cost along a nominal trajectory, stored in
// absolute coordinates (exact for quadratic costs, FD step 1e-6*(1+|v|)).
QuadCostExpansion quadratize(const StageCost& cost,
                             const std::vector<VectorXd>& x_nom,
                             const std::vector<VectorXd>& u_nom);

// Adds the policy-agreement terms of the trajectory objective: the quadratic
// form of nu_t * KL(p(u|x) || pi_lin(u|x)) (its cross-entropy part; the
// entropy of p is handled by the maximum-entropy backward pass) and the
// linear multiplier term -u'lambda_t.
QuadCostExpansion add_policy_terms(const QuadCostExpansion& exp,
                                   const TimeVaryingController& pi_lin,
                                   const std::vector<double>& nu,
                                   const std::vector<VectorXd>& lambda);

// Backward dynamic programming pass. Returns the maximum-entropy optimal
// controller: K = -Quu^{-1}Qux, k = -Quu^{-1}qu, C = Quu^{-1}.
TimeVaryingController maxent_lqr(const LinearDynamics& dyn,
                                 const QuadCostExpansion& exp);

// Trajectory KL divergence sum_t E_{p}[KL(p(u|x) || pbar(u|x))] with state
// marginals propagated under p and the given dynamics.
double traj_kl(const TimeVaryingController& p, const TimeVaryingController& pbar,
               const LinearDynamics& dyn, const Gaussian& init);

struct DualState {
  double eta = 1e-8;
  double eta_min = 1e-8;
  double eta_max = 1e16;
  double epsilon = 1.0;
};

struct KlSolveResult {
  TimeVaryingController ctrl;
  double eta = 0.0;
  double kl = 0.0;
  bool constraint_active = false;
  // (eta, achieved KL) pairs visited by the dual search, in evaluation order
  std::vector<std::pair<double, double>> trace;
};

// Solves min_p L(p) s.t. traj_kl(p, pbar) <= eps by minimizing
// (L(p) + eta KL)/(1 + eta) with a maximum-entropy LQR pass on the surrogate
// expansion; eta found by bracketed bisection until the achieved KL lands in
// [0.5 eps, eps], or the constraint is verified inactive at eta_min.
KlSolveResult kl_constrained_solve(const TimeVaryingController& pbar,
                                   const LinearDynamics& dyn,
                                   const QuadCostExpansion& exp, double eps,
                                   const Gaussian& init);

}  // namespace gpsmem
