#pragma once

#include <Eigen/Dense>
#include <memory>
#include <string>
#include <vector>

#include "gpsmem/cost_expansion.hpp"
#include "gpsmem/trajectory.hpp"

namespace gpsmem {

struct EnvSpec {
  int d_x = 0;
  int d_u = 0;
  int d_o = 0;
  int T = 0;
  double dt = 0.0;
  std::vector<VectorXd> conditions;  // initial states, one per condition

  int num_conditions() const { return static_cast<int>(conditions.size()); }
};

struct CostSpec {
  double w_goal = 1.0;
  double w_goal_emphasis = 10.0;  // applied at waypoint/terminal steps
  double w_action = 1e-3;
};

// Time indices are 0-based: t in 0..T-1.

// x' = x + dt * u
VectorXd nav_step(const VectorXd& x, const VectorXd& u, double dt);

// First half: squared distance to target; second half: squared distance back
// to the condition's origin. Control effort penalized throughout.
double nav_cost(const VectorXd& x, const VectorXd& u, int t, int T,
                const VectorXd& target, const VectorXd& origin,
                const CostSpec& cs);

// Only the current position is observable; origin and phase never are.
VectorXd nav_observe(const VectorXd& x, int t);

// Motion is frozen on the first step, Euler integration afterwards.
VectorXd pegsort_step(const VectorXd& x, const VectorXd& u, int t, double dt);

// The cue (target position) is visible on the first step only; zeroed after.
VectorXd pegsort_observe(const VectorXd& x, int t, const VectorXd& cue);

class Environment {
 public:
  virtual ~Environment() = default;
  virtual const EnvSpec& spec() const = 0;
  virtual std::string name() const = 0;
  virtual VectorXd step(const VectorXd& x, const VectorXd& u, int t) const = 0;
  virtual VectorXd observe(const VectorXd& x, int t, int cond) const = 0;
  virtual double cost(const VectorXd& x, const VectorXd& u, int t,
                      int cond) const = 0;
  // Exact quadratic form of the stage cost (all built-in costs are quadratic).
  virtual QuadStage cost_quadratic(int t, int cond) const = 0;
  // d o / d x; all built-in observation maps are linear in x.
  virtual MatrixXd obs_jacobian(int t, int cond) const = 0;
  // Task metric over the physical state sequence of one rollout.
  virtual double metric(const std::vector<VectorXd>& states,
                        int cond) const = 0;
};

// 2D navigation-and-return: reach the target in the first half of the
// episode, then return to the condition's starting corner. Four start
// conditions at the corners of a square of side 0.8 around the target.
class NavigationEnv final : public Environment {
 public:
  NavigationEnv();
  NavigationEnv(EnvSpec spec, CostSpec cost, VectorXd target);

  const EnvSpec& spec() const override { return spec_; }
  std::string name() const override { return "nav"; }
  VectorXd step(const VectorXd& x, const VectorXd& u, int t) const override;
  VectorXd observe(const VectorXd& x, int t, int cond) const override;
  double cost(const VectorXd& x, const VectorXd& u, int t,
              int cond) const override;
  QuadStage cost_quadratic(int t, int cond) const override;
  MatrixXd obs_jacobian(int t, int cond) const override;
  double metric(const std::vector<VectorXd>& states, int cond) const override;

  const VectorXd& target() const { return target_; }
  const CostSpec& cost_spec() const { return cost_; }

 private:
  EnvSpec spec_;
  CostSpec cost_;
  VectorXd target_;
};

// Point-mass cue-then-freeze sorting task: the cued target is shown at t=0
// while motion is frozen, then the agent must reach the remembered target.
class PegSortEnv final : public Environment {
 public:
  PegSortEnv();
  PegSortEnv(EnvSpec spec, CostSpec cost, std::vector<VectorXd> cues);

  const EnvSpec& spec() const override { return spec_; }
  std::string name() const override { return "pegsort"; }
  VectorXd step(const VectorXd& x, const VectorXd& u, int t) const override;
  VectorXd observe(const VectorXd& x, int t, int cond) const override;
  double cost(const VectorXd& x, const VectorXd& u, int t,
              int cond) const override;
  QuadStage cost_quadratic(int t, int cond) const override;
  MatrixXd obs_jacobian(int t, int cond) const override;
  double metric(const std::vector<VectorXd>& states, int cond) const override;

  const VectorXd& cue(int cond) const { return cues_[cond]; }

 private:
  EnvSpec spec_;
  CostSpec cost_;
  std::vector<VectorXd> cues_;  // cued target per condition
};

std::unique_ptr<Environment> make_environment(const std::string& task);

// Per-condition evaluation metric of one rollout, dispatched by task.
double evaluate_metric(const TrajectorySample& rollout, const Environment& env,
                       int cond);

}  // namespace gpsmem
