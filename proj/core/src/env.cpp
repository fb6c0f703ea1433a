#include "gpsmem/env.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace gpsmem {

VectorXd nav_step(const VectorXd& x, const VectorXd& u, double dt) {
  return x + dt * u;
}

static double goal_weight(int t, int T, const CostSpec& cs) {
  // emphasis at the waypoint (end of first half) and at the final step
  const bool emphasize = (t == T / 2 - 1) || (t == T - 1);
  return emphasize ? cs.w_goal_emphasis : cs.w_goal;
}

double nav_cost(const VectorXd& x, const VectorXd& u, int t, int T,
                const VectorXd& target, const VectorXd& origin,
                const CostSpec& cs) {
  if (t < 0 || t >= T) throw std::out_of_range("nav_cost: t out of range");
  const VectorXd& goal = (t < T / 2) ? target : origin;
  return goal_weight(t, T, cs) * (x - goal).squaredNorm() +
         cs.w_action * u.squaredNorm();
}

VectorXd nav_observe(const VectorXd& x, int /*t*/) { return x; }

VectorXd pegsort_step(const VectorXd& x, const VectorXd& u, int t, double dt) {
  if (t == 0) return x;
  return x + dt * u;
}

VectorXd pegsort_observe(const VectorXd& x, int t, const VectorXd& cue) {
  VectorXd o(x.size() + cue.size());
  if (t == 0)
    o << x, cue;
  else
    o << x, VectorXd::Zero(cue.size());
  return o;
}

static QuadStage goal_quadratic(const VectorXd& goal, double w_goal,
                                double w_action, int d_x, int d_u) {
  QuadStage q = QuadStage::zero(d_x, d_u);
  q.lxx = 2.0 * w_goal * MatrixXd::Identity(d_x, d_x);
  q.lx = -2.0 * w_goal * goal;
  q.l0 = w_goal * goal.squaredNorm();
  q.luu = 2.0 * w_action * MatrixXd::Identity(d_u, d_u);
  return q;
}

// ---- NavigationEnv ----

NavigationEnv::NavigationEnv() {
  spec_.d_x = 2;
  spec_.d_u = 2;
  spec_.d_o = 2;
  spec_.T = 40;
  spec_.dt = 0.05;
  target_ = VectorXd(2);
  target_ << 0.5, 0.5;
  // start corners of a side-0.8 square centered at the target
  for (double sx : {-0.4, 0.4})
    for (double sy : {-0.4, 0.4}) {
      VectorXd c(2);
      c << target_(0) + sx, target_(1) + sy;
      spec_.conditions.push_back(c);
    }
}

NavigationEnv::NavigationEnv(EnvSpec spec, CostSpec cost, VectorXd target)
    : spec_(std::move(spec)), cost_(cost), target_(std::move(target)) {}

VectorXd NavigationEnv::step(const VectorXd& x, const VectorXd& u,
                             int /*t*/) const {
  return nav_step(x, u, spec_.dt);
}

VectorXd NavigationEnv::observe(const VectorXd& x, int t, int /*cond*/) const {
  return nav_observe(x, t);
}

double NavigationEnv::cost(const VectorXd& x, const VectorXd& u, int t,
                           int cond) const {
  return nav_cost(x, u, t, spec_.T, target_, spec_.conditions[cond], cost_);
}

QuadStage NavigationEnv::cost_quadratic(int t, int cond) const {
  const VectorXd& goal =
      (t < spec_.T / 2) ? target_ : spec_.conditions[cond];
  return goal_quadratic(goal, goal_weight(t, spec_.T, cost_), cost_.w_action,
                        spec_.d_x, spec_.d_u);
}

MatrixXd NavigationEnv::obs_jacobian(int /*t*/, int /*cond*/) const {
  return MatrixXd::Identity(spec_.d_o, spec_.d_x);
}

double NavigationEnv::metric(const std::vector<VectorXd>& states,
                             int cond) const {
  const int T = static_cast<int>(states.size());
  double first = std::numeric_limits<double>::infinity();
  double second = std::numeric_limits<double>::infinity();
  for (int t = 0; t < T; ++t) {
    if (t < T / 2)
      first = std::min(first, (states[t] - target_).norm());
    else
      second = std::min(second, (states[t] - spec_.conditions[cond]).norm());
  }
  return std::max(first, second);
}

// ---- PegSortEnv ----

PegSortEnv::PegSortEnv() {
  spec_.d_x = 2;
  spec_.d_u = 2;
  spec_.d_o = 4;
  spec_.T = 30;
  spec_.dt = 0.05;
  spec_.conditions.assign(2, VectorXd::Zero(2));  // both cues start at origin
  VectorXd right(2), left(2);
  right << 0.5, -0.5;
  left << -0.5, -0.5;
  cues_ = {right, left};
}

PegSortEnv::PegSortEnv(EnvSpec spec, CostSpec cost, std::vector<VectorXd> cues)
    : spec_(std::move(spec)), cost_(cost), cues_(std::move(cues)) {}

VectorXd PegSortEnv::step(const VectorXd& x, const VectorXd& u, int t) const {
  return pegsort_step(x, u, t, spec_.dt);
}

VectorXd PegSortEnv::observe(const VectorXd& x, int t, int cond) const {
  return pegsort_observe(x, t, cues_[cond]);
}

double PegSortEnv::cost(const VectorXd& x, const VectorXd& u, int t,
                        int cond) const {
  if (t < 0 || t >= spec_.T)
    throw std::out_of_range("pegsort cost: t out of range");
  const double w = (t == spec_.T - 1) ? cost_.w_goal_emphasis : cost_.w_goal;
  return w * (x - cues_[cond]).squaredNorm() +
         cost_.w_action * u.squaredNorm();
}

QuadStage PegSortEnv::cost_quadratic(int t, int cond) const {
  const double w = (t == spec_.T - 1) ? cost_.w_goal_emphasis : cost_.w_goal;
  return goal_quadratic(cues_[cond], w, cost_.w_action, spec_.d_x, spec_.d_u);
}

MatrixXd PegSortEnv::obs_jacobian(int /*t*/, int /*cond*/) const {
  MatrixXd J = MatrixXd::Zero(spec_.d_o, spec_.d_x);
  J.topLeftCorner(spec_.d_x, spec_.d_x).setIdentity();
  return J;
}

double PegSortEnv::metric(const std::vector<VectorXd>& states,
                          int cond) const {
  const int T = static_cast<int>(states.size());
  double best = std::numeric_limits<double>::infinity();
  for (int t = 0; t < T; ++t) {
    if (t + 1 > 3.0 * T / 4.0)  // final quarter of the episode
      best = std::min(best, (states[t] - cues_[cond]).norm());
  }
  return best;
}

std::unique_ptr<Environment> make_environment(const std::string& task) {
  if (task == "nav") return std::make_unique<NavigationEnv>();
  if (task == "pegsort") return std::make_unique<PegSortEnv>();
  throw std::invalid_argument("unknown task '" + task + "'");
}

double evaluate_metric(const TrajectorySample& rollout, const Environment& env,
                       int cond) {
  const int d_x = env.spec().d_x;
  std::vector<VectorXd> phys;
  phys.reserve(rollout.states.size());
  for (const auto& s : rollout.states) phys.push_back(s.head(d_x));
  return env.metric(phys, cond);
}

}  // namespace gpsmem
