#include "gpsmem/gps.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "gpsmem/linalg.hpp"

namespace gpsmem {

namespace {

// rng stream tags
constexpr std::uint64_t kPolicyInit = 1;
constexpr std::uint64_t kSampling = 2;
constexpr std::uint64_t kTraining = 3;

Gaussian deterministic_init(const Environment& env, const AugmentedSpec& aspec,
                            int cond) {
  VectorXd mean(aspec.d_xa());
  mean << env.spec().conditions[cond], VectorXd::Zero(aspec.d_h);
  return Gaussian(mean, MatrixXd::Zero(aspec.d_xa(), aspec.d_xa()));
}

}  // namespace

std::vector<TrajectorySample> collect_samples(const Environment& env,
                                              const AugmentedSpec& aspec,
                                              const TimeVaryingController& ctrl,
                                              int cond, int n, Rng& rng) {
  if (n < 1) throw std::invalid_argument("collect_samples: n must be >= 1");
  if (ctrl.state_dim() != aspec.d_xa() || ctrl.action_dim() != aspec.d_ua())
    throw std::invalid_argument(
        "collect_samples: controller does not match augmented spec");
  std::vector<TrajectorySample> samples;
  samples.reserve(n);
  const Actor actor = controller_actor(ctrl, /*stochastic=*/true);
  for (int j = 0; j < n; ++j)
    samples.push_back(augment_rollout(env, aspec, actor, cond, rng));
  return samples;
}

void dual_update(std::vector<VectorXd>& lambda, const std::vector<double>& nu,
                 const std::vector<TrajectorySample>& samples,
                 const TimeVaryingController& ctrl, const MemoryPolicy& policy,
                 double rate) {
  const int T = static_cast<int>(lambda.size());
  const int n = static_cast<int>(samples.size());
  for (int t = 0; t < T; ++t) {
    VectorXd disagreement = VectorXd::Zero(lambda[t].size());
    for (const auto& s : samples)
      disagreement += policy.mean(s.observations[t]) -
                      (ctrl.K[t] * s.states[t] + ctrl.k[t]);
    lambda[t] += rate * nu[t] * disagreement / n;
  }
}

void nu_schedule(std::vector<double>& nu, double growth, double cap) {
  for (double& v : nu) v = std::min(v * growth, cap);
}

GpsRun::GpsRun(const Environment& env, AugmentedSpec aspec, GpsOptions opt)
    : env_(env), aspec_(aspec), opt_(std::move(opt)) {
  const int T = aspec_.T;
  const int nc = env_.spec().num_conditions();
  conds_.resize(nc);
  for (auto& c : conds_) {
    c.ctrl = TimeVaryingController::zero_init(T, aspec_.d_xa(), aspec_.d_ua(),
                                              opt_.init_ctrl_cov);
    for (auto& C : c.ctrl.C)
      C.bottomRightCorner(aspec_.d_h, aspec_.d_h) =
          opt_.init_mem_cov * MatrixXd::Identity(aspec_.d_h, aspec_.d_h);
    c.lambda.assign(T, VectorXd::Zero(aspec_.d_ua()));
  }
  std::vector<int> widths{aspec_.d_oa()};
  widths.insert(widths.end(), opt_.hidden.begin(), opt_.hidden.end());
  widths.push_back(aspec_.d_ua());
  Rng init_rng = Rng::derive(opt_.seed, kPolicyInit);
  policy_ = MemoryPolicy(widths, opt_.init_ctrl_cov, init_rng);
  nu_.assign(T, opt_.nu_init);
  eps_ = opt_.eps_init;
  prev_cost_ = std::numeric_limits<double>::infinity();
}

QuadCostExpansion GpsRun::augmented_cost_expansion(int cond) const {
  const int d_x = aspec_.d_x, d_u = aspec_.d_u, d_h = aspec_.d_h;
  QuadCostExpansion exp;
  exp.reserve(aspec_.T);
  for (int t = 0; t < aspec_.T; ++t) {
    const QuadStage phys = env_.cost_quadratic(t, cond);
    QuadStage q = QuadStage::zero(d_x + d_h, d_u + d_h);
    q.lxx.topLeftCorner(d_x, d_x) = phys.lxx;
    q.luu.topLeftCorner(d_u, d_u) = phys.luu;
    q.lux.topLeftCorner(d_u, d_x) = phys.lux;
    q.lx.head(d_x) = phys.lx;
    q.lu.head(d_u) = phys.lu;
    q.l0 = phys.l0;
    q.luu += 2.0 * opt_.action_reg *
             MatrixXd::Identity(d_u + d_h, d_u + d_h);
    // keep memory writes inside the range where the policy linearization
    // stays trustworthy
    q.luu.bottomRightCorner(d_h, d_h) +=
        2.0 * opt_.memory_reg * MatrixXd::Identity(d_h, d_h);
    exp.push_back(std::move(q));
  }
  return exp;
}

TimeVaryingController GpsRun::policy_linearization(int cond) const {
  return linearize_policy(
      conds_[cond].samples,
      [this](const VectorXd& o) { return policy_.mean(o); },
      policy_.action_cov(), opt_.lin_ridge);
}

IterationMetrics GpsRun::outer_iteration() {
  const int T = aspec_.T;
  const int nc = static_cast<int>(conds_.size());

  // 1. sample collection
  for (int i = 0; i < nc; ++i) {
    Rng rng = Rng::derive(opt_.seed, kSampling, iter_, i);
    conds_[i].samples = collect_samples(env_, aspec_, conds_[i].ctrl, i,
                                        opt_.num_samples, rng);
    double cost = 0.0;
    for (const auto& s : conds_[i].samples) cost += s.total_cost();
    conds_[i].mean_sample_cost = cost / opt_.num_samples;
  }

  // observation normalization from the first iteration's samples, frozen
  if (!norm_frozen_) {
    const int d_o = aspec_.d_oa();
    VectorXd mean = VectorXd::Zero(d_o), sq = VectorXd::Zero(d_o);
    int count = 0;
    for (const auto& c : conds_)
      for (const auto& s : c.samples)
        for (const auto& o : s.observations) {
          mean += o;
          sq += o.cwiseProduct(o);
          ++count;
        }
    mean /= count;
    const VectorXd var = (sq / count - mean.cwiseProduct(mean)).cwiseMax(0.0);
    policy_.set_normalization(mean, var.cwiseSqrt().cwiseMax(1e-3));
    norm_frozen_ = true;
  }

  // 2. dynamics fit, once per outer iteration
  for (auto& c : conds_) {
    const LinearDynamics phys = fit_dynamics(c.samples, aspec_.d_x, aspec_.d_u,
                                             opt_.dyn_prior_strength);
    c.dyn = augment_fit(phys, aspec_.d_h, aspec_.sigma2);
  }

  // 3. alternating C/S steps
  for (int l = 0; l < opt_.inner_iters; ++l) {
    for (int i = 0; i < nc; ++i) {
      auto& c = conds_[i];
      TimeVaryingController pi_lin = policy_linearization(i);
      // bound the agreement stiffness on the physical action head so the
      // teacher keeps trading cost against tracking once nu saturates; the
      // memory-write head stays tightly coupled to preserve the shared code
      const int d_u = aspec_.d_u;
      for (auto& C : pi_lin.C)
        C.topLeftCorner(d_u, d_u) =
            psd_project(C.topLeftCorner(d_u, d_u), opt_.glue_cov_min);
      const QuadCostExpansion exp = add_policy_terms(
          augmented_cost_expansion(i), pi_lin, nu_, c.lambda);
      KlSolveResult res = kl_constrained_solve(
          c.ctrl, c.dyn, exp, eps_, deterministic_init(env_, aspec_, i));
      c.ctrl = std::move(res.ctrl);
      // keep exploration noise inside a workable band: the maxent covariance
      // Quu^-1 explodes under near-zero action costs; runaway memory-write
      // noise in particular destroys the condition codes stored in h
      const int d_h = aspec_.d_h;
      for (auto& C : c.ctrl.C) {
        Eigen::SelfAdjointEigenSolver<MatrixXd> es(C);
        const VectorXd ev = es.eigenvalues()
                                .cwiseMax(opt_.ctrl_cov_min)
                                .cwiseMin(opt_.ctrl_cov_max);
        C = es.eigenvectors() * ev.asDiagonal() * es.eigenvectors().transpose();
        if (d_h > 0) {
          Eigen::SelfAdjointEigenSolver<MatrixXd> em(
              MatrixXd(C.bottomRightCorner(d_h, d_h)));
          const VectorXd evm = em.eigenvalues().cwiseMin(opt_.mem_cov_max);
          C.bottomRightCorner(d_h, d_h) = em.eigenvectors() * evm.asDiagonal() *
                                          em.eigenvectors().transpose();
          C = psd_project(C, std::max(opt_.ctrl_cov_min, 1e-12));
        }
        C = symmetrized(C);
      }
    }

    std::vector<TrainDatum> data;
    data.reserve(nc * opt_.num_samples * T);
    for (int i = 0; i < nc; ++i) {
      const auto& c = conds_[i];
      std::vector<MatrixXd> prec(T);
      for (int t = 0; t < T; ++t) {
        Eigen::SelfAdjointEigenSolver<MatrixXd> es(inverse_psd(c.ctrl.C[t]));
        const VectorXd ev = es.eigenvalues().cwiseMin(opt_.train_prec_cap);
        prec[t] = symmetrized(es.eigenvectors() * ev.asDiagonal() *
                              es.eigenvectors().transpose());
      }
      for (const auto& s : c.samples)
        for (int t = 0; t < T; ++t) {
          TrainDatum d;
          d.obs = s.observations[t];
          d.target = c.ctrl.K[t] * s.states[t] + c.ctrl.k[t];
          d.prec = prec[t];
          d.nu = nu_[t];
          d.lambda = c.lambda[t];
          data.push_back(std::move(d));
        }
    }
    if (l == 0 && iter_ < opt_.cold_start_until) {
      std::vector<int> widths{aspec_.d_oa()};
      widths.insert(widths.end(), opt_.hidden.begin(), opt_.hidden.end());
      widths.push_back(aspec_.d_ua());
      Rng reinit_rng = Rng::derive(opt_.seed, kPolicyInit, iter_ + 1);
      MemoryPolicy fresh(widths, opt_.init_ctrl_cov, reinit_rng);
      fresh.set_normalization(policy_.norm_shift(), policy_.norm_scale());
      policy_ = std::move(fresh);
    }
    Rng train_rng = Rng::derive(opt_.seed, kTraining, iter_, l);
    train_supervised(policy_, data, opt_.train, train_rng);
    // keep the agreement penalty well conditioned for the next C-step
    policy_.set_action_cov(
        psd_project(policy_.action_cov(), opt_.pol_cov_floor));
  }

  // 4. dual update on the mean disagreement
  for (auto& c : conds_)
    dual_update(c.lambda, nu_, c.samples, c.ctrl, policy_, opt_.lambda_rate);

  // metrics before advancing the schedules
  IterationMetrics m;
  m.iter = iter_;
  m.cumulative_samples = (iter_ + 1) * nc * opt_.num_samples;
  m.eps = eps_;
  m.nu = nu_[0];
  double cost = 0.0, agree = 0.0;
  for (int i = 0; i < nc; ++i) {
    cost += conds_[i].mean_sample_cost;
    agree += traj_kl(conds_[i].ctrl, policy_linearization(i), conds_[i].dyn,
                     deterministic_init(env_, aspec_, i));
  }
  m.mean_sample_cost = cost / nc;
  m.mean_agreement_kl = agree / nc;
  m.distances = evaluate();

  // 5. schedules
  nu_schedule(nu_, opt_.nu_growth, opt_.nu_cap);
  if (std::isfinite(prev_cost_)) {
    eps_ = (m.mean_sample_cost < prev_cost_ * (1.0 + opt_.eps_tolerance))
               ? eps_ * opt_.eps_grow
               : eps_ * opt_.eps_shrink;
    eps_ = std::clamp(eps_, opt_.eps_min, opt_.eps_max);
  }
  prev_cost_ = m.mean_sample_cost;
  iter_ += 1;
  return m;
}

std::vector<double> GpsRun::evaluate() const {
  return evaluate_policy(env_, aspec_, policy_);
}

std::vector<double> evaluate_policy(const Environment& env,
                                    const AugmentedSpec& aspec,
                                    const MemoryPolicy& policy) {
  std::vector<double> out;
  const Actor actor = policy_actor(policy, /*stochastic=*/false);
  for (int i = 0; i < env.spec().num_conditions(); ++i) {
    Rng rng(0);  // unused: deterministic actor, zero memory noise
    const TrajectorySample roll =
        augment_rollout(env, aspec, actor, i, rng, /*zero_memory_noise=*/true);
    out.push_back(evaluate_metric(roll, env, i));
  }
  return out;
}

// ---- RWR ----

VectorXd rwr_weights(const VectorXd& costs, double ess_lo, double ess_hi) {
  const int n = static_cast<int>(costs.size());
  const double cmin = costs.minCoeff();
  const double cmax = costs.maxCoeff();
  if (cmax - cmin < 1e-12) return VectorXd::Constant(n, 1.0 / n);

  auto ess_at = [&](double beta) {
    const VectorXd w = (-beta * (costs.array() - cmin)).exp();
    const double s = w.sum();
    return s * s / w.squaredNorm();
  };
  const double lo_target = ess_lo * n;
  const double hi_target = ess_hi * n;

  double beta_lo = 0.0;
  double beta_hi = 1.0 / (cmax - cmin);
  int guard = 0;
  while (ess_at(beta_hi) > hi_target && guard++ < 200) beta_hi *= 2.0;

  double beta = beta_hi;
  for (int i = 0; i < 100; ++i) {
    const double e = ess_at(beta);
    if (e >= lo_target && e <= hi_target) break;
    if (e > hi_target)
      beta_lo = beta;
    else
      beta_hi = beta;
    beta = 0.5 * (beta_lo + beta_hi);
  }
  VectorXd w = (-beta * (costs.array() - cmin)).exp();
  return w / w.sum();
}

namespace {

Actor linear_actor(const LinearPolicy& pol, bool stochastic) {
  return [&pol, stochastic](int /*t*/, const VectorXd& /*x_aug*/,
                            const VectorXd& o_aug, Rng& rng) {
    VectorXd u = pol.W * o_aug + pol.b;
    if (stochastic)
      u += MatrixXd(chol_psd(pol.cov).matrixL()) *
           rng.normal_vector(static_cast<int>(u.size()));
    return u;
  };
}

}  // namespace

void rwr_iteration(LinearPolicy& pol, const Environment& env,
                   const AugmentedSpec& aspec, const RwrOptions& opt,
                   Rng& rng) {
  if (opt.num_samples < 2)
    throw std::invalid_argument("rwr_iteration: need at least 2 samples");
  const int nc = env.spec().num_conditions();
  const int T = aspec.T;
  const Actor actor = linear_actor(pol, /*stochastic=*/true);

  std::vector<TrajectorySample> rollouts;
  VectorXd costs(opt.num_samples);
  for (int j = 0; j < opt.num_samples; ++j) {
    rollouts.push_back(augment_rollout(env, aspec, actor, j % nc, rng));
    costs(j) = rollouts.back().total_cost();
  }
  const VectorXd traj_w = rwr_weights(costs, opt.ess_lo, opt.ess_hi);

  const int rows = opt.num_samples * T;
  MatrixXd X(rows, aspec.d_oa()), Y(rows, aspec.d_ua());
  VectorXd w(rows);
  int r = 0;
  for (int j = 0; j < opt.num_samples; ++j)
    for (int t = 0; t < T; ++t, ++r) {
      X.row(r) = rollouts[j].observations[t].transpose();
      Y.row(r) = rollouts[j].actions[t].transpose();
      w(r) = traj_w(j);
    }
  const AffineFit fit = fit_affine(X, Y, opt.ridge, &w);
  pol.W = fit.gain;
  pol.b = fit.bias;

  MatrixXd resid = MatrixXd::Zero(aspec.d_ua(), aspec.d_ua());
  for (r = 0; r < rows; ++r) {
    const VectorXd e =
        Y.row(r).transpose() - (pol.W * X.row(r).transpose() + pol.b);
    resid += w(r) * e * e.transpose();
  }
  resid = symmetrized(resid / T + 1e-6 * MatrixXd::Identity(aspec.d_ua(),
                                                            aspec.d_ua()));
  pol.cov = symmetrized((1.0 - opt.cov_mix) * pol.cov + opt.cov_mix * resid);
}

std::vector<double> evaluate_linear(const Environment& env,
                                    const AugmentedSpec& aspec,
                                    const LinearPolicy& pol) {
  std::vector<double> out;
  const Actor actor = linear_actor(pol, /*stochastic=*/false);
  for (int i = 0; i < env.spec().num_conditions(); ++i) {
    Rng rng(0);
    const TrajectorySample roll =
        augment_rollout(env, aspec, actor, i, rng, /*zero_memory_noise=*/true);
    out.push_back(evaluate_metric(roll, env, i));
  }
  return out;
}

}  // namespace gpsmem
