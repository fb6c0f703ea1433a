#include "gpsmem/trajopt.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

#include "gpsmem/linalg.hpp"
#include "gpsmem/marginals.hpp"

namespace gpsmem {

QuadStage StageCost::quadratic(int) const {
  throw std::logic_error("StageCost: no analytic quadratic form");
}

namespace {

constexpr double kTwoPi = 6.283185307179586476925286766559;

QuadStage fd_quadratize(const StageCost& cost, const VectorXd& x0,
                        const VectorXd& u0, int t) {
  const int d_x = static_cast<int>(x0.size());
  const int d_u = static_cast<int>(u0.size());
  const int d = d_x + d_u;
  VectorXd z0(d);
  z0 << x0, u0;

  auto eval = [&](const VectorXd& z) {
    const double v = cost.eval(z.head(d_x), z.tail(d_u), t);
    if (!std::isfinite(v))
      throw std::runtime_error("quadratize: NaN in cost evaluation");
    return v;
  };

  VectorXd h(d);
  for (int i = 0; i < d; ++i) h(i) = 1e-6 * (1.0 + std::abs(z0(i)));

  const double f0 = eval(z0);
  VectorXd grad(d);
  MatrixXd hess(d, d);
  std::vector<double> fplus(d), fminus(d);
  for (int i = 0; i < d; ++i) {
    VectorXd z = z0;
    z(i) += h(i);
    fplus[i] = eval(z);
    z(i) = z0(i) - h(i);
    fminus[i] = eval(z);
    grad(i) = (fplus[i] - fminus[i]) / (2.0 * h(i));
    hess(i, i) = (fplus[i] - 2.0 * f0 + fminus[i]) / (h(i) * h(i));
  }
  for (int i = 0; i < d; ++i)
    for (int j = i + 1; j < d; ++j) {
      VectorXd z = z0;
      z(i) += h(i);
      z(j) += h(j);
      const double fpp = eval(z);
      z(j) = z0(j) - h(j);
      const double fpm = eval(z);
      z(i) = z0(i) - h(i);
      const double fmm = eval(z);
      z(j) = z0(j) + h(j);
      const double fmp = eval(z);
      hess(i, j) = hess(j, i) =
          (fpp - fpm - fmp + fmm) / (4.0 * h(i) * h(j));
    }

  // recenter the Taylor model at the origin
  QuadStage q;
  q.lxx = symmetrized(hess.topLeftCorner(d_x, d_x));
  q.luu = symmetrized(hess.bottomRightCorner(d_u, d_u));
  q.lux = hess.bottomLeftCorner(d_u, d_x);
  const VectorXd lin = grad - hess * z0;
  q.lx = lin.head(d_x);
  q.lu = lin.tail(d_u);
  q.l0 = f0 - grad.dot(z0) + 0.5 * z0.dot(hess * z0);
  return q;
}

// Quadratic form of the negative log density of an affine-Gaussian law
// N(Kx + k, C), scaled by w, accumulated into the stage.
void add_neg_log_gaussian(QuadStage& q, const MatrixXd& K, const VectorXd& k,
                          const MatrixXd& C, double w) {
  const MatrixXd P = inverse_psd(C);
  const MatrixXd PK = P * K;
  q.luu += w * P;
  q.lux -= w * PK;
  q.lxx += w * K.transpose() * PK;
  q.lu -= w * (P * k);
  q.lx += w * (PK.transpose() * k);
  q.l0 += w * (0.5 * k.dot(P * k) +
               0.5 * (C.rows() * std::log(kTwoPi) + logdet_psd(C)));
}

}  // namespace

QuadCostExpansion quadratize(const StageCost& cost,
                             const std::vector<VectorXd>& x_nom,
                             const std::vector<VectorXd>& u_nom) {
  const int T = static_cast<int>(x_nom.size());
  QuadCostExpansion exp;
  exp.reserve(T);
  for (int t = 0; t < T; ++t) {
    exp.push_back(cost.has_quadratic()
                      ? cost.quadratic(t)
                      : fd_quadratize(cost, x_nom[t], u_nom[t], t));
  }
  return exp;
}

QuadCostExpansion add_policy_terms(const QuadCostExpansion& exp,
                                   const TimeVaryingController& pi_lin,
                                   const std::vector<double>& nu,
                                   const std::vector<VectorXd>& lambda) {
  const int T = static_cast<int>(exp.size());
  if (pi_lin.horizon() != T || static_cast<int>(nu.size()) != T ||
      static_cast<int>(lambda.size()) != T)
    throw std::invalid_argument("add_policy_terms: horizon mismatch");

  QuadCostExpansion out = exp;
  for (int t = 0; t < T; ++t) {
    if (nu[t] != 0.0)
      add_neg_log_gaussian(out[t], pi_lin.K[t], pi_lin.k[t], pi_lin.C[t],
                           nu[t]);
    out[t].lu -= lambda[t];
  }
  return out;
}

TimeVaryingController maxent_lqr(const LinearDynamics& dyn,
                                 const QuadCostExpansion& exp) {
  const int T = static_cast<int>(exp.size());
  if (dyn.steps() != T - 1)
    throw std::invalid_argument("maxent_lqr: horizon mismatch");
  const int d_x = static_cast<int>(exp[0].lxx.rows());
  const int d_u = static_cast<int>(exp[0].luu.rows());

  TimeVaryingController ctrl;
  ctrl.K.assign(T, MatrixXd());
  ctrl.k.assign(T, VectorXd());
  ctrl.C.assign(T, MatrixXd());

  MatrixXd Vxx = MatrixXd::Zero(d_x, d_x);
  VectorXd vx = VectorXd::Zero(d_x);
  for (int t = T - 1; t >= 0; --t) {
    MatrixXd Qxx = exp[t].lxx;
    MatrixXd Quu = exp[t].luu;
    MatrixXd Qux = exp[t].lux;
    VectorXd qx = exp[t].lx;
    VectorXd qu = exp[t].lu;
    if (t < T - 1) {
      const MatrixXd& fx = dyn.fx[t];
      const MatrixXd& fu = dyn.fu[t];
      const VectorXd& fc = dyn.fc[t];
      const MatrixXd Vfx = Vxx * fx;
      Qxx += fx.transpose() * Vfx;
      Quu += fu.transpose() * Vxx * fu;
      Qux += fu.transpose() * Vfx;
      const VectorXd vc = Vxx * fc + vx;
      qx += fx.transpose() * vc;
      qu += fu.transpose() * vc;
    }
    Quu = symmetrized(Quu);

    Eigen::LLT<MatrixXd> llt;
    try {
      llt = chol_psd(Quu);
    } catch (const std::runtime_error&) {
      std::ostringstream msg;
      msg << "maxent_lqr: Quu not positive definite at t=" << t
          << " (min eig=" << min_eigenvalue(Quu) << ")";
      throw std::runtime_error(msg.str());
    }

    ctrl.K[t] = -llt.solve(Qux);
    ctrl.k[t] = -llt.solve(qu);
    ctrl.C[t] = symmetrized(llt.solve(MatrixXd::Identity(d_u, d_u)));

    Vxx = symmetrized(Qxx - Qux.transpose() * llt.solve(Qux));
    vx = qx - Qux.transpose() * llt.solve(qu);
  }
  return ctrl;
}

double traj_kl(const TimeVaryingController& p, const TimeVaryingController& pbar,
               const LinearDynamics& dyn, const Gaussian& init) {
  const int T = p.horizon();
  const int d_u = p.action_dim();
  if (pbar.horizon() != T || pbar.action_dim() != d_u ||
      pbar.state_dim() != p.state_dim())
    throw std::invalid_argument("traj_kl: controller mismatch");

  const Marginals marg = forward_marginals(dyn, p, init);
  double total = 0.0;
  for (int t = 0; t < T; ++t) {
    const auto llt = chol_psd(pbar.C[t]);
    const MatrixXd Pbar = llt.solve(MatrixXd::Identity(d_u, d_u));
    const MatrixXd dK = p.K[t] - pbar.K[t];
    const VectorXd dmu =
        dK * marg.state[t].mean + (p.k[t] - pbar.k[t]);
    const double logdet_bar =
        2.0 * MatrixXd(llt.matrixL()).diagonal().array().log().sum();
    total += 0.5 * ((Pbar * p.C[t]).trace() - d_u + logdet_bar -
                    logdet_psd(p.C[t]) + dmu.dot(Pbar * dmu) +
                    (Pbar * dK * marg.state[t].cov * dK.transpose()).trace());
  }
  return std::max(total, 0.0);
}

KlSolveResult kl_constrained_solve(const TimeVaryingController& pbar,
                                   const LinearDynamics& dyn,
                                   const QuadCostExpansion& exp, double eps,
                                   const Gaussian& init) {
  if (!(eps > 0.0))
    throw std::invalid_argument("kl_constrained_solve: eps must be positive");
  const int T = static_cast<int>(exp.size());

  DualState dual;
  dual.epsilon = eps;

  auto solve_at = [&](double eta) {
    QuadCostExpansion surrogate;
    surrogate.reserve(T);
    const double cost_scale = 1.0 / (1.0 + eta);
    const double prev_scale = eta / (1.0 + eta);
    for (int t = 0; t < T; ++t) {
      QuadStage s;
      s.lxx = cost_scale * exp[t].lxx;
      s.luu = cost_scale * exp[t].luu;
      s.lux = cost_scale * exp[t].lux;
      s.lx = cost_scale * exp[t].lx;
      s.lu = cost_scale * exp[t].lu;
      s.l0 = cost_scale * exp[t].l0;
      if (prev_scale > 0.0)
        add_neg_log_gaussian(s, pbar.K[t], pbar.k[t], pbar.C[t], prev_scale);
      surrogate.push_back(std::move(s));
    }
    return maxent_lqr(dyn, surrogate);
  };

  KlSolveResult res;
  auto evaluate = [&](double eta) {
    res.ctrl = solve_at(eta);
    res.eta = eta;
    res.kl = traj_kl(res.ctrl, pbar, dyn, init);
    res.trace.emplace_back(eta, res.kl);
  };

  evaluate(dual.eta_min);
  if (res.kl <= eps) {
    res.constraint_active = false;
    return res;
  }
  res.constraint_active = true;

  // bracket: grow eta until the constraint is satisfied
  double lo = dual.eta_min;
  double hi = 1.0;
  bool bracketed = false;
  for (int i = 0; i < 50; ++i) {
    evaluate(hi);
    if (res.kl <= eps) {
      bracketed = true;
      break;
    }
    lo = hi;
    hi = std::min(hi * 10.0, dual.eta_max);
    if (lo == dual.eta_max) break;
  }
  if (!bracketed) {
    std::ostringstream msg;
    msg << "kl_constrained_solve: bracket exhaustion (eta=" << res.eta
        << ", kl=" << res.kl << ", eps=" << eps << ")";
    throw std::runtime_error(msg.str());
  }

  // geometric bisection into the acceptance band [0.5 eps, eps]
  TimeVaryingController feasible = res.ctrl;
  double feasible_eta = res.eta;
  double feasible_kl = res.kl;
  for (int i = 0; i < 20 && feasible_kl < 0.5 * eps; ++i) {
    const double mid = std::sqrt(lo * hi);
    evaluate(mid);
    if (res.kl > eps) {
      lo = mid;
    } else {
      hi = mid;
      feasible = res.ctrl;
      feasible_eta = res.eta;
      feasible_kl = res.kl;
    }
  }
  res.ctrl = std::move(feasible);
  res.eta = feasible_eta;
  res.kl = feasible_kl;
  return res;
}

}  // namespace gpsmem
