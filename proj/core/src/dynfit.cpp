#include "gpsmem/dynfit.hpp"

#include <stdexcept>

#include "gpsmem/linalg.hpp"

namespace gpsmem {

LinearDynamics fit_dynamics(const std::vector<TrajectorySample>& samples,
                            int d_x, int d_u, double prior_strength) {
  if (samples.size() < 2)
    throw std::invalid_argument("fit_dynamics: need at least 2 samples");
  const int T = samples[0].horizon();
  for (const auto& s : samples)
    if (s.horizon() != T)
      throw std::invalid_argument("fit_dynamics: mismatched horizons");

  const int d_v = d_x + d_u;      // regressor (x_t, u_t)
  const int D = d_v + d_x;        // joint tuple (x_t, u_t, x_{t+1})
  const int n = static_cast<int>(samples.size());

  auto tuple_at = [&](const TrajectorySample& s, int t) {
    VectorXd z(D);
    z << s.states[t].head(d_x), s.actions[t].head(d_u),
        s.states[t + 1].head(d_x);
    if (!z.allFinite())
      throw std::invalid_argument("fit_dynamics: NaN in samples");
    return z;
  };

  // pooled prior statistics over all steps and samples
  VectorXd prior_mean = VectorXd::Zero(D);
  MatrixXd prior_scatter = MatrixXd::Zero(D, D);
  const int n_total = n * (T - 1);
  for (const auto& s : samples)
    for (int t = 0; t + 1 < T; ++t) prior_mean += tuple_at(s, t);
  prior_mean /= n_total;
  for (const auto& s : samples)
    for (int t = 0; t + 1 < T; ++t) {
      const VectorXd d = tuple_at(s, t) - prior_mean;
      prior_scatter += d * d.transpose();
    }
  MatrixXd prior_cov = prior_scatter / n_total;
  prior_cov += 1e-10 * std::max(prior_cov.trace() / D, 1e-12) *
               MatrixXd::Identity(D, D);

  LinearDynamics dyn;
  const double n0 = prior_strength;
  for (int t = 0; t + 1 < T; ++t) {
    VectorXd m = VectorXd::Zero(D);
    for (const auto& s : samples) m += tuple_at(s, t);
    m /= n;
    MatrixXd scatter = MatrixXd::Zero(D, D);
    for (const auto& s : samples) {
      const VectorXd d = tuple_at(s, t) - m;
      scatter += d * d.transpose();
    }
    const VectorXd dm = m - prior_mean;
    const MatrixXd cov =
        (scatter + n0 * prior_cov +
         (n * n0 / (n + n0)) * dm * dm.transpose()) /
        (n + n0);
    const VectorXd mean = (n * m + n0 * prior_mean) / (n + n0);

    const MatrixXd cov_vv = cov.topLeftCorner(d_v, d_v);
    const MatrixXd cov_vy = cov.topRightCorner(d_v, d_x);
    const MatrixXd cov_yy = cov.bottomRightCorner(d_x, d_x);

    const auto llt = chol_psd(cov_vv);
    const MatrixXd coeff = llt.solve(cov_vy).transpose();  // d_x x d_v

    dyn.fx.push_back(coeff.leftCols(d_x));
    dyn.fu.push_back(coeff.rightCols(d_u));
    dyn.fc.push_back(mean.tail(d_x) - coeff * mean.head(d_v));
    MatrixXd resid = symmetrized(cov_yy - coeff * cov_vy);
    const double max_eig =
        Eigen::SelfAdjointEigenSolver<MatrixXd>(resid).eigenvalues().maxCoeff();
    dyn.F.push_back(psd_project(resid, 1e-8 * std::max(max_eig, 1.0)));
  }
  return dyn;
}

LinearDynamics augment_fit(const LinearDynamics& physical, int d_h,
                           double sigma2) {
  if (d_h == 0) return physical;
  const int d_x = physical.state_dim();
  const int d_u = physical.action_dim();
  LinearDynamics dyn;
  for (int t = 0; t < physical.steps(); ++t) {
    MatrixXd fx = MatrixXd::Zero(d_x + d_h, d_x + d_h);
    fx.topLeftCorner(d_x, d_x) = physical.fx[t];
    fx.bottomRightCorner(d_h, d_h) = MatrixXd::Identity(d_h, d_h);

    MatrixXd fu = MatrixXd::Zero(d_x + d_h, d_u + d_h);
    fu.topLeftCorner(d_x, d_u) = physical.fu[t];
    fu.bottomRightCorner(d_h, d_h) = MatrixXd::Identity(d_h, d_h);

    VectorXd fc = VectorXd::Zero(d_x + d_h);
    fc.head(d_x) = physical.fc[t];

    MatrixXd F = MatrixXd::Zero(d_x + d_h, d_x + d_h);
    F.topLeftCorner(d_x, d_x) = physical.F[t];
    F.bottomRightCorner(d_h, d_h) = sigma2 * MatrixXd::Identity(d_h, d_h);

    dyn.fx.push_back(std::move(fx));
    dyn.fu.push_back(std::move(fu));
    dyn.fc.push_back(std::move(fc));
    dyn.F.push_back(std::move(F));
  }
  return dyn;
}

}  // namespace gpsmem
