#include "gpsmem/marginals.hpp"

#include <stdexcept>

namespace gpsmem {

Marginals forward_marginals(const LinearDynamics& dyn,
                            const TimeVaryingController& ctrl,
                            const Gaussian& init) {
  const int T = ctrl.horizon();
  const int d_x = ctrl.state_dim();
  const int d_u = ctrl.action_dim();
  if (dyn.steps() != T - 1)
    throw std::invalid_argument("forward_marginals: horizon mismatch");
  if (init.dim() != d_x || (T > 1 && (dyn.state_dim() != d_x ||
                                      dyn.action_dim() != d_u)))
    throw std::invalid_argument("forward_marginals: dimension mismatch");

  Marginals out;
  out.state.reserve(T);
  out.state_action.reserve(T);

  VectorXd mu = init.mean;
  MatrixXd sigma = symmetrized(init.cov);
  for (int t = 0; t < T; ++t) {
    out.state.emplace_back(mu, sigma);

    const MatrixXd& K = ctrl.K[t];
    const VectorXd mu_u = K * mu + ctrl.k[t];
    Gaussian joint;
    joint.mean.resize(d_x + d_u);
    joint.mean << mu, mu_u;
    joint.cov.resize(d_x + d_u, d_x + d_u);
    const MatrixXd cross = sigma * K.transpose();
    joint.cov.topLeftCorner(d_x, d_x) = sigma;
    joint.cov.topRightCorner(d_x, d_u) = cross;
    joint.cov.bottomLeftCorner(d_u, d_x) = cross.transpose();
    joint.cov.bottomRightCorner(d_u, d_u) =
        symmetrized(K * cross + ctrl.C[t]);
    out.state_action.push_back(std::move(joint));

    if (t + 1 < T) {
      MatrixXd G(d_x, d_x + d_u);
      G << dyn.fx[t], dyn.fu[t];
      mu = dyn.fx[t] * mu + dyn.fu[t] * mu_u + dyn.fc[t];
      sigma = symmetrized(G * out.state_action[t].cov * G.transpose() +
                          dyn.F[t]);
    }
  }
  return out;
}

}  // namespace gpsmem
