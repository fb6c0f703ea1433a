#include "gpsmem/affine_fit.hpp"

#include <stdexcept>

#include "gpsmem/linalg.hpp"

namespace gpsmem {

AffineFit fit_affine(const MatrixXd& X, const MatrixXd& Y, double ridge_rel,
                     const VectorXd* weights) {
  const int n = static_cast<int>(X.rows());
  const int d = static_cast<int>(X.cols());
  if (n == 0 || Y.rows() != n)
    throw std::invalid_argument("fit_affine: empty or mismatched sample set");

  VectorXd w = weights ? *weights : VectorXd::Ones(n);
  const double wsum = w.sum();
  const VectorXd x_mean = (X.transpose() * w) / wsum;
  const VectorXd y_mean = (Y.transpose() * w) / wsum;
  const MatrixXd Xc = X.rowwise() - x_mean.transpose();
  const MatrixXd Yc = Y.rowwise() - y_mean.transpose();

  const MatrixXd Xw = w.asDiagonal() * Xc;
  MatrixXd gram = Xc.transpose() * Xw;
  const double ridge = ridge_rel * std::max(gram.trace() / d, 1e-12);
  gram += ridge * MatrixXd::Identity(d, d);

  AffineFit fit;
  fit.gain = gram.ldlt().solve(Xc.transpose() * (w.asDiagonal() * Yc))
                 .transpose();
  fit.bias = y_mean - fit.gain * x_mean;
  return fit;
}

TimeVaryingController linearize_policy(
    const std::vector<TrajectorySample>& samples,
    const std::function<VectorXd(const VectorXd&)>& policy_mean,
    const MatrixXd& policy_cov, double ridge_rel) {
  if (samples.empty())
    throw std::invalid_argument("linearize_policy: empty sample set");
  const int T = samples[0].horizon();
  const int n = static_cast<int>(samples.size());
  const int d_x = static_cast<int>(samples[0].states[0].size());
  const int d_u = static_cast<int>(policy_cov.rows());

  TimeVaryingController ctrl;
  ctrl.K.reserve(T);
  ctrl.k.reserve(T);
  ctrl.C.assign(T, policy_cov);
  for (int t = 0; t < T; ++t) {
    MatrixXd X(n, d_x), Y(n, d_u);
    for (int j = 0; j < n; ++j) {
      X.row(j) = samples[j].states[t].transpose();
      Y.row(j) = policy_mean(samples[j].observations[t]).transpose();
    }
    AffineFit fit = fit_affine(X, Y, ridge_rel);
    ctrl.K.push_back(std::move(fit.gain));
    ctrl.k.push_back(std::move(fit.bias));
  }
  return ctrl;
}

}  // namespace gpsmem
