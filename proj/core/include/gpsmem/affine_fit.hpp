#pragma once

#include <functional>
#include <vector>

#include "gpsmem/trajectory.hpp"

namespace gpsmem {

struct AffineFit {
  MatrixXd gain;  // d_out x d_in
  VectorXd bias;
};

// Ridge-regularized affine least squares. Rows of X/Y are samples; the ridge
// is relative to trace(Xc'Xc)/d so the fit is scale-free. Weights, when
// given, multiply squared residuals per row.
AffineFit fit_affine(const MatrixXd& X, const MatrixXd& Y, double ridge_rel,
                     const VectorXd* weights = nullptr);

// Per-time-step affine fit of a policy mean evaluated at sampled augmented
// states. The controller covariance is the policy action covariance at every
// step. Throws on an empty sample set.
TimeVaryingController linearize_policy(
    const std::vector<TrajectorySample>& samples,
    const std::function<VectorXd(const VectorXd&)>& policy_mean,
    const MatrixXd& policy_cov, double ridge_rel = 1e-10);

}  // namespace gpsmem
