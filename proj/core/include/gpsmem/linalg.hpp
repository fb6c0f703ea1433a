#pragma once

#include <Eigen/Dense>

namespace gpsmem {

using Eigen::MatrixXd;
using Eigen::VectorXd;

inline MatrixXd symmetrized(const MatrixXd& m) {
  return 0.5 * (m + m.transpose());
}

// Cholesky with jitter escalation: starts at 1e-10 * trace/d on the diagonal,
// grows x10 per retry, at most 5 retries. Throws std::runtime_error if the
// matrix is still not positive definite.
Eigen::LLT<MatrixXd> chol_psd(const MatrixXd& m);

// Solve A X = B through an existing Cholesky factor.
MatrixXd chol_solve(const Eigen::LLT<MatrixXd>& llt, const MatrixXd& b);

MatrixXd inverse_psd(const MatrixXd& m);

double logdet_psd(const MatrixXd& m);

// Eigendecompose and clamp eigenvalues from below.
MatrixXd psd_project(const MatrixXd& m, double floor);

double min_eigenvalue(const MatrixXd& m);

}  // namespace gpsmem
