#include "gpsmem/linalg.hpp"

#include <sstream>
#include <stdexcept>

namespace gpsmem {

Eigen::LLT<MatrixXd> chol_psd(const MatrixXd& m) {
  const int d = static_cast<int>(m.rows());
  MatrixXd sym = symmetrized(m);
  Eigen::LLT<MatrixXd> llt(sym);
  if (llt.info() == Eigen::Success) return llt;

  double jitter = 1e-10 * std::max(sym.trace() / d, 1e-300);
  for (int retry = 0; retry < 5; ++retry) {
    MatrixXd jittered = sym + jitter * MatrixXd::Identity(d, d);
    llt.compute(jittered);
    if (llt.info() == Eigen::Success) return llt;
    jitter *= 10.0;
  }
  std::ostringstream msg;
  msg << "chol_psd: matrix not positive definite after jitter escalation"
      << " (d=" << d << ", min eig=" << min_eigenvalue(sym) << ")";
  throw std::runtime_error(msg.str());
}

MatrixXd chol_solve(const Eigen::LLT<MatrixXd>& llt, const MatrixXd& b) {
  return llt.solve(b);
}

MatrixXd inverse_psd(const MatrixXd& m) {
  const int d = static_cast<int>(m.rows());
  return symmetrized(chol_psd(m).solve(MatrixXd::Identity(d, d)));
}

double logdet_psd(const MatrixXd& m) {
  const auto llt = chol_psd(m);
  return 2.0 * MatrixXd(llt.matrixL()).diagonal().array().log().sum();
}

MatrixXd psd_project(const MatrixXd& m, double floor) {
  Eigen::SelfAdjointEigenSolver<MatrixXd> eig(symmetrized(m));
  VectorXd vals = eig.eigenvalues().cwiseMax(floor);
  return symmetrized(eig.eigenvectors() * vals.asDiagonal() *
                     eig.eigenvectors().transpose());
}

double min_eigenvalue(const MatrixXd& m) {
  Eigen::SelfAdjointEigenSolver<MatrixXd> eig(symmetrized(m));
  return eig.eigenvalues().minCoeff();
}

}  // namespace gpsmem
