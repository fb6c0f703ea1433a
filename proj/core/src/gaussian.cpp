#include "gpsmem/gaussian.hpp"

#include <sstream>
#include <stdexcept>

namespace gpsmem {

bool Gaussian::valid() const {
  if (cov.rows() != dim() || cov.cols() != dim()) return false;
  const double scale = std::max(cov.cwiseAbs().maxCoeff(), 1.0);
  if (((cov - cov.transpose()).cwiseAbs().maxCoeff()) > 1e-12 * scale)
    return false;
  return min_eigenvalue(cov) >= -1e-10;
}

VectorXd Gaussian::sample(Rng& rng) const {
  if (cov.isZero(0.0)) return mean;
  const auto llt = chol_psd(cov);
  return mean + MatrixXd(llt.matrixL()) * rng.normal_vector(dim());
}

double gaussian_kl(const Gaussian& p, const Gaussian& q) {
  if (p.dim() != q.dim()) {
    std::ostringstream msg;
    msg << "gaussian_kl: dimension mismatch (" << p.dim() << " vs " << q.dim()
        << ")";
    throw std::invalid_argument(msg.str());
  }
  const int d = p.dim();
  Eigen::LLT<MatrixXd> lq;
  try {
    lq = chol_psd(q.cov);
  } catch (const std::runtime_error&) {
    std::ostringstream msg;
    msg << "gaussian_kl: singular q covariance, condition estimate ";
    Eigen::SelfAdjointEigenSolver<MatrixXd> eig(symmetrized(q.cov));
    msg << eig.eigenvalues().maxCoeff() /
               std::max(eig.eigenvalues().minCoeff(), 0.0);
    throw std::runtime_error(msg.str());
  }
  const MatrixXd qinv_p = lq.solve(p.cov);
  const VectorXd dm = q.mean - p.mean;
  const double maha = dm.dot(lq.solve(dm));
  const double logdet_q =
      2.0 * MatrixXd(lq.matrixL()).diagonal().array().log().sum();
  const double logdet_p = logdet_psd(p.cov);
  const double kl =
      0.5 * (qinv_p.trace() + maha - d + logdet_q - logdet_p);
  return std::max(kl, 0.0);
}

}  // namespace gpsmem
