#pragma once

#include <Eigen/Dense>

#include "gpsmem/linalg.hpp"
#include "gpsmem/rng.hpp"

namespace gpsmem {

// Multivariate normal with an explicitly stored covariance. Covariances are
// kept as dense symmetric matrices; factorizations happen on demand.
struct Gaussian {
  VectorXd mean;
  MatrixXd cov;

  Gaussian() = default;
  Gaussian(VectorXd mu, MatrixXd sigma)
      : mean(std::move(mu)), cov(std::move(sigma)) {}

  int dim() const { return static_cast<int>(mean.size()); }

  // symmetry within 1e-12 relative, eigenvalues >= -1e-10
  bool valid() const;

  VectorXd sample(Rng& rng) const;
};

// Closed-form KL(p || q) in nats. Throws on dimension mismatch or a singular
// q covariance.
double gaussian_kl(const Gaussian& p, const Gaussian& q);

}  // namespace gpsmem
