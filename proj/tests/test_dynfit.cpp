#include <doctest.h>

#include <cmath>

#include "gpsmem/dynfit.hpp"
#include "gpsmem/rng.hpp"

using namespace gpsmem;

namespace {

// rollouts of x' = a x + b u + c + w, scalar, with externally chosen actions
std::vector<TrajectorySample> scalar_rollouts(int n, int T, double a, double b,
                                              double c, double noise_std,
                                              Rng& rng) {
  std::vector<TrajectorySample> samples(n);
  for (auto& s : samples) {
    double x = rng.normal();
    for (int t = 0; t < T; ++t) {
      const double u = rng.normal();
      s.states.push_back(VectorXd::Constant(1, x));
      s.actions.push_back(VectorXd::Constant(1, u));
      s.observations.push_back(VectorXd::Constant(1, x));
      s.costs.push_back(0.0);
      x = a * x + b * u + c + noise_std * rng.normal();
    }
  }
  return samples;
}

double fit_mse(const LinearDynamics& dyn,
               const std::vector<TrajectorySample>& samples) {
  double err = 0.0;
  int n = 0;
  for (const auto& s : samples)
    for (int t = 0; t + 1 < s.horizon(); ++t) {
      const VectorXd pred =
          dyn.fx[t] * s.states[t] + dyn.fu[t] * s.actions[t] + dyn.fc[t];
      err += (pred - s.states[t + 1]).squaredNorm();
      ++n;
    }
  return err / n;
}

}  // namespace

TEST_CASE("noiseless scalar affine dynamics are recovered exactly") {
  Rng rng(41);
  auto samples = scalar_rollouts(10, 6, 2.0, 1.0, 1.0, 0.0, rng);
  // weak prior so the per-step estimate dominates
  const LinearDynamics dyn = fit_dynamics(samples, 1, 1, 1e-8);
  REQUIRE(dyn.steps() == 5);
  for (int t = 0; t < dyn.steps(); ++t) {
    CHECK(dyn.fx[t](0, 0) == doctest::Approx(2.0).epsilon(1e-6));
    CHECK(dyn.fu[t](0, 0) == doctest::Approx(1.0).epsilon(1e-6));
    CHECK(dyn.fc[t](0) == doctest::Approx(1.0).epsilon(1e-6));
    CHECK(dyn.F[t](0, 0) < 1e-6);
  }
}

TEST_CASE("constant dynamics collapse onto the offset term") {
  Rng rng(42);
  const double c = -0.7;
  auto samples = scalar_rollouts(8, 5, 0.0, 0.0, c, 0.0, rng);
  const LinearDynamics dyn = fit_dynamics(samples, 1, 1, 1e-8);
  for (int t = 0; t < dyn.steps(); ++t) {
    CHECK(std::abs(dyn.fx[t](0, 0)) < 1e-6);
    CHECK(std::abs(dyn.fu[t](0, 0)) < 1e-6);
    CHECK(dyn.fc[t](0) == doctest::Approx(c).epsilon(1e-6));
  }
}

TEST_CASE("multivariate noiseless affine dynamics are recovered") {
  Rng rng(43);
  const int d_x = 2, d_u = 2, T = 5, n = 12;
  MatrixXd a(d_x, d_x), b(d_x, d_u);
  a << 0.9, 0.2, -0.1, 1.1;
  b << 0.5, 0.0, 0.3, -0.4;
  VectorXd c(d_x);
  c << 0.05, -0.02;
  std::vector<TrajectorySample> samples(n);
  for (auto& s : samples) {
    VectorXd x = rng.normal_vector(d_x);
    for (int t = 0; t < T; ++t) {
      const VectorXd u = rng.normal_vector(d_u);
      s.states.push_back(x);
      s.actions.push_back(u);
      s.observations.push_back(x);
      s.costs.push_back(0.0);
      x = a * x + b * u + c;
    }
  }
  const LinearDynamics dyn = fit_dynamics(samples, d_x, d_u, 1e-8);
  for (int t = 0; t < dyn.steps(); ++t) {
    CHECK((dyn.fx[t] - a).norm() < 1e-6);
    CHECK((dyn.fu[t] - b).norm() < 1e-6);
    CHECK((dyn.fc[t] - c).norm() < 1e-6);
  }
}

TEST_CASE("process noise lands in the residual covariance") {
  Rng rng(44);
  const double noise_std = 0.3;
  auto samples = scalar_rollouts(300, 4, 0.8, 0.5, 0.0, noise_std, rng);
  const LinearDynamics dyn = fit_dynamics(samples, 1, 1, 1.0);
  for (int t = 0; t < dyn.steps(); ++t)
    CHECK(dyn.F[t](0, 0) ==
          doctest::Approx(noise_std * noise_std).epsilon(0.10));
}

TEST_CASE("fit uses only the leading physical coordinates of augmented samples") {
  Rng rng(45);
  auto samples = scalar_rollouts(10, 5, 1.5, 0.5, 0.2, 0.0, rng);
  // append garbage memory coordinates; the physical fit must not change
  auto padded = samples;
  for (auto& s : padded)
    for (int t = 0; t < s.horizon(); ++t) {
      VectorXd xa(2), ua(2);
      xa << s.states[t](0), rng.normal();
      ua << s.actions[t](0), rng.normal();
      s.states[t] = xa;
      s.actions[t] = ua;
    }
  const LinearDynamics a = fit_dynamics(samples, 1, 1, 1e-8);
  const LinearDynamics b = fit_dynamics(padded, 1, 1, 1e-8);
  for (int t = 0; t < a.steps(); ++t) {
    CHECK(a.fx[t] == b.fx[t]);
    CHECK(a.fu[t] == b.fu[t]);
    CHECK(a.fc[t] == b.fc[t]);
  }
}

TEST_CASE("the time-varying fit never regresses below a pooled affine model") {
  Rng rng(46);
  // time-varying generator, so pooling across steps is strictly worse
  const int n = 40, T = 6;
  std::vector<TrajectorySample> samples(n);
  for (auto& s : samples) {
    double x = rng.normal();
    for (int t = 0; t < T; ++t) {
      const double u = rng.normal();
      s.states.push_back(VectorXd::Constant(1, x));
      s.actions.push_back(VectorXd::Constant(1, u));
      s.observations.push_back(VectorXd::Constant(1, x));
      s.costs.push_back(0.0);
      const double a = 0.5 + 0.2 * t;
      x = a * x + 0.5 * u + 0.05 * rng.normal();
    }
  }
  const LinearDynamics fit = fit_dynamics(samples, 1, 1, 1.0);
  // pooled model: one affine fit shared by all steps
  LinearDynamics pooled = fit;
  {
    const int m = n * (T - 1);
    MatrixXd X(m, 2);
    VectorXd y(m);
    int r = 0;
    for (const auto& s : samples)
      for (int t = 0; t + 1 < T; ++t, ++r) {
        X(r, 0) = s.states[t](0);
        X(r, 1) = s.actions[t](0);
        y(r) = s.states[t + 1](0);
      }
    const VectorXd xm = X.colwise().mean();
    const double ym = y.mean();
    const MatrixXd Xc = X.rowwise() - xm.transpose();
    const VectorXd yc = y.array() - ym;
    const VectorXd coef = (Xc.transpose() * Xc).ldlt().solve(Xc.transpose() * yc);
    for (int t = 0; t < pooled.steps(); ++t) {
      pooled.fx[t](0, 0) = coef(0);
      pooled.fu[t](0, 0) = coef(1);
      pooled.fc[t](0) = ym - coef(0) * xm(0) - coef(1) * xm(1);
    }
  }
  CHECK(fit_mse(fit, samples) <= fit_mse(pooled, samples) + 1e-12);
}

TEST_CASE("fit_dynamics rejects degenerate inputs") {
  Rng rng(47);
  auto one = scalar_rollouts(1, 4, 1.0, 1.0, 0.0, 0.1, rng);
  CHECK_THROWS(fit_dynamics(one, 1, 1));
  auto bad = scalar_rollouts(3, 4, 1.0, 1.0, 0.0, 0.1, rng);
  bad[1].states[2](0) = std::nan("");
  CHECK_THROWS(fit_dynamics(bad, 1, 1));
}

TEST_CASE("augment_fit installs the exact memory block structure") {
  Rng rng(48);
  auto samples = scalar_rollouts(6, 5, 1.2, 0.8, 0.1, 0.05, rng);
  const LinearDynamics phys = fit_dynamics(samples, 1, 1);
  const int d_h = 3;
  const double sigma2 = 1e-6;
  const LinearDynamics aug = augment_fit(phys, d_h, sigma2);
  REQUIRE(aug.steps() == phys.steps());
  for (int t = 0; t < aug.steps(); ++t) {
    REQUIRE(aug.fx[t].rows() == 1 + d_h);
    REQUIRE(aug.fu[t].cols() == 1 + d_h);
    // physical blocks copied bit for bit
    CHECK(aug.fx[t].topLeftCorner(1, 1) == phys.fx[t]);
    CHECK(aug.fu[t].topLeftCorner(1, 1) == phys.fu[t]);
    CHECK(aug.fc[t].head(1) == phys.fc[t]);
    CHECK(aug.F[t].topLeftCorner(1, 1) == phys.F[t]);
    // memory rows: identity transition and write gain, no coupling
    CHECK(aug.fx[t].bottomRightCorner(d_h, d_h) ==
          MatrixXd::Identity(d_h, d_h));
    CHECK(aug.fu[t].bottomRightCorner(d_h, d_h) ==
          MatrixXd::Identity(d_h, d_h));
    CHECK(aug.fx[t].topRightCorner(1, d_h).norm() == 0.0);
    CHECK(aug.fx[t].bottomLeftCorner(d_h, 1).norm() == 0.0);
    CHECK(aug.fu[t].topRightCorner(1, d_h).norm() == 0.0);
    CHECK(aug.fu[t].bottomLeftCorner(d_h, 1).norm() == 0.0);
    CHECK(aug.fc[t].tail(d_h).norm() == 0.0);
    CHECK(aug.F[t].bottomRightCorner(d_h, d_h) ==
          sigma2 * MatrixXd::Identity(d_h, d_h));
    CHECK(aug.F[t].topRightCorner(1, d_h).norm() == 0.0);
  }
}

TEST_CASE("augment_fit with zero memory is the identity") {
  Rng rng(49);
  auto samples = scalar_rollouts(5, 4, 0.9, 1.0, 0.0, 0.1, rng);
  const LinearDynamics phys = fit_dynamics(samples, 1, 1);
  const LinearDynamics same = augment_fit(phys, 0, 1e-6);
  for (int t = 0; t < phys.steps(); ++t) {
    CHECK(same.fx[t] == phys.fx[t]);
    CHECK(same.fu[t] == phys.fu[t]);
    CHECK(same.fc[t] == phys.fc[t]);
    CHECK(same.F[t] == phys.F[t]);
  }
}
