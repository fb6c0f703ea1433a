#include <doctest.h>

#include <cmath>
#include <sstream>

#include "gpsmem/affine_fit.hpp"
#include "gpsmem/gaussian.hpp"
#include "gpsmem/linalg.hpp"
#include "gpsmem/marginals.hpp"
#include "gpsmem/rng.hpp"
#include "gpsmem/serialize.hpp"

using namespace gpsmem;

namespace {

MatrixXd random_psd(int d, Rng& rng, double scale = 1.0) {
  MatrixXd a(d, d);
  for (int i = 0; i < d; ++i) a.col(i) = rng.normal_vector(d);
  return scale * (a * a.transpose() + 0.1 * MatrixXd::Identity(d, d));
}

double log_density(const Gaussian& g, const VectorXd& x) {
  const VectorXd d = x - g.mean;
  const auto llt = chol_psd(g.cov);
  const VectorXd z = llt.matrixL().solve(d);
  return -0.5 * z.squaredNorm() - 0.5 * logdet_psd(g.cov) -
         0.5 * g.dim() * std::log(2.0 * 3.14159265358979323846);
}

}  // namespace

TEST_CASE("gaussian_kl is zero between identical distributions") {
  Rng rng(11);
  for (int trial = 0; trial < 5; ++trial) {
    Gaussian p(rng.normal_vector(3), random_psd(3, rng));
    CHECK(std::abs(gaussian_kl(p, p)) < 1e-12);
  }
}

TEST_CASE("gaussian_kl matches hand values for unit-variance shift and variance ratio") {
  VectorXd zero = VectorXd::Zero(1), one = VectorXd::Ones(1);
  MatrixXd i1 = MatrixXd::Identity(1, 1);
  // mean shift of 1 with unit variances: KL = 1/2
  CHECK(gaussian_kl(Gaussian(one, i1), Gaussian(zero, i1)) ==
        doctest::Approx(0.5).epsilon(1e-12));
  // variance 2 against variance 1: KL = (2 - 1 - ln 2)/2
  CHECK(gaussian_kl(Gaussian(zero, 2.0 * i1), Gaussian(zero, i1)) ==
        doctest::Approx(0.5 * (2.0 - 1.0 - std::log(2.0))).epsilon(1e-12));
}

TEST_CASE("gaussian_kl is nonnegative, zero only at equality") {
  Rng rng(12);
  for (int trial = 0; trial < 20; ++trial) {
    Gaussian p(rng.normal_vector(4), random_psd(4, rng));
    Gaussian q(rng.normal_vector(4), random_psd(4, rng));
    const double kl = gaussian_kl(p, q);
    CHECK(kl >= 0.0);
    CHECK(kl > 1e-10);  // distinct random pairs should not collide
  }
}

TEST_CASE("gaussian_kl is invariant under a shared invertible affine map") {
  Rng rng(13);
  const int d = 3;
  Gaussian p(rng.normal_vector(d), random_psd(d, rng));
  Gaussian q(rng.normal_vector(d), random_psd(d, rng));
  MatrixXd a(d, d);
  for (int i = 0; i < d; ++i) a.col(i) = rng.normal_vector(d);
  a += 3.0 * MatrixXd::Identity(d, d);  // keep it comfortably invertible
  const VectorXd b = rng.normal_vector(d);
  Gaussian pa(a * p.mean + b, a * p.cov * a.transpose());
  Gaussian qa(a * q.mean + b, a * q.cov * a.transpose());
  CHECK(gaussian_kl(pa, qa) == doctest::Approx(gaussian_kl(p, q)).epsilon(1e-8));
}

TEST_CASE("gaussian_kl agrees with a Monte Carlo estimate") {
  Rng rng(14);
  Gaussian p(rng.normal_vector(2), random_psd(2, rng));
  Gaussian q(rng.normal_vector(2), random_psd(2, rng));
  const int n = 100000;
  double sum = 0.0, sumsq = 0.0;
  for (int i = 0; i < n; ++i) {
    const VectorXd x = p.sample(rng);
    const double v = log_density(p, x) - log_density(q, x);
    sum += v;
    sumsq += v * v;
  }
  const double mean = sum / n;
  const double se = std::sqrt((sumsq / n - mean * mean) / n);
  CHECK(std::abs(gaussian_kl(p, q) - mean) < 3.0 * se);
}

TEST_CASE("gaussian sample matches mean and covariance empirically") {
  Rng rng(15);
  Gaussian p(rng.normal_vector(2), random_psd(2, rng));
  const int n = 100000;
  VectorXd mean = VectorXd::Zero(2);
  MatrixXd second = MatrixXd::Zero(2, 2);
  for (int i = 0; i < n; ++i) {
    const VectorXd x = p.sample(rng);
    mean += x;
    second += x * x.transpose();
  }
  mean /= n;
  const MatrixXd cov = second / n - mean * mean.transpose();
  for (int i = 0; i < 2; ++i)
    CHECK(std::abs(mean(i) - p.mean(i)) <
          3.0 * std::sqrt(p.cov(i, i) / n));
  CHECK((cov - p.cov).norm() < 0.05 * p.cov.norm());
}

TEST_CASE("gaussian validity check") {
  Gaussian ok(VectorXd::Zero(2), MatrixXd::Identity(2, 2));
  CHECK(ok.valid());
  MatrixXd asym(2, 2);
  asym << 1.0, 0.5, -0.5, 1.0;
  CHECK_FALSE(Gaussian(VectorXd::Zero(2), asym).valid());
  MatrixXd neg = MatrixXd::Identity(2, 2);
  neg(1, 1) = -1.0;
  CHECK_FALSE(Gaussian(VectorXd::Zero(2), neg).valid());
}

TEST_CASE("forward_marginals of the all-zero system stays at zero") {
  const int T = 6, d_x = 2, d_u = 1;
  LinearDynamics dyn;
  for (int t = 0; t + 1 < T; ++t) {
    dyn.fx.push_back(MatrixXd::Zero(d_x, d_x));
    dyn.fu.push_back(MatrixXd::Zero(d_x, d_u));
    dyn.fc.push_back(VectorXd::Zero(d_x));
    dyn.F.push_back(MatrixXd::Zero(d_x, d_x));
  }
  const auto ctrl = TimeVaryingController::zero_init(T, d_x, d_u, 0.0);
  Gaussian init(VectorXd::Zero(d_x), MatrixXd::Zero(d_x, d_x));
  const Marginals m = forward_marginals(dyn, ctrl, init);
  REQUIRE(static_cast<int>(m.state.size()) == T);
  REQUIRE(static_cast<int>(m.state_action.size()) == T);
  for (int t = 0; t < T; ++t) {
    CHECK(m.state[t].mean.norm() == 0.0);
    CHECK(m.state[t].cov.norm() == 0.0);
    CHECK(m.state_action[t].mean.norm() == 0.0);
    CHECK(m.state_action[t].cov.norm() == 0.0);
  }
}

TEST_CASE("forward_marginals variance of a scalar random walk accumulates") {
  const int T = 8;
  const double q = 0.3, r = 0.2, v0 = 0.05;
  LinearDynamics dyn;
  for (int t = 0; t + 1 < T; ++t) {
    dyn.fx.push_back(MatrixXd::Identity(1, 1));
    dyn.fu.push_back(MatrixXd::Identity(1, 1));
    dyn.fc.push_back(VectorXd::Zero(1));
    dyn.F.push_back(r * MatrixXd::Identity(1, 1));
  }
  const auto ctrl = TimeVaryingController::zero_init(T, 1, 1, q);
  Gaussian init(VectorXd::Zero(1), v0 * MatrixXd::Identity(1, 1));
  const Marginals m = forward_marginals(dyn, ctrl, init);
  for (int t = 0; t < T; ++t) {
    CHECK(m.state[t].cov(0, 0) ==
          doctest::Approx(v0 + t * (q + r)).epsilon(1e-12));
    CHECK(m.state[t].mean(0) == doctest::Approx(0.0).scale(1e-14));
    // joint (x, u) covariance with K = 0: diagonal blocks (var, q)
    CHECK(m.state_action[t].cov(0, 0) ==
          doctest::Approx(v0 + t * (q + r)).epsilon(1e-12));
    CHECK(m.state_action[t].cov(1, 1) == doctest::Approx(q).epsilon(1e-12));
    CHECK(m.state_action[t].cov(0, 1) == doctest::Approx(0.0).scale(1e-14));
  }
}

TEST_CASE("forward_marginals matches an empirical rollout distribution") {
  Rng rng(16);
  const int T = 4, d_x = 2, d_u = 1;
  LinearDynamics dyn;
  for (int t = 0; t + 1 < T; ++t) {
    MatrixXd fx(d_x, d_x);
    fx << 0.9, 0.1, -0.2, 0.8;
    MatrixXd fu(d_x, d_u);
    fu << 0.5, 0.3;
    VectorXd fc(d_x);
    fc << 0.05, -0.02;
    dyn.fx.push_back(fx);
    dyn.fu.push_back(fu);
    dyn.fc.push_back(fc);
    dyn.F.push_back(random_psd(d_x, rng, 0.02));
  }
  TimeVaryingController ctrl = TimeVaryingController::zero_init(T, d_x, d_u, 0.0);
  for (int t = 0; t < T; ++t) {
    ctrl.K[t] = MatrixXd::Random(d_u, d_x) * 0.3;
    ctrl.k[t] = rng.normal_vector(d_u) * 0.1;
    ctrl.C[t] = random_psd(d_u, rng, 0.05);
  }
  Gaussian init(rng.normal_vector(d_x), random_psd(d_x, rng, 0.03));

  const int n = 100000;
  std::vector<VectorXd> mean_acc(T, VectorXd::Zero(d_x));
  std::vector<MatrixXd> sq_acc(T, MatrixXd::Zero(d_x, d_x));
  for (int i = 0; i < n; ++i) {
    VectorXd x = init.sample(rng);
    for (int t = 0; t < T; ++t) {
      mean_acc[t] += x;
      sq_acc[t] += x * x.transpose();
      if (t + 1 < T) {
        Gaussian pu(ctrl.K[t] * x + ctrl.k[t], ctrl.C[t]);
        Gaussian px(dyn.fx[t] * x + dyn.fu[t] * pu.sample(rng) + dyn.fc[t],
                    dyn.F[t]);
        x = px.sample(rng);
      }
    }
  }
  const Marginals m = forward_marginals(dyn, ctrl, init);
  for (int t = 0; t < T; ++t) {
    const VectorXd emp_mean = mean_acc[t] / n;
    const MatrixXd emp_cov =
        sq_acc[t] / n - emp_mean * emp_mean.transpose();
    for (int i = 0; i < d_x; ++i)
      CHECK(std::abs(emp_mean(i) - m.state[t].mean(i)) <
            3.0 * std::sqrt(m.state[t].cov(i, i) / n));
    CHECK((emp_cov - m.state[t].cov).norm() < 0.05 * (m.state[t].cov.norm() + 1e-6));
  }
}

TEST_CASE("forward_marginals with zero noise reproduces the deterministic rollout") {
  const int T = 5, d_x = 2, d_u = 2;
  LinearDynamics dyn;
  for (int t = 0; t + 1 < T; ++t) {
    dyn.fx.push_back(MatrixXd::Identity(d_x, d_x));
    dyn.fu.push_back(0.1 * MatrixXd::Identity(d_x, d_u));
    VectorXd fc(d_x);
    fc << 0.01, -0.03;
    dyn.fc.push_back(fc);
    dyn.F.push_back(MatrixXd::Zero(d_x, d_x));
  }
  TimeVaryingController ctrl = TimeVaryingController::zero_init(T, d_x, d_u, 0.0);
  for (int t = 0; t < T; ++t) {
    ctrl.K[t] = -0.5 * MatrixXd::Identity(d_u, d_x);
    ctrl.k[t] = VectorXd::Constant(d_u, 0.2);
  }
  VectorXd x(d_x);
  x << 1.0, -1.0;
  Gaussian init(x, MatrixXd::Zero(d_x, d_x));
  const Marginals m = forward_marginals(dyn, ctrl, init);
  for (int t = 0; t < T; ++t) {
    CHECK((m.state[t].mean - x).norm() < 1e-12);
    CHECK(m.state[t].cov.norm() < 1e-12);
    const VectorXd u = ctrl.K[t] * x + ctrl.k[t];
    if (t + 1 < T) x = dyn.fx[t] * x + dyn.fu[t] * u + dyn.fc[t];
  }
}

namespace {

std::vector<TrajectorySample> state_grid_samples(int n, int T, int d_x,
                                                 Rng& rng) {
  std::vector<TrajectorySample> samples(n);
  for (auto& s : samples) {
    s.states.resize(T);
    s.observations.resize(T);
    for (int t = 0; t < T; ++t) {
      s.states[t] = rng.normal_vector(d_x);
      s.observations[t] = s.states[t];  // fully observed
    }
  }
  return samples;
}

}  // namespace

TEST_CASE("linearize_policy recovers an affine policy exactly") {
  Rng rng(17);
  const int T = 3, d_x = 3, d_u = 2;
  auto samples = state_grid_samples(6, T, d_x, rng);
  MatrixXd g(d_u, d_x);
  g << 1.0, -0.5, 0.2, 0.3, 0.7, -1.1;
  VectorXd c(d_u);
  c << 0.4, -0.9;
  const MatrixXd cov = 0.01 * MatrixXd::Identity(d_u, d_u);
  const auto ctrl = linearize_policy(
      samples, [&](const VectorXd& o) { return VectorXd(g * o + c); }, cov);
  REQUIRE(ctrl.horizon() == T);
  for (int t = 0; t < T; ++t) {
    CHECK((ctrl.K[t] - g).norm() < 1e-8);
    CHECK((ctrl.k[t] - c).norm() < 1e-8);
    CHECK((ctrl.C[t] - cov).norm() == 0.0);
  }
}

TEST_CASE("linearize_policy of a constant policy gives zero gains") {
  Rng rng(18);
  auto samples = state_grid_samples(5, 2, 2, rng);
  VectorXd c(1);
  c << 3.5;
  const auto ctrl = linearize_policy(
      samples, [&](const VectorXd&) { return c; },
      MatrixXd::Identity(1, 1));
  for (int t = 0; t < 2; ++t) {
    CHECK(ctrl.K[t].norm() < 1e-10);
    CHECK((ctrl.k[t] - c).norm() < 1e-10);
  }
}

TEST_CASE("fit_affine matches centered ridge normal equations") {
  Rng rng(19);
  const int n = 12, d_in = 3, d_out = 2;
  MatrixXd x(n, d_in), y(n, d_out);
  for (int i = 0; i < n; ++i) {
    x.row(i) = rng.normal_vector(d_in).transpose();
    const VectorXd xi = x.row(i).transpose();
    VectorXd yi(d_out);
    yi << xi(0) * xi(0) - xi(1), xi(2) + 0.5 * xi(1) * xi(1);
    y.row(i) = yi.transpose();
  }
  const double ridge_rel = 1e-6;
  const AffineFit fit = fit_affine(x, y, ridge_rel);

  const VectorXd xm = x.colwise().mean();
  const VectorXd ym = y.colwise().mean();
  const MatrixXd xc = x.rowwise() - xm.transpose();
  const MatrixXd yc = y.rowwise() - ym.transpose();
  MatrixXd gram = xc.transpose() * xc;
  gram += ridge_rel * (gram.trace() / d_in) * MatrixXd::Identity(d_in, d_in);
  const MatrixXd gain =
      gram.ldlt().solve(xc.transpose() * yc).transpose();
  CHECK((fit.gain - gain).norm() < 1e-8);
  CHECK((fit.bias - (ym - gain * xm)).norm() < 1e-8);
}

TEST_CASE("matrix serialization round-trips doubles exactly") {
  Rng rng(20);
  MatrixXd m(3, 4);
  for (int j = 0; j < 4; ++j) m.col(j) = rng.normal_vector(3);
  m(0, 0) = 1e-300;
  m(1, 1) = -9.87654321012345678e17;
  m(2, 2) = 0.1;
  std::stringstream ss;
  write_matrix(ss, "weights", m);
  write_vector(ss, "bias", m.col(1));
  write_scalar(ss, "scale", 2.5e-8);
  const MatrixXd back = read_matrix(ss, "weights");
  REQUIRE(back.rows() == 3);
  REQUIRE(back.cols() == 4);
  CHECK(back == m);
  CHECK(read_vector(ss, "bias") == m.col(1));
  CHECK(read_scalar(ss, "scale") == 2.5e-8);
}

TEST_CASE("matrix serialization enforces the expected section name") {
  std::stringstream ss;
  write_matrix(ss, "a", MatrixXd::Identity(2, 2));
  CHECK_THROWS(read_matrix(ss, "b"));
}

TEST_CASE("rng streams are deterministic and independent of call site") {
  Rng a = Rng::derive(7, 1, 2, 3);
  Rng b = Rng::derive(7, 1, 2, 3);
  for (int i = 0; i < 100; ++i) CHECK(a.normal() == b.normal());
  Rng c = Rng::derive(7, 1, 2, 4);
  bool any_diff = false;
  for (int i = 0; i < 10; ++i) any_diff = any_diff || (b.next() != c.next());
  CHECK(any_diff);
}

TEST_CASE("rng uniform stays in (0, 1] and normal has unit moments") {
  Rng rng(21);
  double lo = 1.0, hi = 0.0;
  for (int i = 0; i < 10000; ++i) {
    const double u = rng.uniform();
    CHECK(u > 0.0);
    CHECK(u <= 1.0);
    lo = std::min(lo, u);
    hi = std::max(hi, u);
  }
  CHECK(lo < 0.01);
  CHECK(hi > 0.99);
  const int n = 100000;
  double sum = 0.0, sumsq = 0.0;
  for (int i = 0; i < n; ++i) {
    const double z = rng.normal();
    sum += z;
    sumsq += z * z;
  }
  CHECK(std::abs(sum / n) < 3.0 / std::sqrt(static_cast<double>(n)));
  CHECK(sumsq / n == doctest::Approx(1.0).epsilon(0.02));
}

TEST_CASE("linalg helpers behave on basic inputs") {
  Rng rng(22);
  const MatrixXd a = random_psd(4, rng);
  CHECK((inverse_psd(a) * a - MatrixXd::Identity(4, 4)).norm() < 1e-10);
  CHECK(logdet_psd(a) ==
        doctest::Approx(std::log(a.determinant())).epsilon(1e-8));
  MatrixXd ind = MatrixXd::Identity(3, 3);
  ind(2, 2) = -2.0;
  const MatrixXd proj = psd_project(ind, 1e-3);
  CHECK(min_eigenvalue(proj) >= 1e-3 - 1e-12);
  CHECK(proj(0, 0) == doctest::Approx(1.0).epsilon(1e-12));
}
