#pragma once

#include <Eigen/Dense>
#include <vector>

namespace gpsmem {

// One stage of a quadratic cost model in absolute coordinates:
//   l(x, u) = 1/2 x'lxx x + 1/2 u'luu u + u'lux x + lx'x + lu'u + l0
struct QuadStage {
  Eigen::MatrixXd lxx, luu, lux;
  Eigen::VectorXd lx, lu;
  double l0 = 0.0;

  static QuadStage zero(int d_x, int d_u) {
    QuadStage q;
    q.lxx = Eigen::MatrixXd::Zero(d_x, d_x);
    q.luu = Eigen::MatrixXd::Zero(d_u, d_u);
    q.lux = Eigen::MatrixXd::Zero(d_u, d_x);
    q.lx = Eigen::VectorXd::Zero(d_x);
    q.lu = Eigen::VectorXd::Zero(d_u);
    return q;
  }

  double eval(const Eigen::VectorXd& x, const Eigen::VectorXd& u) const {
    return 0.5 * x.dot(lxx * x) + 0.5 * u.dot(luu * u) + u.dot(lux * x) +
           lx.dot(x) + lu.dot(u) + l0;
  }
};

using QuadCostExpansion = std::vector<QuadStage>;

}  // namespace gpsmem
