#include "gpsmem/serialize.hpp"

#include <istream>
#include <limits>
#include <ostream>
#include <sstream>
#include <stdexcept>

namespace gpsmem {

void write_matrix(std::ostream& os, const std::string& name,
                  const Eigen::MatrixXd& m) {
  os << name << ' ' << m.rows() << ' ' << m.cols() << '\n';
  const auto old_precision = os.precision(17);
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) {
      if (c) os << ' ';
      os << m(r, c);
    }
    os << '\n';
  }
  os.precision(old_precision);
}

void write_vector(std::ostream& os, const std::string& name,
                  const Eigen::VectorXd& v) {
  write_matrix(os, name, v);
}

void write_scalar(std::ostream& os, const std::string& name, double x) {
  Eigen::MatrixXd m(1, 1);
  m(0, 0) = x;
  write_matrix(os, name, m);
}

Eigen::MatrixXd read_matrix(std::istream& is, const std::string& expected,
                            std::string* name_out) {
  std::string name;
  Eigen::Index rows = 0, cols = 0;
  if (!(is >> name >> rows >> cols))
    throw std::runtime_error("read_matrix: truncated stream");
  if (!expected.empty() && name != expected)
    throw std::runtime_error("read_matrix: expected section '" + expected +
                             "', found '" + name + "'");
  if (name_out) *name_out = name;
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r)
    for (Eigen::Index c = 0; c < cols; ++c)
      if (!(is >> m(r, c)))
        throw std::runtime_error("read_matrix: truncated values in '" + name +
                                 "'");
  return m;
}

Eigen::VectorXd read_vector(std::istream& is, const std::string& expected) {
  Eigen::MatrixXd m = read_matrix(is, expected);
  if (m.cols() != 1)
    throw std::runtime_error("read_vector: section is not a column vector");
  return m.col(0);
}

double read_scalar(std::istream& is, const std::string& expected) {
  Eigen::MatrixXd m = read_matrix(is, expected);
  if (m.size() != 1)
    throw std::runtime_error("read_scalar: section is not a scalar");
  return m(0, 0);
}

}  // namespace gpsmem
