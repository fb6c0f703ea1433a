#pragma once

#include <Eigen/Dense>
#include <iosfwd>
#include <string>

namespace gpsmem {

// Text matrix format used by checkpoint files: a header line `name rows cols`
// followed by row-major values, 17 significant digits (round-trips doubles).

void write_matrix(std::ostream& os, const std::string& name,
                  const Eigen::MatrixXd& m);
void write_vector(std::ostream& os, const std::string& name,
                  const Eigen::VectorXd& v);
void write_scalar(std::ostream& os, const std::string& name, double x);

// Reads the next matrix section. If `expected` is non-empty, throws when the
// stored name differs.
Eigen::MatrixXd read_matrix(std::istream& is, const std::string& expected = "",
                            std::string* name_out = nullptr);
Eigen::VectorXd read_vector(std::istream& is, const std::string& expected = "");
double read_scalar(std::istream& is, const std::string& expected = "");

}  // namespace gpsmem
