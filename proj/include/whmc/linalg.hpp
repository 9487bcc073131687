#pragma once

#include <span>
#include <vector>

#include <Eigen/Dense>

namespace whmc {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

inline std::span<const double> view(const Vector& v) {
  return {v.data(), static_cast<std::size_t>(v.size())};
}
inline std::span<double> view(Vector& v) {
  return {v.data(), static_cast<std::size_t>(v.size())};
}

// Row-major flattening, the on-disk layout for every matrix we persist.
inline std::vector<double> to_row_major(const Matrix& m) {
  std::vector<double> out(static_cast<std::size_t>(m.size()));
  std::size_t k = 0;
  for (Eigen::Index r = 0; r < m.rows(); ++r)
    for (Eigen::Index c = 0; c < m.cols(); ++c) out[k++] = m(r, c);
  return out;
}

inline Matrix from_row_major(std::span<const double> data, Eigen::Index rows, Eigen::Index cols) {
  Matrix m(rows, cols);
  std::size_t k = 0;
  for (Eigen::Index r = 0; r < rows; ++r)
    for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = data[k++];
  return m;
}

}  // namespace whmc
