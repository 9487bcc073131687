#pragma once

#include <cstddef>
#include <vector>

#include "whmc/linalg.hpp"

namespace whmc {

// A located mode with its local curvature (Hessian of -log pi).
struct Mode {
  Vector location;
  Matrix hessian;
  double weight = 1.0;
  std::size_t visits = 0;
};

// Symmetrizes h and, while it is not positive definite, adds a ridge of
// 1e-6 * trace / D (escalating tenfold).
Matrix regularize_hessian(const Matrix& h);

// Immutable collection of modes. Rebuilding after discovery produces a new
// value; samplers hold a snapshot.
class ModeLibrary {
 public:
  ModeLibrary() = default;
  explicit ModeLibrary(std::vector<Mode> modes);

  std::size_t size() const { return modes_.size(); }
  bool empty() const { return modes_.empty(); }
  std::size_t dim() const { return dim_; }
  const Mode& operator[](std::size_t k) const { return modes_[k]; }
  const std::vector<Mode>& modes() const { return modes_; }

  // Lower Cholesky factor L of the Hessian (H = L L^T) and log det H.
  const Matrix& hessian_chol(std::size_t k) const { return chol_[k]; }
  double log_det_hessian(std::size_t k) const { return log_det_[k]; }

  // Index of the closest mode in Euclidean distance; ties go to the lower index.
  std::size_t nearest(const Vector& x) const;
  // Squared Mahalanobis distance (x - mu_k)^T H_k (x - mu_k).
  double mahalanobis2(std::size_t k, const Vector& x) const;

  std::vector<Vector> locations() const;
  ModeLibrary with_visits(const std::vector<std::size_t>& visits) const;

 private:
  std::vector<Mode> modes_;
  std::vector<Matrix> chol_;
  std::vector<double> log_det_;
  std::size_t dim_ = 0;
};

}  // namespace whmc
