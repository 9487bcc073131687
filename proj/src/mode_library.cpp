#include "whmc/mode_library.hpp"

#include <cmath>
#include <limits>
#include <string>

#include "whmc/errors.hpp"
#include "whmc/simd/kernels.hpp"

namespace whmc {

Matrix regularize_hessian(const Matrix& h) {
  Matrix s = 0.5 * (h + h.transpose());
  const auto d = static_cast<double>(s.rows());
  double ridge = 1e-6 * std::abs(s.trace()) / d;
  if (!(ridge > 0.0)) ridge = 1e-6;
  for (int attempt = 0; attempt < 40; ++attempt) {
    Eigen::LLT<Matrix> llt(s);
    if (llt.info() == Eigen::Success) return s;
    s.diagonal().array() += ridge;
    ridge *= 10.0;
  }
  throw NumericError("regularize_hessian: could not make matrix positive definite");
}

ModeLibrary::ModeLibrary(std::vector<Mode> modes) : modes_(std::move(modes)) {
  if (modes_.empty()) return;
  dim_ = static_cast<std::size_t>(modes_.front().location.size());
  const auto d = static_cast<Eigen::Index>(dim_);
  for (std::size_t k = 0; k < modes_.size(); ++k) {
    Mode& m = modes_[k];
    if (m.location.size() != d || m.hessian.rows() != d || m.hessian.cols() != d)
      throw ConfigError("mode library: mode " + std::to_string(k) + " has wrong shape");
    if (!(m.weight >= 0.0)) throw ConfigError("mode library: negative weight");
    Eigen::LLT<Matrix> llt(m.hessian);
    if (llt.info() != Eigen::Success || !m.hessian.isApprox(m.hessian.transpose(), 1e-9))
      throw ConfigError("mode library: Hessian of mode " + std::to_string(k) +
                        " is not symmetric positive definite");
    Matrix l = llt.matrixL();
    log_det_.push_back(2.0 * l.diagonal().array().log().sum());
    chol_.push_back(std::move(l));
  }
}

std::size_t ModeLibrary::nearest(const Vector& x) const {
  std::size_t best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  const std::span<const double> xs(x.data(), dim_);
  for (std::size_t k = 0; k < modes_.size(); ++k) {
    const double d = simd::squared_distance(xs, view(modes_[k].location));
    if (d < best_d) {
      best_d = d;
      best = k;
    }
  }
  return best;
}

double ModeLibrary::mahalanobis2(std::size_t k, const Vector& x) const {
  const Vector diff = x.head(static_cast<Eigen::Index>(dim_)) - modes_[k].location;
  return (chol_[k].transpose() * diff).squaredNorm();
}

std::vector<Vector> ModeLibrary::locations() const {
  std::vector<Vector> out;
  out.reserve(modes_.size());
  for (const Mode& m : modes_) out.push_back(m.location);
  return out;
}

ModeLibrary ModeLibrary::with_visits(const std::vector<std::size_t>& visits) const {
  std::vector<Mode> copy = modes_;
  for (std::size_t k = 0; k < copy.size() && k < visits.size(); ++k) copy[k].visits = visits[k];
  return ModeLibrary(std::move(copy));
}

}  // namespace whmc
