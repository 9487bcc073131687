#include "whmc/target.hpp"

#include <string>

#include "whmc/errors.hpp"

namespace whmc {

Vector TargetDensity::grad_log_density(const Vector& x) const {
  Vector g;
  log_density_and_gradient(x, g);
  return g;
}

double TargetDensity::log_density_and_gradient(const Vector& x, Vector& grad) const {
  grad = grad_log_density(x);
  return log_density(x);
}

void TargetDensity::check_dim(const Vector& x) const {
  if (static_cast<std::size_t>(x.size()) != dim()) {
    throw ConfigError("dimension mismatch: expected " + std::to_string(dim()) + ", got " +
                      std::to_string(x.size()));
  }
}

double PotentialEnergy::value(const Vector& x) const {
  if (!augmented_) return -target_->log_density(x);
  const Eigen::Index d = static_cast<Eigen::Index>(target_->dim());
  scratch_x_ = x.head(d);
  const double extra = x[d];
  return -target_->log_density(scratch_x_) + 0.5 * extra * extra;
}

double PotentialEnergy::value_and_gradient(const Vector& x, Vector& grad) const {
  if (!augmented_) {
    const double lp = target_->log_density_and_gradient(x, grad);
    grad = -grad;
    return -lp;
  }
  const Eigen::Index d = static_cast<Eigen::Index>(target_->dim());
  scratch_x_ = x.head(d);
  const double lp = target_->log_density_and_gradient(scratch_x_, scratch_g_);
  grad.resize(d + 1);
  grad.head(d) = -scratch_g_;
  grad[d] = x[d];
  return -lp + 0.5 * x[d] * x[d];
}

}  // namespace whmc
