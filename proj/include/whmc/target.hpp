#pragma once

#include <cstddef>

#include "whmc/linalg.hpp"

namespace whmc {

// Unnormalized log-density with gradient. Implementations are immutable after
// construction and safe to evaluate concurrently.
class TargetDensity {
 public:
  virtual ~TargetDensity() = default;

  virtual std::size_t dim() const = 0;
  virtual double log_density(const Vector& x) const = 0;
  virtual Vector grad_log_density(const Vector& x) const;

  // Writes the gradient into `grad` (resized as needed) and returns the
  // log-density. The default calls the two single-purpose methods.
  virtual double log_density_and_gradient(const Vector& x, Vector& grad) const;

 protected:
  void check_dim(const Vector& x) const;
};

// Potential energy U = -log pi, optionally augmented with an auxiliary
// coordinate that carries an independent standard normal (U += x_{D+1}^2 / 2).
class PotentialEnergy {
 public:
  explicit PotentialEnergy(const TargetDensity& target, bool augmented = false)
      : target_(&target), augmented_(augmented) {}

  std::size_t dim() const { return target_->dim() + (augmented_ ? 1 : 0); }
  std::size_t base_dim() const { return target_->dim(); }
  bool augmented() const { return augmented_; }
  const TargetDensity& target() const { return *target_; }

  double value(const Vector& x) const;
  // Returns U(x) and writes grad U into `grad`.
  double value_and_gradient(const Vector& x, Vector& grad) const;

 private:
  const TargetDensity* target_;
  bool augmented_;
  mutable Vector scratch_x_;
  mutable Vector scratch_g_;
};

}  // namespace whmc
