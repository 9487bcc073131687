#pragma once

#include <cstddef>
#include <vector>

#include "whmc/linalg.hpp"
#include "whmc/rng.hpp"

namespace whmc {

// Normalized mixture of full-covariance Gaussians parameterized by precision
// matrices. Shared by the mixture targets and the independence proposal.
class GaussianMixture {
 public:
  GaussianMixture() = default;
  // Weights must be nonnegative and sum to 1 within 1e-9 (they are then
  // renormalized exactly). Precisions must be symmetric positive definite.
  GaussianMixture(std::vector<double> weights, std::vector<Vector> means,
                  std::vector<Matrix> precisions);

  std::size_t dim() const { return dim_; }
  std::size_t size() const { return means_.size(); }
  bool empty() const { return means_.empty(); }

  const std::vector<double>& weights() const { return weights_; }
  const std::vector<Vector>& means() const { return means_; }
  const std::vector<Matrix>& precisions() const { return precisions_; }
  const std::vector<double>& log_det_precisions() const { return log_det_precisions_; }

  double log_density(const Vector& x) const;
  // Writes d/dx log density into `grad`.
  double log_density_and_gradient(const Vector& x, Vector& grad) const;
  // Per-component log(w_k N(x; mu_k, Lambda_k^{-1})).
  std::vector<double> component_log_terms(const Vector& x) const;

  Vector sample(Rng& rng) const;

 private:
  double component_term(std::size_t k, const Vector& x, Vector* lambda_diff) const;

  std::size_t dim_ = 0;
  std::vector<double> weights_;
  std::vector<double> log_weights_;
  std::vector<Vector> means_;
  std::vector<Matrix> precisions_;
  std::vector<std::vector<double>> precision_rows_;  // row-major copies for the kernels
  std::vector<Matrix> precision_chol_;                // lower L with Lambda = L L^T
  std::vector<double> log_det_precisions_;
};

// log(sum(exp(values))) with max shift; -inf for an empty or all -inf input.
double log_sum_exp(const std::vector<double>& values);

}  // namespace whmc
