#include "whmc/gaussian_mixture.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <string>

#include "whmc/errors.hpp"
#include "whmc/simd/kernels.hpp"

namespace whmc {

double log_sum_exp(const std::vector<double>& values) {
  double m = -std::numeric_limits<double>::infinity();
  for (double v : values) m = std::max(m, v);
  if (!std::isfinite(m)) return m;
  double s = 0.0;
  for (double v : values) s += std::exp(v - m);
  return m + std::log(s);
}

GaussianMixture::GaussianMixture(std::vector<double> weights, std::vector<Vector> means,
                                 std::vector<Matrix> precisions)
    : weights_(std::move(weights)), means_(std::move(means)), precisions_(std::move(precisions)) {
  if (means_.empty()) throw ConfigError("gaussian mixture: no components");
  if (weights_.size() != means_.size() || precisions_.size() != means_.size())
    throw ConfigError("gaussian mixture: component arrays differ in length");
  dim_ = static_cast<std::size_t>(means_.front().size());
  double total = 0.0;
  for (double w : weights_) {
    if (!(w >= 0.0)) throw ConfigError("gaussian mixture: negative weight");
    total += w;
  }
  if (std::abs(total - 1.0) > 1e-9) throw ConfigError("gaussian mixture: weights do not sum to 1");
  for (double& w : weights_) w /= total;

  const auto d = static_cast<Eigen::Index>(dim_);
  for (std::size_t k = 0; k < means_.size(); ++k) {
    const Matrix& p = precisions_[k];
    if (means_[k].size() != d || p.rows() != d || p.cols() != d)
      throw ConfigError("gaussian mixture: component " + std::to_string(k) + " has wrong shape");
    if (!p.isApprox(p.transpose(), 1e-10))
      throw ConfigError("gaussian mixture: precision " + std::to_string(k) + " not symmetric");
    Eigen::LLT<Matrix> llt(p);
    if (llt.info() != Eigen::Success)
      throw ConfigError("gaussian mixture: precision " + std::to_string(k) + " not positive definite");
    Matrix l = llt.matrixL();
    log_det_precisions_.push_back(2.0 * l.diagonal().array().log().sum());
    precision_chol_.push_back(std::move(l));
    precision_rows_.push_back(to_row_major(p));
    log_weights_.push_back(weights_[k] > 0.0 ? std::log(weights_[k])
                                             : -std::numeric_limits<double>::infinity());
  }
}

double GaussianMixture::component_term(std::size_t k, const Vector& x, Vector* lambda_diff) const {
  const auto d = static_cast<std::size_t>(dim_);
  Vector diff(static_cast<Eigen::Index>(d));
  simd::subtract(view(x), view(means_[k]), view(diff));
  Vector local;
  Vector& y = lambda_diff != nullptr ? *lambda_diff : local;
  y.resize(static_cast<Eigen::Index>(d));
  simd::matvec(precision_rows_[k], d, d, view(diff), view(y));
  const double quad = simd::dot(view(diff), view(y));
  constexpr double kLog2Pi = 1.8378770664093453;
  return log_weights_[k] + 0.5 * log_det_precisions_[k] - 0.5 * static_cast<double>(d) * kLog2Pi -
         0.5 * quad;
}

std::vector<double> GaussianMixture::component_log_terms(const Vector& x) const {
  if (static_cast<std::size_t>(x.size()) != dim_)
    throw ConfigError("gaussian mixture: dimension mismatch");
  std::vector<double> terms(size());
  for (std::size_t k = 0; k < size(); ++k) terms[k] = component_term(k, x, nullptr);
  return terms;
}

double GaussianMixture::log_density(const Vector& x) const {
  return log_sum_exp(component_log_terms(x));
}

double GaussianMixture::log_density_and_gradient(const Vector& x, Vector& grad) const {
  if (static_cast<std::size_t>(x.size()) != dim_)
    throw ConfigError("gaussian mixture: dimension mismatch");
  const std::size_t n = size();
  std::vector<double> terms(n);
  std::vector<Vector> lambda_diffs(n);
  for (std::size_t k = 0; k < n; ++k) terms[k] = component_term(k, x, &lambda_diffs[k]);
  const double total = log_sum_exp(terms);
  grad.setZero(static_cast<Eigen::Index>(dim_));
  if (!std::isfinite(total)) return total;
  for (std::size_t k = 0; k < n; ++k) {
    const double r = std::exp(terms[k] - total);
    if (r == 0.0) continue;
    // d/dx of -0.5 (x-mu)^T Lambda (x-mu) is -Lambda (x-mu)
    simd::axpy(-r, view(lambda_diffs[k]), view(grad));
  }
  return total;
}

Vector GaussianMixture::sample(Rng& rng) const {
  std::discrete_distribution<std::size_t> pick(weights_.begin(), weights_.end());
  const std::size_t k = pick(rng);
  const Vector z = standard_normal(rng, static_cast<Eigen::Index>(dim_));
  // x = mu + L^{-T} z has covariance (L L^T)^{-1}.
  return means_[k] + precision_chol_[k].transpose().triangularView<Eigen::Upper>().solve(z);
}

}  // namespace whmc
