#include "whmc/regeneration.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "whmc/errors.hpp"

namespace whmc {

double IndependenceKernel::c() const { return std::exp(log_c); }

double IndependenceKernel::log_q(const Vector& x) const {
  return std::max(kLogQFloor, mixture.log_density(x));
}

double laplace_log_scale(const TargetDensity& target, const ModeLibrary& library) {
  if (library.empty()) throw ConfigError("laplace_log_scale: empty mode library");
  const double half_d_log_2pi = 0.5 * static_cast<double>(library.dim()) * std::log(2.0 * std::numbers::pi);
  std::vector<double> terms;
  terms.reserve(library.size());
  for (std::size_t k = 0; k < library.size(); ++k)
    terms.push_back(target.log_density(library[k].location) + half_d_log_2pi - 0.5 * library.log_det_hessian(k));
  return log_sum_exp(terms);
}

IndependenceKernel fit_independence_kernel(const ModeLibrary& library, const std::vector<std::size_t>& visits,
                                           const TargetDensity& target, double log_c) {
  if (library.empty()) throw ConfigError("fit_independence_kernel: empty mode library");
  std::vector<double> weights;
  std::vector<Vector> means;
  std::vector<Matrix> precisions;
  double total = 0.0;
  IndependenceKernel k;
  k.visits.assign(library.size(), 0);
  for (std::size_t i = 0; i < library.size(); ++i) {
    if (i < visits.size()) k.visits[i] = visits[i];
    const double w = static_cast<double>(std::max<std::size_t>(1, k.visits[i]));
    weights.push_back(w);
    total += w;
    means.push_back(library[i].location);
    precisions.push_back(regularize_hessian(library[i].hessian));
  }
  for (double& w : weights) w /= total;
  k.mixture = GaussianMixture(std::move(weights), std::move(means), std::move(precisions));
  k.log_c = log_c;
  k.log_z = laplace_log_scale(target, library);
  return k;
}

TSQ tsq_from_log_values(double log_q_next, double w_t, double w_next, double log_c) {
  TSQ v;
  v.log_t = log_q_next + std::min(0.0, w_next - w_t);
  v.log_s = std::min(0.0, log_c - w_t);
  v.log_q = log_q_next + std::min(0.0, w_next - log_c);
  return v;
}

TSQ compute_T_S_Q(const IndependenceKernel& kernel, const TargetDensity& target, const Vector& x_t,
                  const Vector& x_next) {
  const double lq_next = kernel.log_q(x_next);
  const double w_t = kernel.log_weight(target.log_density(x_t), x_t);
  const double w_next = target.log_density(x_next) - kernel.log_z - lq_next;
  return tsq_from_log_values(lq_next, w_t, w_next, kernel.log_c);
}

double regeneration_probability(const TSQ& v) {
  const double lr = v.log_s + v.log_q - v.log_t;
  if (std::isnan(lr)) return 0.0;
  return std::clamp(std::exp(lr), 0.0, 1.0);
}

IndependenceStep independence_step(const Vector& x_t, const TargetDensity& target, const IndependenceKernel& kernel,
                                   Rng& rng, bool draw_fresh) {
  IndependenceStep out;
  const double w_t = kernel.log_weight(target.log_density(x_t), x_t);
  Vector proposal = kernel.mixture.sample(rng);
  const double lq = kernel.log_q(proposal);
  const double w_new = target.log_density(proposal) - kernel.log_z - lq;
  const double log_alpha = std::min(0.0, w_new - w_t);
  out.accepted = std::isfinite(w_new) && std::log(uniform01(rng)) < log_alpha;
  if (!out.accepted) {
    out.state = x_t;
    out.log_weight = w_t;
    return out;
  }
  out.state = std::move(proposal);
  out.log_weight = w_new;
  out.regeneration_probability = regeneration_probability(tsq_from_log_values(lq, w_t, w_new, kernel.log_c));
  out.regenerated = uniform01(rng) < out.regeneration_probability;
  if (out.regenerated && draw_fresh) {
    out.state = sample_from_Q(kernel, target, rng).state;
    out.log_weight = kernel.log_weight(target.log_density(out.state), out.state);
  }
  return out;
}

QDraw sample_from_Q(const IndependenceKernel& kernel, const TargetDensity& target, Rng& rng,
                    std::size_t max_proposals) {
  QDraw out;
  while (out.proposals < max_proposals) {
    ++out.proposals;
    Vector x = kernel.mixture.sample(rng);
    const double w = kernel.log_weight(target.log_density(x), x);
    const double log_accept = std::min(0.0, w - kernel.log_c);
    if (std::log(uniform01(rng)) < log_accept) {
      out.state = std::move(x);
      return out;
    }
  }
  throw NumericError("sample_from_Q: no acceptance after " + std::to_string(max_proposals) +
                     " proposals; the mixing constant c is too large for this target, use a smaller c");
}

double median_log_weight(std::vector<double> log_weights) {
  std::erase_if(log_weights, [](double w) { return !std::isfinite(w); });
  if (log_weights.empty()) return 0.0;
  const std::size_t mid = log_weights.size() / 2;
  std::nth_element(log_weights.begin(), log_weights.begin() + static_cast<std::ptrdiff_t>(mid), log_weights.end());
  double m = log_weights[mid];
  if (log_weights.size() % 2 == 0) {
    const double lower = *std::max_element(log_weights.begin(), log_weights.begin() + static_cast<std::ptrdiff_t>(mid));
    m = 0.5 * (m + lower);
  }
  return m;
}

}  // namespace whmc
