#pragma once

#include <cstddef>
#include <vector>

#include "whmc/gaussian_mixture.hpp"
#include "whmc/linalg.hpp"
#include "whmc/mode_library.hpp"
#include "whmc/rng.hpp"
#include "whmc/target.hpp"

namespace whmc {

// log q is floored here so that underflow never produces -inf in T, S, Q.
inline constexpr double kLogQFloor = -745.0;

// Gaussian mixture proposal q located at the known modes, plus the target
// scale estimate and the mixing constant c.
struct IndependenceKernel {
  GaussianMixture mixture;
  std::vector<std::size_t> visits;
  double log_c = 0.0;  // log of the mixing constant c
  double log_z = 0.0;  // log of the Laplace scale estimate for pi

  double c() const;
  double log_q(const Vector& x) const;  // floored at kLogQFloor
  // log[(pi(x) / Z) / q(x)] given log pi(x).
  double log_weight(double log_pi, const Vector& x) const { return log_pi - log_z - log_q(x); }
};

// sum_k pi(mode_k) (2 pi)^{D/2} det(H_k)^{-1/2}, in log space.
double laplace_log_scale(const TargetDensity& target, const ModeLibrary& library);

// Components at the modes with covariance H_k^{-1}, weights proportional to
// max(1, visits[k]). `visits` may be shorter than the library (missing = 0).
IndependenceKernel fit_independence_kernel(const ModeLibrary& library, const std::vector<std::size_t>& visits,
                                           const TargetDensity& target, double log_c = 0.0);

struct TSQ {
  double log_t = 0.0;
  double log_s = 0.0;
  double log_q = 0.0;
};

// From log q(x_{t+1}) and the log weights w = log(pi/Z) - log q at x_t and x_{t+1}.
TSQ tsq_from_log_values(double log_q_next, double w_t, double w_next, double log_c);
TSQ compute_T_S_Q(const IndependenceKernel& kernel, const TargetDensity& target, const Vector& x_t,
                  const Vector& x_next);

// S Q / T clamped to [0, 1].
double regeneration_probability(const TSQ& v);

struct IndependenceStep {
  Vector state;
  bool accepted = false;
  bool regenerated = false;
  double regeneration_probability = 0.0;
  double log_weight = 0.0;  // at the returned state (before any fresh draw)
};

// Independence Metropolis-Hastings step with retrospective regeneration check.
// With `draw_fresh`, a regeneration replaces the state by a draw from Q.
IndependenceStep independence_step(const Vector& x_t, const TargetDensity& target, const IndependenceKernel& kernel,
                                   Rng& rng, bool draw_fresh = true);

struct QDraw {
  Vector state;
  std::size_t proposals = 0;
};

// Rejection sampler for Q proportional to q min{1, (pi/q)/c}. Throws
// NumericError after `max_proposals`.
QDraw sample_from_Q(const IndependenceKernel& kernel, const TargetDensity& target, Rng& rng,
                    std::size_t max_proposals = 100000);

// Median of the supplied log weights (the next log c). Returns 0 when empty.
double median_log_weight(std::vector<double> log_weights);

}  // namespace whmc
