#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <vector>

#include "whmc/gaussian_mixture.hpp"
#include "whmc/mode_library.hpp"
#include "whmc/samplers.hpp"

namespace whmc {

// |mean - reference|_1 / |reference|_1. ConfigError when |reference|_1 == 0.
double rem(const Vector& mean, const Vector& reference);

struct RemPoint {
  double time_s = 0.0;
  std::size_t iterations = 0;
  double rem = 0.0;
};

// REM of the running mean at each wall-clock mark of the trace.
std::vector<RemPoint> rem_curve(const Trace& trace, const Vector& reference);
// REM of the running mean of the recorded samples at geometrically spaced
// sample counts (x1.3 from 10), plus the final count.
std::vector<RemPoint> rem_by_iteration(const Trace& trace, const Vector& reference);
// REM of the last point at or before t (the first point when t precedes all).
double rem_at(const std::vector<RemPoint>& curve, double time_s);
std::optional<double> time_to_threshold(const std::vector<RemPoint>& curve, double threshold);

// sum_k w_k mu_k
Vector true_mean_gmm(const GaussianMixture& mixture);

// Fraction of samples nearest (squared Mahalanobis under the mode Hessian)
// to each mode; ties go to the lower index.
std::vector<double> mode_occupancy(const std::vector<Vector>& samples, const ModeLibrary& library);
// Euclidean variant for bare locations.
std::vector<double> mode_occupancy(const std::vector<Vector>& samples, const std::vector<Vector>& locations);

struct ReferenceMean {
  Vector mean;
  Vector standard_error;  // between-chain
  std::vector<Vector> chain_means;
  std::uint64_t seed = 0;
  std::size_t iterations_per_chain = 0;
  SamplerConfig sampler;
  double elapsed_s = 0.0;
};

// Pooled mean of `n_chains` WHMC chains started at the library modes in turn
// (chain i at mode i mod K), each `iterations_per_chain` long; chain seeds are
// derive_seed(seed, i).
ReferenceMean reference_mean_longrun(const TargetDensity& target, const ModeLibrary& library, std::uint64_t seed,
                                     std::size_t iterations_per_chain, const SamplerConfig& config,
                                     std::size_t n_chains = 8);

}  // namespace whmc
