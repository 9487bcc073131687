#pragma once

// The experiment target families and their seeded instance generators.

#include <array>
#include <cstdint>
#include <vector>

#include "whmc/gaussian_mixture.hpp"
#include "whmc/target.hpp"

namespace whmc {

class GaussianMixtureTarget final : public TargetDensity {
 public:
  explicit GaussianMixtureTarget(GaussianMixture mixture) : mixture_(std::move(mixture)) {}

  std::size_t dim() const override { return mixture_.dim(); }
  double log_density(const Vector& x) const override;
  double log_density_and_gradient(const Vector& x, Vector& grad) const override;

  const GaussianMixture& mixture() const { return mixture_; }

 private:
  GaussianMixture mixture_;
};

using Point2 = std::array<double, 2>;

// Planar sensor localization. Nodes 0..N-1 are the unknown sensors, followed
// by the anchors. The observation matrices cover all nodes; anchor-anchor
// entries are ignored.
struct SensorObservations {
  std::size_t n_sensors = 0;
  std::vector<Point2> anchors;
  Matrix distance;   // Y_ij, 0 where unobserved
  Matrix indicator;  // Z_ij in {0, 1}
  double radius = 0.3;
  double noise_sd = 0.02;
};

class SensorNetworkTarget final : public TargetDensity {
 public:
  // log(1 - p) is floored here; states that hit the floor are flagged.
  static constexpr double kLogFloor = -700.0;

  explicit SensorNetworkTarget(SensorObservations obs);

  std::size_t dim() const override { return 2 * obs_.n_sensors; }
  double log_density(const Vector& x) const override;
  double log_density_and_gradient(const Vector& x, Vector& grad) const override;

  // Number of pairs whose non-detection term hit kLogFloor at x.
  std::size_t flagged_pairs(const Vector& x) const;

  const SensorObservations& observations() const { return obs_; }
  std::size_t n_nodes() const { return obs_.n_sensors + obs_.anchors.size(); }

 private:
  double evaluate(const Vector& x, Vector* grad, std::size_t* flagged) const;

  SensorObservations obs_;
};

// Two-parameter posterior with a bimodal likelihood:
// theta_d ~ N(0, prior_var_d), x_i ~ 0.5 N(theta_1, obs_var) + 0.5 N(theta_1 + theta_2, obs_var).
class WellingTarget final : public TargetDensity {
 public:
  WellingTarget(std::vector<double> data, std::array<double, 2> prior_vars, double obs_var);

  std::size_t dim() const override { return 2; }
  double log_density(const Vector& x) const override;
  double log_density_and_gradient(const Vector& x, Vector& grad) const override;

  const std::vector<double>& data() const { return data_; }
  const std::array<double, 2>& prior_vars() const { return prior_vars_; }
  double obs_var() const { return obs_var_; }

 private:
  std::vector<double> data_;
  std::array<double, 2> prior_vars_;
  double obs_var_;
};

// --- generators (pure functions of their arguments) ---

// Means uniform in [0, s]^D with s rescaled so the mean pairwise distance
// equals `spacing`; covariances Q diag(lambda) Q^T with Q from the QR of a
// Gaussian matrix and lambda log-uniform in [0.25, 4]; equal weights.
GaussianMixture generate_gmm_instance(std::size_t k, std::size_t d, std::uint64_t seed,
                                      double spacing);

double mean_pairwise_distance(const std::vector<Vector>& points);

struct SensorInstance {
  SensorObservations observations;
  std::vector<Point2> truth;
};

inline const std::vector<Point2>& default_anchors() {
  static const std::vector<Point2> anchors{{0.2, 0.2}, {0.8, 0.2}, {0.5, 0.8}};
  return anchors;
}

// N = 8 sensors uniform in the unit square, R = 0.3, sigma = 0.02, three
// anchors. Redraws until every sensor has at least two observed distances and
// the observation graph is connected, so the flat-prior posterior is proper.
SensorInstance generate_sensor_data(std::uint64_t seed, std::size_t n_sensors = 8,
                                    double radius = 0.3, double noise_sd = 0.02);

struct WellingParams {
  double theta1 = 0.0;
  double theta2 = 1.0;
  double prior_var1 = 10.0;
  double prior_var2 = 1.0;
  double obs_var = 2.0;
  std::size_t n = 1000;
};

WellingTarget generate_welling_data(std::uint64_t seed, const WellingParams& params = {});

}  // namespace whmc
