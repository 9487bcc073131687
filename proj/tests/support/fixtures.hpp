#pragma once

#include <cstdint>
#include <vector>

#include "whmc/gaussian_mixture.hpp"
#include "whmc/mode_library.hpp"
#include "whmc/rng.hpp"
#include "whmc/target.hpp"
#include "whmc/targets.hpp"

namespace whmc::testing {

// log pi = const; zero gradient everywhere.
class FlatTarget final : public TargetDensity {
 public:
  explicit FlatTarget(std::size_t dim) : dim_(dim) {}
  std::size_t dim() const override { return dim_; }
  double log_density(const Vector&) const override { return 0.0; }
  double log_density_and_gradient(const Vector& x, Vector& g) const override {
    g = Vector::Zero(x.size());
    return 0.0;
  }

 private:
  std::size_t dim_;
};

GaussianMixture single_gaussian(const Vector& mean, const Matrix& precision);
GaussianMixture standard_normal_mixture(std::size_t dim);

// Equal-weight 1D mixture with unit variances at -5 and +5.
GaussianMixture bimodal_1d();

// 2D benchmark: four separated components. Components 0 and 1 are the
// "known" modes, 2 and 3 are held out.
GaussianMixture four_mode_benchmark();

// Library of the given mixture components (mean as location, precision as Hessian).
ModeLibrary library_of(const GaussianMixture& mixture, const std::vector<std::size_t>& which);
ModeLibrary library_of(const GaussianMixture& mixture);

// Unit-Hessian library at the given points.
ModeLibrary library_at(const std::vector<Vector>& locations);

// The two posterior modes of a Welling target, polished from the two
// symmetric guesses (theta1, theta2) and (theta1 + theta2, -theta2).
ModeLibrary welling_library(const WellingTarget& target, const WellingParams& params = {});

// Data seed for the two-mode contrast. The barrier between the Welling modes
// varies a lot between data draws (0.1 to 12 nats over seeds 1-60; several
// draws are unimodal). 23 is the first seed whose barrier exceeds 10 nats.
inline constexpr std::uint64_t kWellingDataSeed = 23;

// Height of the lowest pass between modes a and b of a 2D target, above the
// higher of the two: union-find over an n x n grid on [lo, hi], cells added in
// order of increasing potential until both modes share a component.
double grid_barrier(const TargetDensity& target, const Vector& a, const Vector& b, const Vector& lo, const Vector& hi,
                    int n = 240);

Vector random_normal(Rng& rng, Eigen::Index dim, double sd = 1.0);

}  // namespace whmc::testing
