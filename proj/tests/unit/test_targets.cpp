#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "fixtures.hpp"
#include "stats.hpp"
#include "whmc/errors.hpp"
#include "whmc/targets.hpp"

using namespace whmc;
using namespace whmc::testing;

namespace {

Vector random_point(std::mt19937_64& rng, Eigen::Index d, double scale) {
  std::normal_distribution<double> nd(0.0, scale);
  Vector x(d);
  for (Eigen::Index i = 0; i < d; ++i) x[i] = nd(rng);
  return x;
}

void check_gradient(const TargetDensity& t, const Vector& x, double tol = 1e-5) {
  const Vector g = t.grad_log_density(x);
  const Vector fd = fd_gradient([&](const Vector& y) { return t.log_density(y); }, x);
  CHECK(relative_error(g, fd, 1.0) <= tol);
}

}  // namespace

TEST_CASE("standard normal at its mode") {
  GaussianMixtureTarget t(standard_normal_mixture(2));
  CHECK(t.log_density(Vector::Zero(2)) == doctest::Approx(-std::log(2.0 * std::numbers::pi)).epsilon(1e-14));
  CHECK(t.grad_log_density(Vector::Zero(2)).norm() == 0.0);
}

TEST_CASE("symmetric pair: log of the mean of component densities, zero gradient at the midpoint") {
  Vector mu(3);
  mu << 1.0, -2.0, 0.5;
  const Matrix I = Matrix::Identity(3, 3);
  GaussianMixtureTarget t(GaussianMixture({0.5, 0.5}, {mu, -mu}, {I, I}));
  const double comp = -1.5 * std::log(2.0 * std::numbers::pi) - 0.5 * mu.squaredNorm();
  CHECK(t.log_density(Vector::Zero(3)) == doctest::Approx(std::log(0.5 * std::exp(comp) + 0.5 * std::exp(comp))));
  CHECK(t.grad_log_density(Vector::Zero(3)).norm() <= 1e-15);
}

TEST_CASE("mixture log density matches naive extended-precision summation") {
  const GaussianMixture g = generate_gmm_instance(3, 4, 11, 3.0);
  GaussianMixtureTarget t(g);
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 20; ++trial) {
    const Vector x = g.means()[trial % 3] + random_point(rng, 4, 1.0);
    long double total = 0.0L;
    for (std::size_t k = 0; k < 3; ++k) {
      const Matrix cov = g.precisions()[k].inverse();
      const Vector d = x - g.means()[k];
      const long double quad = d.dot(g.precisions()[k] * d);
      const long double norm = std::pow(2.0L * std::numbers::pi_v<long double>, -2.0L) /
                               std::sqrt(static_cast<long double>(cov.determinant()));
      total += static_cast<long double>(g.weights()[k]) * norm * std::exp(-0.5L * quad);
    }
    CHECK(t.log_density(x) == doctest::Approx(static_cast<double>(std::log(total))).epsilon(1e-12));
  }
}

TEST_CASE("mixture gradient: zero at a single mode, finite differences elsewhere") {
  Vector mu(2);
  mu << 0.3, -1.1;
  Matrix p(2, 2);
  p << 2.0, 0.4, 0.4, 1.0;
  GaussianMixtureTarget one(single_gaussian(mu, p));
  CHECK(one.grad_log_density(mu).norm() == 0.0);

  const GaussianMixture g = generate_gmm_instance(4, 5, 5, 4.0);
  GaussianMixtureTarget t(g);
  std::mt19937_64 rng(1);
  for (int i = 0; i < 20; ++i) check_gradient(t, g.means()[i % 4] + random_point(rng, 5, 1.5));
}

TEST_CASE("mixture log density is invariant under component permutation") {
  const GaussianMixture g = generate_gmm_instance(4, 3, 9, 5.0);
  std::vector<std::size_t> perm{2, 0, 3, 1};
  std::vector<double> w;
  std::vector<Vector> m;
  std::vector<Matrix> p;
  for (std::size_t k : perm) {
    w.push_back(g.weights()[k]);
    m.push_back(g.means()[k]);
    p.push_back(g.precisions()[k]);
  }
  GaussianMixtureTarget a(g), b(GaussianMixture(w, m, p));
  std::mt19937_64 rng(2);
  for (int i = 0; i < 20; ++i) {
    const Vector x = random_point(rng, 3, 4.0);
    CHECK(std::abs(a.log_density(x) - b.log_density(x)) <= 1e-12);
  }
}

TEST_CASE("mixture validation and dimension checks") {
  GaussianMixtureTarget t(standard_normal_mixture(2));
  CHECK_THROWS_AS(t.log_density(Vector::Zero(3)), ConfigError);
  const Matrix I = Matrix::Identity(2, 2);
  CHECK_THROWS_AS(GaussianMixture({0.7, 0.7}, {Vector::Zero(2), Vector::Ones(2)}, {I, I}), ConfigError);
  Matrix bad(2, 2);
  bad << 1.0, 2.0, 2.0, 1.0;
  CHECK_THROWS_AS(GaussianMixture({1.0}, {Vector::Zero(2)}, {bad}), ConfigError);
}

TEST_CASE("generated mixtures: spacing, spectra, determinism") {
  const GaussianMixture g = generate_gmm_instance(10, 100, 42, 20.0);
  const double spacing = mean_pairwise_distance(g.means());
  CHECK(spacing >= 18.0);
  CHECK(spacing <= 22.0);
  for (const Matrix& p : g.precisions()) {
    const Eigen::SelfAdjointEigenSolver<Matrix> es(p);
    CHECK(es.eigenvalues().minCoeff() >= 0.25 - 1e-9);
    CHECK(es.eigenvalues().maxCoeff() <= 4.0 + 1e-9);
  }
  CHECK((g.precisions()[0] - g.precisions()[1]).norm() > 1e-3);
  const GaussianMixture h = generate_gmm_instance(10, 100, 42, 20.0);
  for (std::size_t k = 0; k < 10; ++k) {
    CHECK(g.means()[k] == h.means()[k]);
    CHECK(g.precisions()[k] == h.precisions()[k]);
  }
  const GaussianMixture one = generate_gmm_instance(1, 3, 1, 20.0);
  CHECK(one.size() == 1);
  CHECK(one.weights()[0] == 1.0);
}

// ---------------------------------------------------------------- sensors

namespace {

SensorObservations one_sensor_one_anchor(double z, double y) {
  SensorObservations o;
  o.n_sensors = 1;
  o.anchors = {{0.5, 0.5}};
  o.distance = Matrix::Zero(2, 2);
  o.indicator = Matrix::Zero(2, 2);
  o.indicator(0, 1) = o.indicator(1, 0) = z;
  o.distance(0, 1) = o.distance(1, 0) = y;
  o.radius = 0.3;
  o.noise_sd = 0.02;
  return o;
}

}  // namespace

TEST_CASE("sensor: coincident non-detection hits the floor and is flagged") {
  SensorNetworkTarget t(one_sensor_one_anchor(0.0, 0.0));
  Vector x(2);
  x << 0.5, 0.5;
  CHECK(t.log_density(x) == SensorNetworkTarget::kLogFloor);
  CHECK(t.flagged_pairs(x) == 1);
  CHECK(t.grad_log_density(x).allFinite());
  x << 0.9, 0.5;
  CHECK(t.flagged_pairs(x) == 0);
}

TEST_CASE("sensor: detected pair at the observed distance") {
  const double d = 0.2;
  SensorNetworkTarget t(one_sensor_one_anchor(1.0, d));
  Vector x(2);
  x << 0.5 + d, 0.5;
  const double expect = -d * d / (2 * 0.09) - 0.5 * std::log(2 * std::numbers::pi * 0.02 * 0.02);
  CHECK(t.log_density(x) == doctest::Approx(expect).epsilon(1e-13));
}

TEST_CASE("sensor: gradient matches finite differences") {
  const SensorInstance inst = generate_sensor_data(4, 3);
  SensorNetworkTarget t(inst.observations);
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> u(0.05, 0.95);
  for (int i = 0; i < 20; ++i) {
    Vector x(6);
    for (int j = 0; j < 6; ++j) x[j] = u(rng);
    check_gradient(t, x);
  }
}

TEST_CASE("sensor generator: dimensions, observation pattern, determinism") {
  const SensorInstance a = generate_sensor_data(2026);
  SensorNetworkTarget t(a.observations);
  CHECK(t.dim() == 16);
  CHECK(a.truth.size() == 8);
  CHECK(a.observations.anchors.size() == 3);
  const Matrix& y = a.observations.distance;
  const Matrix& z = a.observations.indicator;
  for (Eigen::Index i = 0; i < y.rows(); ++i)
    for (Eigen::Index j = 0; j < y.cols(); ++j) {
      if (z(i, j) == 1.0) CHECK(y(i, j) > 0.0);
      else CHECK(y(i, j) == 0.0);
    }
  const SensorInstance b = generate_sensor_data(2026);
  CHECK(a.observations.distance == b.observations.distance);
  CHECK(a.observations.indicator == b.observations.indicator);
  Vector truth(16);
  for (std::size_t i = 0; i < 8; ++i) truth.segment(2 * static_cast<Eigen::Index>(i), 2) << a.truth[i][0], a.truth[i][1];
  CHECK(std::isfinite(t.log_density(truth)));
}

// ---------------------------------------------------------------- welling

TEST_CASE("welling: empty data is the prior") {
  WellingTarget t({}, {10.0, 1.0}, 2.0);
  Vector a(2), b(2);
  a << 1.3, -0.4;
  b << -2.0, 0.7;
  const auto prior = [](const Vector& x) { return -x[0] * x[0] / 20.0 - x[1] * x[1] / 2.0; };
  CHECK(t.log_density(a) - t.log_density(b) == doctest::Approx(prior(a) - prior(b)).epsilon(1e-13));
}

TEST_CASE("welling: canonical configuration and gradient") {
  const WellingTarget t = generate_welling_data(1);
  CHECK(t.data().size() == 1000);
  CHECK(t.prior_vars()[0] == 10.0);
  CHECK(t.prior_vars()[1] == 1.0);
  CHECK(t.obs_var() == 2.0);
  std::mt19937_64 rng(5);
  std::normal_distribution<double> nd(0.0, 1.0);
  for (int i = 0; i < 20; ++i) {
    Vector x(2);
    x << 0.5 * nd(rng), 1.0 + nd(rng);
    check_gradient(t, x);
  }
  const WellingTarget again = generate_welling_data(1);
  CHECK(again.data() == t.data());
}

TEST_CASE("welling: the contrast instance is strongly bimodal") {
  const WellingTarget t = generate_welling_data(kWellingDataSeed);
  const ModeLibrary modes = welling_library(t);
  REQUIRE(modes.size() == 2);
  // The likelihood is invariant under (t1, t2) -> (t1 + t2, -t2); only the prior breaks the tie.
  CHECK(std::abs(modes[1].location[0] - modes[0].location.sum()) <= 0.1);
  CHECK(std::abs(modes[1].location[1] + modes[0].location[1]) <= 0.1);
  const Vector lo = (Vector(2) << -1.0, -2.2).finished(), hi = (Vector(2) << 2.2, 2.2).finished();
  CHECK(grid_barrier(t, modes[0].location, modes[1].location, lo, hi) > 10.0);
}

TEST_CASE("grid barrier matches a closed form") {
  // Equal mixture of N(-a, 1) and N(a, 1) in x, N(0, 1) in y: the pass is at the origin.
  const double a = 3.0;
  const GaussianMixtureTarget t(GaussianMixture({0.5, 0.5}, {(Vector(2) << -a, 0.0).finished(), (Vector(2) << a, 0.0).finished()},
                                                {Matrix::Identity(2, 2), Matrix::Identity(2, 2)}));
  const Vector m0 = (Vector(2) << -a, 0.0).finished(), m1 = (Vector(2) << a, 0.0).finished();
  const Vector lo = (Vector(2) << -6.0, -3.0).finished(), hi = (Vector(2) << 6.0, 3.0).finished();
  // Grid has a node at the origin and at +-3 (n = 241 gives step 0.05).
  const double expected = t.log_density(m0) - t.log_density(Vector::Zero(2));
  CHECK(grid_barrier(t, m0, m1, lo, hi, 241) == doctest::Approx(expected).epsilon(1e-12));
}
