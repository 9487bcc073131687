#include "whmc/targets.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>

#include "whmc/errors.hpp"

namespace whmc {

// ---------------------------------------------------------------- mixture

double GaussianMixtureTarget::log_density(const Vector& x) const {
  check_dim(x);
  return mixture_.log_density(x);
}

double GaussianMixtureTarget::log_density_and_gradient(const Vector& x, Vector& grad) const {
  check_dim(x);
  return mixture_.log_density_and_gradient(x, grad);
}

// ---------------------------------------------------------------- sensors

SensorNetworkTarget::SensorNetworkTarget(SensorObservations obs) : obs_(std::move(obs)) {
  const auto n = static_cast<Eigen::Index>(n_nodes());
  if (obs_.n_sensors == 0) throw ConfigError("sensor network: no sensors");
  if (obs_.distance.rows() != n || obs_.distance.cols() != n || obs_.indicator.rows() != n ||
      obs_.indicator.cols() != n)
    throw ConfigError("sensor network: observation matrices must be (sensors+anchors) square");
  if (!(obs_.radius > 0.0) || !(obs_.noise_sd > 0.0))
    throw ConfigError("sensor network: radius and noise_sd must be positive");
  for (Eigen::Index i = 0; i < n; ++i) {
    if (obs_.indicator(i, i) != 0.0 || obs_.distance(i, i) != 0.0)
      throw ConfigError("sensor network: nonzero diagonal");
    for (Eigen::Index j = 0; j < n; ++j) {
      const double z = obs_.indicator(i, j);
      if (z != obs_.indicator(j, i) || obs_.distance(i, j) != obs_.distance(j, i))
        throw ConfigError("sensor network: observation matrices not symmetric");
      if (z != 0.0 && z != 1.0) throw ConfigError("sensor network: indicator must be 0/1");
      if ((z == 1.0) != (obs_.distance(i, j) > 0.0))
        throw ConfigError("sensor network: distance must be positive exactly where observed");
    }
  }
}

double SensorNetworkTarget::evaluate(const Vector& x, Vector* grad, std::size_t* flagged) const {
  check_dim(x);
  const std::size_t ns = obs_.n_sensors;
  const std::size_t nn = n_nodes();
  const double r2 = obs_.radius * obs_.radius;
  const double s2 = obs_.noise_sd * obs_.noise_sd;
  const double log_norm = -0.5 * std::log(2.0 * std::numbers::pi * s2);
  if (grad != nullptr) grad->setZero(x.size());

  auto node = [&](std::size_t i) -> Point2 {
    if (i < ns) return {x[2 * i], x[2 * i + 1]};
    return obs_.anchors[i - ns];
  };
  auto add_grad = [&](std::size_t i, double gx, double gy) {
    if (grad == nullptr || i >= ns) return;
    (*grad)[2 * i] += gx;
    (*grad)[2 * i + 1] += gy;
  };

  double lp = 0.0;
  for (std::size_t i = 0; i < ns; ++i) {
    const Point2 pi = node(i);
    for (std::size_t j = i + 1; j < nn; ++j) {
      const Point2 pj = node(j);
      const double dx = pi[0] - pj[0];
      const double dy = pi[1] - pj[1];
      const double d2 = dx * dx + dy * dy;
      const double a = d2 / (2.0 * r2);
      const auto ii = static_cast<Eigen::Index>(i);
      const auto jj = static_cast<Eigen::Index>(j);
      if (obs_.indicator(ii, jj) == 1.0) {
        // detection: log p = -a, plus the Gaussian range likelihood
        const double y = obs_.distance(ii, jj);
        const double d = std::sqrt(d2);
        lp += -a - (y - d) * (y - d) / (2.0 * s2) + log_norm;
        double gx = -dx / r2;
        double gy = -dy / r2;
        if (d > 0.0) {
          const double c = (y - d) / (s2 * d);
          gx += c * dx;
          gy += c * dy;
        }
        add_grad(i, gx, gy);
        add_grad(j, -gx, -gy);
      } else {
        const double l1m = a > 0.0 ? std::log(-std::expm1(-a)) : -INFINITY;
        if (!(l1m > kLogFloor)) {
          lp += kLogFloor;
          if (flagged != nullptr) ++*flagged;
          continue;
        }
        lp += l1m;
        // d/da log(1 - e^{-a}) = 1 / expm1(a); da/dp_i = (p_i - p_j) / R^2
        const double c = 1.0 / (std::expm1(a) * r2);
        add_grad(i, c * dx, c * dy);
        add_grad(j, -c * dx, -c * dy);
      }
    }
  }
  return lp;
}

double SensorNetworkTarget::log_density(const Vector& x) const {
  return evaluate(x, nullptr, nullptr);
}

double SensorNetworkTarget::log_density_and_gradient(const Vector& x, Vector& grad) const {
  return evaluate(x, &grad, nullptr);
}

std::size_t SensorNetworkTarget::flagged_pairs(const Vector& x) const {
  std::size_t flagged = 0;
  evaluate(x, nullptr, &flagged);
  return flagged;
}

// ---------------------------------------------------------------- welling

WellingTarget::WellingTarget(std::vector<double> data, std::array<double, 2> prior_vars,
                             double obs_var)
    : data_(std::move(data)), prior_vars_(prior_vars), obs_var_(obs_var) {
  if (!(prior_vars_[0] > 0.0) || !(prior_vars_[1] > 0.0) || !(obs_var_ > 0.0))
    throw ConfigError("welling target: variances must be positive");
}

double WellingTarget::log_density(const Vector& x) const {
  Vector unused;
  return log_density_and_gradient(x, unused);
}

double WellingTarget::log_density_and_gradient(const Vector& x, Vector& grad) const {
  check_dim(x);
  const double t1 = x[0];
  const double t2 = x[1];
  double lp = -t1 * t1 / (2.0 * prior_vars_[0]) - t2 * t2 / (2.0 * prior_vars_[1]);
  double g1 = -t1 / prior_vars_[0];
  double g2 = -t2 / prior_vars_[1];
  const double inv = 1.0 / obs_var_;
  for (double xi : data_) {
    const double e1 = xi - t1;
    const double e2 = xi - t1 - t2;
    const double l1 = -0.5 * e1 * e1 * inv;
    const double l2 = -0.5 * e2 * e2 * inv;
    const double m = std::max(l1, l2);
    const double w1 = std::exp(l1 - m);
    const double w2 = std::exp(l2 - m);
    lp += m + std::log(0.5 * (w1 + w2));
    const double r2 = w2 / (w1 + w2);
    g1 += ((1.0 - r2) * e1 + r2 * e2) * inv;
    g2 += r2 * e2 * inv;
  }
  grad.resize(2);
  grad << g1, g2;
  return lp;
}

// ---------------------------------------------------------------- generators

double mean_pairwise_distance(const std::vector<Vector>& points) {
  double total = 0.0;
  std::size_t pairs = 0;
  for (std::size_t i = 0; i < points.size(); ++i) {
    for (std::size_t j = i + 1; j < points.size(); ++j) {
      total += (points[i] - points[j]).norm();
      ++pairs;
    }
  }
  return pairs == 0 ? 0.0 : total / static_cast<double>(pairs);
}

GaussianMixture generate_gmm_instance(std::size_t k, std::size_t d, std::uint64_t seed,
                                      double spacing) {
  if (k == 0 || d == 0) throw ConfigError("gmm instance: K and D must be positive");
  if (!(spacing > 0.0)) throw ConfigError("gmm instance: spacing must be positive");
  Rng rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const auto dd = static_cast<Eigen::Index>(d);

  std::vector<Vector> means(k, Vector(dd));
  for (auto& m : means)
    for (Eigen::Index i = 0; i < dd; ++i) m[i] = unit(rng);
  // Unit-cube mean distance is about sqrt(D/6); used when there are no pairs.
  const double raw = k > 1 ? mean_pairwise_distance(means) : std::sqrt(static_cast<double>(d) / 6.0);
  const double scale = spacing / raw;
  for (auto& m : means) m *= scale;

  std::uniform_real_distribution<double> log_eig(std::log(0.25), std::log(4.0));
  std::vector<Matrix> precisions;
  precisions.reserve(k);
  for (std::size_t c = 0; c < k; ++c) {
    Matrix g(dd, dd);
    std::normal_distribution<double> normal;
    for (Eigen::Index i = 0; i < g.size(); ++i) g.data()[i] = normal(rng);
    const Matrix q = Eigen::HouseholderQR<Matrix>(g).householderQ();
    Vector inv_eig(dd);
    for (Eigen::Index i = 0; i < dd; ++i) inv_eig[i] = std::exp(-log_eig(rng));
    Matrix p = q * inv_eig.asDiagonal() * q.transpose();
    precisions.push_back(0.5 * (p + p.transpose()));
  }
  std::vector<double> weights(k, 1.0 / static_cast<double>(k));
  return GaussianMixture(std::move(weights), std::move(means), std::move(precisions));
}

namespace {

bool observation_graph_ok(const Matrix& z, std::size_t n_sensors) {
  const auto n = static_cast<std::size_t>(z.rows());
  for (std::size_t i = 0; i < n_sensors; ++i) {
    if (z.row(static_cast<Eigen::Index>(i)).sum() < 2.0) return false;
  }
  // connectivity by union-find over all nodes
  std::vector<std::size_t> parent(n);
  std::iota(parent.begin(), parent.end(), 0);
  auto find = [&](std::size_t a) {
    while (parent[a] != a) a = parent[a] = parent[parent[a]];
    return a;
  };
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j)
      if (z(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) == 1.0)
        parent[find(i)] = find(j);
  // anchors are mutually known, so they count as one component
  for (std::size_t a = n_sensors + 1; a < n; ++a) parent[find(a)] = find(n_sensors);
  const std::size_t root = find(0);
  for (std::size_t i = 1; i < n; ++i)
    if (find(i) != root) return false;
  return true;
}

}  // namespace

SensorInstance generate_sensor_data(std::uint64_t seed, std::size_t n_sensors, double radius,
                                    double noise_sd) {
  if (n_sensors == 0) throw ConfigError("sensor data: need at least one sensor");
  Rng rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::normal_distribution<double> normal;
  const std::vector<Point2>& anchors = default_anchors();
  const std::size_t n = n_sensors + anchors.size();
  const auto nn = static_cast<Eigen::Index>(n);

  for (int attempt = 0; attempt < 100000; ++attempt) {
    SensorInstance inst;
    inst.truth.resize(n_sensors);
    for (auto& p : inst.truth) p = {unit(rng), unit(rng)};
    std::vector<Point2> nodes = inst.truth;
    nodes.insert(nodes.end(), anchors.begin(), anchors.end());

    SensorObservations& obs = inst.observations;
    obs.n_sensors = n_sensors;
    obs.anchors = anchors;
    obs.radius = radius;
    obs.noise_sd = noise_sd;
    obs.distance = Matrix::Zero(nn, nn);
    obs.indicator = Matrix::Zero(nn, nn);
    for (std::size_t i = 0; i < n_sensors; ++i) {
      for (std::size_t j = i + 1; j < n; ++j) {
        const double dx = nodes[i][0] - nodes[j][0];
        const double dy = nodes[i][1] - nodes[j][1];
        const double d = std::hypot(dx, dy);
        const double p = std::exp(-d * d / (2.0 * radius * radius));
        if (unit(rng) >= p) continue;
        double y = 0.0;
        do {
          y = d + noise_sd * normal(rng);
        } while (!(y > 0.0));
        const auto ii = static_cast<Eigen::Index>(i);
        const auto jj = static_cast<Eigen::Index>(j);
        obs.indicator(ii, jj) = obs.indicator(jj, ii) = 1.0;
        obs.distance(ii, jj) = obs.distance(jj, ii) = y;
      }
    }
    if (observation_graph_ok(obs.indicator, n_sensors)) return inst;
  }
  throw NumericError("sensor data: could not draw a connected observation graph");
}

WellingTarget generate_welling_data(std::uint64_t seed, const WellingParams& params) {
  Rng rng(seed);
  std::normal_distribution<double> normal;
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const double sd = std::sqrt(params.obs_var);
  std::vector<double> data(params.n);
  for (double& x : data) {
    const double centre = unit(rng) < 0.5 ? params.theta1 : params.theta1 + params.theta2;
    x = centre + sd * normal(rng);
  }
  return WellingTarget(std::move(data), {params.prior_var1, params.prior_var2}, params.obs_var);
}

}  // namespace whmc
