#include "fixtures.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include <boost/pending/disjoint_sets.hpp>

#include "whmc/errors.hpp"
#include "whmc/modesearch.hpp"

namespace whmc::testing {

GaussianMixture single_gaussian(const Vector& mean, const Matrix& precision) {
  return GaussianMixture({1.0}, {mean}, {precision});
}

GaussianMixture standard_normal_mixture(std::size_t dim) {
  const auto d = static_cast<Eigen::Index>(dim);
  return single_gaussian(Vector::Zero(d), Matrix::Identity(d, d));
}

GaussianMixture bimodal_1d() {
  Vector a(1), b(1);
  a << -5.0;
  b << 5.0;
  const Matrix one = Matrix::Identity(1, 1);
  return GaussianMixture({0.5, 0.5}, {a, b}, {one, one});
}

GaussianMixture four_mode_benchmark() {
  std::vector<Vector> means(4, Vector(2));
  means[0] << -3.0, -3.0;
  means[1] << 3.0, 3.0;
  means[2] << -3.0, 3.0;
  means[3] << 3.0, -3.0;
  std::vector<Matrix> precisions(4, Matrix(2, 2));
  precisions[0] << 1.0, 0.3, 0.3, 1.5;
  precisions[1] << 1.6, -0.2, -0.2, 0.9;
  precisions[2] << 1.2, 0.0, 0.0, 0.8;
  precisions[3] << 0.9, 0.25, 0.25, 1.3;
  return GaussianMixture({0.25, 0.25, 0.25, 0.25}, means, precisions);
}

ModeLibrary library_of(const GaussianMixture& mixture, const std::vector<std::size_t>& which) {
  std::vector<Mode> modes;
  for (std::size_t k : which) modes.push_back(Mode{mixture.means()[k], mixture.precisions()[k], 1.0, 0});
  return ModeLibrary(std::move(modes));
}

ModeLibrary library_of(const GaussianMixture& mixture) {
  std::vector<std::size_t> all;
  for (std::size_t k = 0; k < mixture.size(); ++k) all.push_back(k);
  return library_of(mixture, all);
}

ModeLibrary library_at(const std::vector<Vector>& locations) {
  std::vector<Mode> modes;
  for (const Vector& l : locations) modes.push_back(Mode{l, Matrix::Identity(l.size(), l.size()), 1.0, 0});
  return ModeLibrary(std::move(modes));
}

ModeLibrary welling_library(const WellingTarget& target, const WellingParams& params) {
  const PotentialEnergy u(target);
  const Objective f = [&u](const Vector& x, Vector& g) { return u.value_and_gradient(x, g); };
  std::vector<Mode> modes;
  for (const auto& guess : {std::array<double, 2>{params.theta1, params.theta2},
                            std::array<double, 2>{params.theta1 + params.theta2, -params.theta2}}) {
    const BfgsResult r = bfgs_minimize(f, (Vector(2) << guess[0], guess[1]).finished());
    if (!r.converged) throw NumericError("welling_library: mode polish did not converge");
    modes.push_back(Mode{r.x, regularize_hessian(finite_difference_hessian(target, r.x)), 1.0, 0});
  }
  return ModeLibrary(std::move(modes));
}

Vector random_normal(Rng& rng, Eigen::Index dim, double sd) {
  std::normal_distribution<double> nd(0.0, sd);
  Vector x(dim);
  for (Eigen::Index i = 0; i < dim; ++i) x[i] = nd(rng);
  return x;
}

double grid_barrier(const TargetDensity& target, const Vector& a, const Vector& b, const Vector& lo, const Vector& hi,
                    int n) {
  const auto cells = static_cast<std::size_t>(n) * static_cast<std::size_t>(n);
  std::vector<double> u(cells);
  Vector x(2);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      x << lo[0] + (hi[0] - lo[0]) * i / (n - 1), lo[1] + (hi[1] - lo[1]) * j / (n - 1);
      u[static_cast<std::size_t>(i * n + j)] = -target.log_density(x);
    }
  const auto cell_of = [&](const Vector& p) {
    const long i = std::lround((p[0] - lo[0]) / (hi[0] - lo[0]) * (n - 1));
    const long j = std::lround((p[1] - lo[1]) / (hi[1] - lo[1]) * (n - 1));
    if (i < 0 || j < 0 || i >= n || j >= n) throw std::invalid_argument("grid_barrier: mode outside the grid");
    return static_cast<std::size_t>(i * n + j);
  };
  const std::size_t ca = cell_of(a), cb = cell_of(b);
  std::vector<std::size_t> order(cells);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t p, std::size_t q) { return u[p] < u[q]; });

  boost::disjoint_sets_with_storage<> sets(cells);
  std::vector<char> added(cells, 0);
  for (const std::size_t c : order) {
    added[c] = 1;
    const int i = static_cast<int>(c) / n, j = static_cast<int>(c) % n;
    const std::array<std::array<int, 2>, 4> nbrs{{{i + 1, j}, {i - 1, j}, {i, j + 1}, {i, j - 1}}};
    for (const auto& [ii, jj] : nbrs) {
      if (ii < 0 || jj < 0 || ii >= n || jj >= n) continue;
      const auto nb = static_cast<std::size_t>(ii * n + jj);
      if (added[nb]) sets.union_set(c, nb);
    }
    if (added[ca] && added[cb] && sets.find_set(ca) == sets.find_set(cb)) return u[c] - std::max(u[ca], u[cb]);
  }
  return 0.0;
}

}  // namespace whmc::testing
