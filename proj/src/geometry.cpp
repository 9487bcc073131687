#include "whmc/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>
#include <tuple>

#include "whmc/errors.hpp"
#include "whmc/simd/kernels.hpp"

namespace whmc {
namespace {

double sign0(double x) { return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0); }

struct VicinityParts {
  Vector da;  // x - a
  Vector db;  // x - b
  double alpha = 0.0;
  double beta = 0.0;
  double value = 0.0;
};

VicinityParts vicinity_parts(const Vector& x, const Wormhole& w) {
  if (x.size() != w.a.size()) throw ConfigError("vicinity: dimension mismatch");
  VicinityParts p;
  p.da.resize(x.size());
  p.db.resize(x.size());
  simd::subtract(view(x), view(w.a), view(p.da));
  simd::subtract(view(x), view(w.b), view(p.db));
  p.alpha = simd::dot(view(p.da), view(w.direction));
  p.beta = simd::dot(view(p.db), view(w.direction));
  p.value = simd::dot(view(p.da), view(p.db)) + std::abs(p.alpha) * std::abs(p.beta);
  // Rounding can leave tiny negatives on the segment.
  if (p.value < 0.0) p.value = 0.0;
  return p;
}

class DisjointSet {
 public:
  explicit DisjointSet(std::size_t n) : parent_(n) { std::iota(parent_.begin(), parent_.end(), 0); }
  std::size_t find(std::size_t i) {
    while (parent_[i] != i) i = parent_[i] = parent_[parent_[i]];
    return i;
  }
  bool unite(std::size_t i, std::size_t j) {
    i = find(i);
    j = find(j);
    if (i == j) return false;
    parent_[std::max(i, j)] = std::min(i, j);
    return true;
  }

 private:
  std::vector<std::size_t> parent_;
};

}  // namespace

Wormhole make_wormhole(const Vector& a, const Vector& b) {
  if (a.size() != b.size() || a.size() == 0) throw ConfigError("wormhole: endpoint shape mismatch");
  Wormhole w{a, b, b - a, 0.0};
  w.length = w.direction.norm();
  if (!(w.length > 0.0)) throw ConfigError("wormhole: endpoints coincide");
  w.direction /= w.length;
  return w;
}

void validate_geometry_params(double epsilon, double influence, double world_offset) {
  if (!(epsilon > 0.0 && epsilon < 1.0)) throw ConfigError("epsilon must lie in (0,1)");
  if (!(influence > 0.0)) throw ConfigError("influence factor F must be positive");
  if (!(world_offset >= 0.0)) throw ConfigError("world offset h must be nonnegative");
}

WormholeNetwork build_network(ModeLibrary modes, double epsilon, double influence,
                              double world_offset) {
  validate_geometry_params(epsilon, influence, world_offset);
  WormholeNetwork net;
  net.edges = mst_network(modes);
  for (const auto& [i, j] : net.edges)
    net.wormholes.push_back(make_wormhole(modes[i].location, modes[j].location));
  net.modes = std::move(modes);
  net.epsilon = epsilon;
  net.influence = influence;
  net.world_offset = world_offset;
  return net;
}

Matrix wormhole_metric(const Vector& direction, double epsilon) {
  if (std::abs(direction.norm() - 1.0) > 1e-10) throw ConfigError("wormhole_metric: direction is not a unit vector");
  if (!(epsilon > 0.0 && epsilon < 1.0)) throw ConfigError("wormhole_metric: epsilon must lie in (0,1)");
  const auto n = direction.size();
  return Matrix::Identity(n, n) - (1.0 - epsilon) * direction * direction.transpose();
}

double segment_mollifier(const Vector& x, const Vector& a, const Vector& b, double influence) {
  if (!(influence > 0.0)) throw ConfigError("segment_mollifier: F must be positive");
  const double da = std::sqrt(simd::squared_distance(view(x), view(a)));
  const double db = std::sqrt(simd::squared_distance(view(x), view(b)));
  const double ab = std::sqrt(simd::squared_distance(view(a), view(b)));
  const double excess = std::max(0.0, da + db - ab);
  return std::exp(-excess / influence);
}

Matrix overall_metric(const Vector& x, const WormholeNetwork& network, const Matrix& base_metric) {
  double best = 0.0;
  const Wormhole* chosen = nullptr;
  for (const Wormhole& w : network.wormholes) {
    const double m = segment_mollifier(x, w.a, w.b, network.influence);
    if (m > best) {
      best = m;
      chosen = &w;
    }
  }
  if (chosen == nullptr) return base_metric;
  return (1.0 - best) * base_metric + best * wormhole_metric(chosen->direction, network.epsilon);
}

double vicinity(const Vector& x, const Wormhole& w) { return vicinity_parts(x, w).value; }

double vicinity(const Vector& x, const Vector& a, const Vector& b) {
  return vicinity(x, make_wormhole(a, b));
}

Vector vicinity_gradient(const Vector& x, const Wormhole& w) {
  const VicinityParts p = vicinity_parts(x, w);
  const double c = sign0(p.alpha) * std::abs(p.beta) + std::abs(p.alpha) * sign0(p.beta);
  Vector g = p.da + p.db;
  simd::axpy(c, view(w.direction), view(g));
  return g;
}

double vicinity_mollifier(const Vector& x, const Wormhole& w, std::size_t dim, double influence) {
  if (!(influence > 0.0) || dim == 0) throw ConfigError("vicinity_mollifier: need F > 0 and D >= 1");
  return std::exp(-vicinity(x, w) / (static_cast<double>(dim) * influence));
}

double vicinity_mollifier(const Vector& x, const Vector& a, const Vector& b, std::size_t dim,
                          double influence) {
  return vicinity_mollifier(x, make_wormhole(a, b), dim, influence);
}

Vector vector_field(const Vector& x, const Vector& v, const Wormhole& w, std::size_t dim,
                    double influence) {
  const double m = vicinity_mollifier(x, w, dim, influence);
  return (m * simd::dot(view(v), view(w.direction))) * w.direction;
}

Matrix vector_field_jacobian(const Vector& x, const Vector& v, const Wormhole& w,
                             std::size_t dim, double influence) {
  const double scale = static_cast<double>(dim) * influence;
  const VicinityParts p = vicinity_parts(x, w);
  const double m = std::exp(-p.value / scale);
  const double c = sign0(p.alpha) * std::abs(p.beta) + std::abs(p.alpha) * sign0(p.beta);
  Vector grad_v = p.da + p.db;
  grad_v += c * w.direction;
  const Vector grad_m = (-m / scale) * grad_v;
  const double proj = simd::dot(view(v), view(w.direction));
  return (proj * w.direction) * grad_m.transpose();
}

std::vector<Edge> mst_network(const std::vector<Vector>& locations) {
  const std::size_t k = locations.size();
  if (k == 0) throw ConfigError("mst_network: need at least one mode");
  std::vector<std::tuple<double, std::size_t, std::size_t>> candidates;
  candidates.reserve(k * (k - 1) / 2);
  for (std::size_t i = 0; i < k; ++i)
    for (std::size_t j = i + 1; j < k; ++j)
      candidates.emplace_back(std::sqrt(simd::squared_distance(view(locations[i]), view(locations[j]))), i, j);
  std::sort(candidates.begin(), candidates.end());
  DisjointSet sets(k);
  std::vector<Edge> edges;
  for (const auto& [len, i, j] : candidates) {
    if (sets.unite(i, j)) edges.emplace_back(i, j);
    if (edges.size() + 1 == k) break;
  }
  return edges;
}

std::vector<Edge> mst_network(const ModeLibrary& modes) { return mst_network(modes.locations()); }

double network_weight(const std::vector<Vector>& locations, const std::vector<Edge>& edges) {
  double total = 0.0;
  for (const auto& [i, j] : edges) total += (locations[i] - locations[j]).norm();
  return total;
}

int world_of(double coordinate) { return coordinate >= 0.0 ? 1 : -1; }

MirrorNetwork mirror_network(const Vector& augmented_position, const ModeLibrary& library,
                             double world_offset) {
  if (library.empty()) throw ConfigError("mirror_network: mode library is empty");
  const auto d = static_cast<Eigen::Index>(library.dim());
  if (augmented_position.size() != d + 1) throw ConfigError("mirror_network: expected augmented position of length D+1");
  MirrorNetwork net;
  net.world = world_of(augmented_position[d]);
  net.source = library.nearest(augmented_position.head(d));
  Vector from(d + 1);
  from << library[net.source].location, net.world * world_offset;
  Vector to(d + 1);
  for (std::size_t k = 0; k < library.size(); ++k) {
    to << library[k].location, -net.world * world_offset;
    net.wormholes.push_back(make_wormhole(from, to));
  }
  return net;
}

double numeric_arclength(const std::vector<Vector>& curve, const MetricFunction& metric,
                         std::size_t nodes_per_segment) {
  if (curve.size() < 2) throw ConfigError("numeric_arclength: need at least two points");
  if (nodes_per_segment == 0) throw ConfigError("numeric_arclength: need at least one node per segment");
  const auto n = static_cast<double>(nodes_per_segment);
  double total = 0.0;
  for (std::size_t s = 0; s + 1 < curve.size(); ++s) {
    const Vector step = (curve[s + 1] - curve[s]) / n;
    for (std::size_t q = 0; q < nodes_per_segment; ++q) {
      const Vector mid = curve[s] + (static_cast<double>(q) + 0.5) * step;
      const double sq = step.dot(metric(mid) * step);
      total += std::sqrt(std::max(0.0, sq));
    }
  }
  return total;
}

std::vector<Vector> straight_curve(const Vector& a, const Vector& b, std::size_t n) {
  if (n == 0) throw ConfigError("straight_curve: need at least one interval");
  std::vector<Vector> pts;
  pts.reserve(n + 1);
  for (std::size_t i = 0; i <= n; ++i) {
    const double t = static_cast<double>(i) / static_cast<double>(n);
    pts.push_back((1.0 - t) * a + t * b);
  }
  return pts;
}

}  // namespace whmc
