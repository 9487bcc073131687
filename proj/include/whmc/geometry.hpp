#pragma once

#include <cstddef>
#include <functional>
#include <utility>
#include <vector>

#include "whmc/linalg.hpp"
#include "whmc/mode_library.hpp"

namespace whmc {

inline constexpr double kDefaultEpsilon = 0.03;
inline constexpr double kDefaultInfluence = 0.3;
inline constexpr double kDefaultWorldOffset = 1.0;

struct Wormhole {
  Vector a;
  Vector b;
  Vector direction;  // (b - a) / |b - a|
  double length = 0.0;
};

// Throws ConfigError when a == b or shapes differ.
Wormhole make_wormhole(const Vector& a, const Vector& b);

using Edge = std::pair<std::size_t, std::size_t>;

struct WormholeNetwork {
  ModeLibrary modes;
  std::vector<Edge> edges;
  std::vector<Wormhole> wormholes;  // one per edge, same order
  double world_offset = kDefaultWorldOffset;
  double epsilon = kDefaultEpsilon;
  double influence = kDefaultInfluence;
};

// Validates epsilon in (0,1), influence > 0, h >= 0.
void validate_geometry_params(double epsilon, double influence, double world_offset);

// MST over the library locations joined by wormholes.
WormholeNetwork build_network(ModeLibrary modes, double epsilon = kDefaultEpsilon,
                              double influence = kDefaultInfluence,
                              double world_offset = kDefaultWorldOffset);

// G_W = I - (1 - eps) v v^T.
Matrix wormhole_metric(const Vector& direction, double epsilon);

// exp{-(|x-a| + |x-b| - |a-b|) / F}
double segment_mollifier(const Vector& x, const Vector& a, const Vector& b, double influence);

// (1 - m) G0 + m G_W, with m and G_W taken from the edge of largest mollifier.
Matrix overall_metric(const Vector& x, const WormholeNetwork& network, const Matrix& base_metric);

// <x-a, x-b> + |<x-a, v>| |<x-b, v>|
double vicinity(const Vector& x, const Wormhole& w);
double vicinity(const Vector& x, const Vector& a, const Vector& b);
// One-sided derivative with sign(0) = 0.
Vector vicinity_gradient(const Vector& x, const Wormhole& w);

// exp{-V / (D F)}; `dim` is the dimension of the original parameter space.
double vicinity_mollifier(const Vector& x, const Wormhole& w, std::size_t dim, double influence);
double vicinity_mollifier(const Vector& x, const Vector& a, const Vector& b, std::size_t dim,
                          double influence);

// m(x) <v, v*> v*
Vector vector_field(const Vector& x, const Vector& v, const Wormhole& w, std::size_t dim,
                    double influence);
// d f / d x = v* (v*^T v) grad m^T   (rank one)
Matrix vector_field_jacobian(const Vector& x, const Vector& v, const Wormhole& w,
                             std::size_t dim, double influence);

// Kruskal; ties broken by the lexicographic index pair. Edges come back as
// (i, j) with i < j, sorted by (length, i, j).
std::vector<Edge> mst_network(const std::vector<Vector>& locations);
std::vector<Edge> mst_network(const ModeLibrary& modes);
double network_weight(const std::vector<Vector>& locations, const std::vector<Edge>& edges);

// Wormholes in the augmented space from the nearest mode in the current world
// to every mode in the opposite world.
struct MirrorNetwork {
  std::size_t source = 0;  // nearest mode index
  int world = 1;           // +1 or -1; sign of the world coordinate (0 maps to +1)
  std::vector<Wormhole> wormholes;  // wormholes[k] ends at mode k in world -world
};

int world_of(double coordinate);
MirrorNetwork mirror_network(const Vector& augmented_position, const ModeLibrary& library,
                             double world_offset);

using MetricFunction = std::function<Matrix(const Vector&)>;

// Midpoint rule per segment of the piecewise-linear curve, with
// `nodes_per_segment` sub-intervals on each.
double numeric_arclength(const std::vector<Vector>& curve, const MetricFunction& metric,
                         std::size_t nodes_per_segment = 1);

// n + 1 equally spaced points from a to b.
std::vector<Vector> straight_curve(const Vector& a, const Vector& b, std::size_t n);

}  // namespace whmc
