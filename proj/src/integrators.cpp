#include "whmc/integrators.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "whmc/errors.hpp"
#include "whmc/simd/kernels.hpp"

namespace whmc {
namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

void require_finite(const Vector& g) {
  if (!g.allFinite()) throw NumericError("non-finite gradient in integrator");
}

void kick(Vector& velocity, const Vector& grad, double half_step) {
  simd::axpy(-half_step, view(grad), view(velocity));
}

double safe_log(double p) { return p > 0.0 ? std::log(p) : kNegInf; }

}  // namespace

double leapfrog_step(PhaseState& state, Vector& grad, const EnergyFunction& energy, double step_size) {
  if (!(step_size > 0.0)) throw ConfigError("leapfrog: step size must be positive");
  require_finite(grad);
  kick(state.velocity, grad, 0.5 * step_size);
  simd::axpy(step_size, view(state.velocity), view(state.position));
  const double u = energy(state.position, grad);
  require_finite(grad);
  kick(state.velocity, grad, 0.5 * step_size);
  return u;
}

PhaseState leapfrog_step(const PhaseState& state, const EnergyFunction& energy, double step_size) {
  PhaseState out = state;
  Vector grad;
  energy(out.position, grad);
  leapfrog_step(out, grad, energy, step_size);
  return out;
}

// ---------------------------------------------------------------------------

Vector VectorFieldContext::field(const Vector& x, const Vector& v) const {
  Vector out = Vector::Zero(x.size());
  for (const Wormhole& w : wormholes) {
    const double m = vicinity_mollifier(x, w, base_dim, influence);
    if (m == 0.0) continue;
    simd::axpy(m * simd::dot(view(v), view(w.direction)), view(w.direction), view(out));
  }
  return out;
}

Matrix VectorFieldContext::jacobian(const Vector& x, const Vector& v) const {
  Matrix out = Matrix::Zero(x.size(), x.size());
  for (const Wormhole& w : wormholes) out += vector_field_jacobian(x, v, w, base_dim, influence);
  return out;
}

double VectorFieldContext::log_abs_det(const Vector& x, const Vector& v, double c) const {
  const auto r = static_cast<Eigen::Index>(wormholes.size());
  if (r == 0) return 0.0;
  const double scale = static_cast<double>(base_dim) * influence;
  std::vector<Vector> u(wormholes.size());
  std::vector<Vector> gm(wormholes.size());
  for (std::size_t k = 0; k < wormholes.size(); ++k) {
    const Wormhole& w = wormholes[k];
    const double m = vicinity_mollifier(x, w, base_dim, influence);
    u[k] = simd::dot(view(v), view(w.direction)) * w.direction;
    gm[k] = (-m / scale) * vicinity_gradient(x, w);
  }
  Matrix small = Matrix::Identity(r, r);
  for (Eigen::Index i = 0; i < r; ++i)
    for (Eigen::Index j = 0; j < r; ++j)
      small(i, j) += c * simd::dot(view(gm[static_cast<std::size_t>(i)]), view(u[static_cast<std::size_t>(j)]));
  return std::log(std::abs(small.partialPivLu().determinant()));
}

VectorFieldContext make_vector_field(const WormholeNetwork& network, FixedPointOptions fp) {
  VectorFieldContext ctx;
  ctx.wormholes = network.wormholes;
  ctx.base_dim = network.modes.dim();
  ctx.influence = network.influence;
  ctx.fixed_point = fp;
  return ctx;
}

VfStepResult generalized_leapfrog_vf(PhaseState& state, Vector& grad, const EnergyFunction& energy,
                                     const VectorFieldContext& field, double step_size) {
  if (!(step_size > 0.0)) throw ConfigError("leapfrog: step size must be positive");
  require_finite(grad);
  VfStepResult res;
  kick(state.velocity, grad, 0.5 * step_size);
  const Vector& x0 = state.position;
  const Vector& v = state.velocity;
  if (field.wormholes.empty()) {
    simd::axpy(step_size, view(state.velocity), view(state.position));
  } else {
    const Vector f0 = field.field(x0, v);
    const Vector anchor = x0 + step_size * v + (0.5 * step_size) * f0;
    Vector x1 = x0 + step_size * (v + f0);
    res.converged = false;
    for (int it = 0; it < field.fixed_point.max_iterations; ++it) {
      Vector next = anchor + (0.5 * step_size) * field.field(x1, v);
      const double change = (next - x1).lpNorm<Eigen::Infinity>();
      x1 = std::move(next);
      res.iterations = it + 1;
      if (change <= field.fixed_point.tolerance) {
        res.converged = true;
        break;
      }
    }
    res.log_jacobian = field.log_abs_det(x0, v, 0.5 * step_size) - field.log_abs_det(x1, v, -0.5 * step_size);
    state.position = std::move(x1);
  }
  res.potential = energy(state.position, grad);
  require_finite(grad);
  kick(state.velocity, grad, 0.5 * step_size);
  return res;
}

// ---------------------------------------------------------------------------

AugmentedNetwork make_augmented_network(const Vector& augmented_position, const ModeLibrary& library,
                                        double world_offset, double influence) {
  AugmentedNetwork net;
  net.mirror = mirror_network(augmented_position, library, world_offset);
  net.library = &library;
  net.world_offset = world_offset;
  net.influence = influence;
  return net;
}

AugmentedNetwork make_augmented_network(const Vector& augmented_position, const AugmentedGeometry& geometry) {
  if (geometry.library == nullptr) throw ConfigError("augmented network: missing mode library");
  return make_augmented_network(augmented_position, *geometry.library, geometry.world_offset, geometry.influence);
}

BranchProbabilities branch_probabilities(const Vector& x, const AugmentedNetwork& net) {
  BranchProbabilities p;
  const std::size_t d = net.library->dim();
  p.jump.reserve(net.mirror.wormholes.size());
  double total = 0.0;
  for (const Wormhole& w : net.mirror.wormholes) {
    const double m = vicinity_mollifier(x, w, d, net.influence);
    p.jump.push_back(m);
    total += m;
  }
  if (total >= 1.0) {
    for (double& m : p.jump) m /= total;
    p.stay = 0.0;
  } else {
    p.stay = 1.0 - total;
  }
  return p;
}

namespace {

// Orthogonal reflection, in whitened coordinates, taking the direction toward
// the destination (seen from the source) to the direction toward the source
// (seen from the destination). The same matrix serves both directions, so
// the two maps are exact inverses.
Matrix whitened_reflection(const ModeLibrary& library, std::size_t source, std::size_t destination) {
  const auto d = static_cast<Eigen::Index>(library.dim());
  Matrix h = Matrix::Identity(d, d);
  if (source == destination) return h;
  const Vector axis = library[destination].location - library[source].location;
  const Vector a = (library.hessian_chol(source).transpose() * axis).normalized();
  const Vector b = (library.hessian_chol(destination).transpose() * axis).normalized();
  const Vector w = a + b;
  const double n = w.norm();
  if (n < 1e-12) return h;  // a == -b already
  const Vector u = w / n;
  h.noalias() -= 2.0 * u * u.transpose();
  return h;
}

}  // namespace

Vector mode_map(const ModeLibrary& library, std::size_t source, std::size_t destination,
                const Vector& augmented_point) {
  const auto d = static_cast<Eigen::Index>(library.dim());
  const Vector diff = augmented_point.head(d) - library[source].location;
  // A = L_dst^{-T} R L_src^T
  const Vector z = whitened_reflection(library, source, destination) * (library.hessian_chol(source).transpose() * diff);
  Vector out(d + 1);
  out.head(d) = library[destination].location +
                library.hessian_chol(destination).transpose().triangularView<Eigen::Upper>().solve(z);
  out[d] = -augmented_point[d];
  return out;
}

double mode_map_log_det(const ModeLibrary& library, std::size_t source, std::size_t destination) {
  return 0.5 * (library.log_det_hessian(source) - library.log_det_hessian(destination));
}

Vector resolve_drift(const Vector& x, const Vector& v, double step_size, std::optional<std::size_t> jump_to,
                     const AugmentedNetwork& net, JumpRule rule) {
  if (!jump_to) return x + step_size * v;
  const std::size_t k = *jump_to;
  if (rule == JumpRule::kModeMap) {
    const Vector half = x + (0.5 * step_size) * v;
    return mode_map(*net.library, net.mirror.source, k, half) + (0.5 * step_size) * v;
  }
  return net.mirror.wormholes[k].b + (0.5 * step_size) * v;
}

std::optional<std::size_t> sample_branch(const BranchProbabilities& probs, double u) {
  double acc = probs.stay;
  if (u < acc) return std::nullopt;
  for (std::size_t k = 0; k < probs.jump.size(); ++k) {
    acc += probs.jump[k];
    if (u < acc && probs.jump[k] > 0.0) return k;
  }
  // Rounding left u above the cumulative total: take the last positive branch.
  for (std::size_t k = probs.jump.size(); k-- > 0;)
    if (probs.jump[k] > 0.0) return k;
  return std::nullopt;
}

AugTrajectory stochastic_leapfrog_aug(const PhaseState& start, const Vector& start_grad, double start_potential,
                                      const EnergyFunction& energy, const AugmentedGeometry& geometry,
                                      const AugTrajectoryOptions& options, const BranchChooser& chooser) {
  if (!(options.step_size > 0.0)) throw ConfigError("leapfrog: step size must be positive");
  const double e = options.step_size;
  AugTrajectory out;
  out.final = start;
  out.gradient = start_grad;
  out.potential = start_potential;
  require_finite(out.gradient);
  PhaseState& s = out.final;
  out.branch_step = options.branch_step;
  const auto n = static_cast<std::size_t>(std::max(options.n_steps, 0));
  out.drift_points.reserve(n + 1);
  out.branch_points.reserve(n);
  out.reverse_branch_points.reserve(n);
  for (int step = 0; step < options.n_steps; ++step) {
    const double h_before = out.potential + 0.5 * s.velocity.squaredNorm();
    kick(s.velocity, out.gradient, 0.5 * e);
    out.drift_points.push_back(s.position);
    Vector mid = s.position + (0.5 * e) * s.velocity;
    if (options.jump_allowed && !out.jump_step && (options.branch_step < 0 || step == options.branch_step)) {
      const AugmentedNetwork net = make_augmented_network(mid, geometry);
      const BranchProbabilities probs = branch_probabilities(mid, net);
      const std::optional<std::size_t> branch = chooser(step, probs);
      out.log_forward_branch += safe_log(branch ? probs.jump[*branch] : probs.stay);
      s.position = resolve_drift(s.position, s.velocity, e, branch, net, options.rule);
      if (branch) {
        out.jump_step = step;
        out.jump_source = net.mirror.source;
        out.jump_destination = *branch;
        out.jump_world = net.mirror.world;
        if (options.rule == JumpRule::kModeMap)
          out.log_jacobian = mode_map_log_det(*geometry.library, net.mirror.source, *branch);
      }
    } else {
      simd::axpy(e, view(s.velocity), view(s.position));
    }
    const bool jumped_now = out.jump_step && *out.jump_step == step;
    out.reverse_branch_points.push_back(jumped_now ? Vector(s.position - (0.5 * e) * s.velocity) : mid);
    out.branch_points.push_back(std::move(mid));
    out.potential = energy(s.position, out.gradient);
    require_finite(out.gradient);
    kick(s.velocity, out.gradient, 0.5 * e);
    if (jumped_now) out.energy_gap = out.potential + 0.5 * s.velocity.squaredNorm() - h_before;
  }
  out.drift_points.push_back(s.position);
  return out;
}

double reverse_branch_log_probability(const AugTrajectory& forward, const AugmentedGeometry& geometry) {
  const int n_steps = static_cast<int>(forward.reverse_branch_points.size());
  // Reverse step n_steps-1-l undoes forward step l; it builds its network at
  // its own branch point.
  const auto stay_at = [&](int l) {
    const Vector& p = forward.reverse_branch_points[static_cast<std::size_t>(l)];
    return safe_log(branch_probabilities(p, make_augmented_network(p, geometry)).stay);
  };
  const auto jump_back_at = [&](int l) {
    const Vector& p = forward.reverse_branch_points[static_cast<std::size_t>(l)];
    const AugmentedNetwork rev = make_augmented_network(p, geometry);
    if (rev.mirror.source != forward.jump_destination || rev.mirror.world != -forward.jump_world) return kNegInf;
    return safe_log(branch_probabilities(p, rev).jump[forward.jump_source]);
  };
  if (forward.branch_step >= 0) {
    if (forward.branch_step >= n_steps) return 0.0;
    return forward.jump_step ? jump_back_at(forward.branch_step) : stay_at(forward.branch_step);
  }
  double logp = 0.0;
  const int last_free = forward.jump_step ? *forward.jump_step : -1;
  for (int l = n_steps - 1; l > last_free; --l) logp += stay_at(l);
  if (forward.jump_step) logp += jump_back_at(last_free);
  return logp;
}

}  // namespace whmc
