#pragma once

#include <cstddef>
#include <functional>
#include <optional>
#include <vector>

#include "whmc/geometry.hpp"
#include "whmc/linalg.hpp"
#include "whmc/mode_library.hpp"

namespace whmc {

// Unit mass matrix throughout, so velocity and momentum coincide.
struct PhaseState {
  Vector position;
  Vector velocity;
};

// Returns U(x) and writes grad U(x) into the second argument.
using EnergyFunction = std::function<double(const Vector&, Vector&)>;

// One leapfrog step in place. `grad` holds grad U(position) on entry and
// grad U(new position) on exit; returns U(new position). Throws NumericError
// on a non-finite gradient.
double leapfrog_step(PhaseState& state, Vector& grad, const EnergyFunction& energy, double step_size);
PhaseState leapfrog_step(const PhaseState& state, const EnergyFunction& energy, double step_size);

// ---------------------------------------------------------------------------
// Deterministic vector field f(x, v) = sum_k m_k(x) <v, v*_k> v*_k.

struct FixedPointOptions {
  int max_iterations = 10;
  double tolerance = 1e-10;  // on the infinity norm of successive iterates
};

struct VectorFieldContext {
  std::vector<Wormhole> wormholes;
  std::size_t base_dim = 0;  // D in the mollifier exp(-V / (D F))
  double influence = kDefaultInfluence;
  FixedPointOptions fixed_point;

  Vector field(const Vector& x, const Vector& v) const;
  Matrix jacobian(const Vector& x, const Vector& v) const;
  // log |det(I + c * d f/d x)| through the determinant lemma on the rank-r factors.
  double log_abs_det(const Vector& x, const Vector& v, double c) const;
};

VectorFieldContext make_vector_field(const WormholeNetwork& network, FixedPointOptions fp = {});

struct VfStepResult {
  double potential = 0.0;
  double log_jacobian = 0.0;
  bool converged = true;
  int iterations = 0;
};

// Half kick, implicit drift x' = x + e[v + (f(x, v) + f(x', v)) / 2], half kick.
// Same in-place convention as leapfrog_step.
VfStepResult generalized_leapfrog_vf(PhaseState& state, Vector& grad, const EnergyFunction& energy,
                                     const VectorFieldContext& field, double step_size);

// ---------------------------------------------------------------------------
// Randomized vector field in the augmented space (D original coordinates plus
// one world coordinate).

enum class JumpRule {
  kModeMap,   // affine Laplace map between modes; exact Metropolis-Hastings correction
  kCollapse,  // land on the destination mode itself; energy-gap acceptance
};

// Library plus the parameters that turn it into a mirror network at a point.
struct AugmentedGeometry {
  const ModeLibrary* library = nullptr;
  double world_offset = kDefaultWorldOffset;
  double influence = kDefaultInfluence;
};

struct AugmentedNetwork {
  MirrorNetwork mirror;
  const ModeLibrary* library = nullptr;
  double world_offset = kDefaultWorldOffset;
  double influence = kDefaultInfluence;
};

AugmentedNetwork make_augmented_network(const Vector& augmented_position, const ModeLibrary& library,
                                        double world_offset, double influence);
AugmentedNetwork make_augmented_network(const Vector& augmented_position, const AugmentedGeometry& geometry);

// Branch probabilities at x: jump[k] for destination k and `stay` for the
// velocity branch. Jump weights are normalized when they sum to 1 or more.
struct BranchProbabilities {
  std::vector<double> jump;
  double stay = 1.0;
};
BranchProbabilities branch_probabilities(const Vector& x, const AugmentedNetwork& net);

// Affine jump map source -> destination: whitened by the source Hessian,
// reflected so the approach direction is reversed, coloured by the
// destination Hessian; the world coordinate is negated. Also its log |det|.
Vector mode_map(const ModeLibrary& library, std::size_t source, std::size_t destination,
                const Vector& augmented_point);
double mode_map_log_det(const ModeLibrary& library, std::size_t source, std::size_t destination);

// Drift resolution once the pre-point branch is known. The post-point branch
// is always the velocity branch, so the implicit equation has a closed form.
//   velocity branch: x + e v
//   jump to k:       kModeMap  -> Phi_k(x + e v / 2) + e v / 2
//                    kCollapse -> x*_k + e v / 2
Vector resolve_drift(const Vector& x, const Vector& v, double step_size, std::optional<std::size_t> jump_to,
                     const AugmentedNetwork& net, JumpRule rule);

// Branch chosen at a step: nullopt for the velocity branch, else destination.
using BranchChooser =
    std::function<std::optional<std::size_t>(int step, const BranchProbabilities& probs)>;

// Samples a branch from `probs` with the given rng draw u in [0,1).
std::optional<std::size_t> sample_branch(const BranchProbabilities& probs, double u);

struct AugTrajectoryOptions {
  double step_size = 0.1;
  int n_steps = 10;
  JumpRule rule = JumpRule::kModeMap;
  bool jump_allowed = true;
  // Step at which the branch is sampled; every step when negative. A single
  // opportunity at a uniformly drawn step keeps the reversed trajectory's
  // opportunity (n_steps - 1 - branch_step) equally likely.
  int branch_step = -1;
};

struct AugTrajectory {
  PhaseState final;
  double potential = 0.0;   // U at final position
  Vector gradient;          // grad U at final position
  std::optional<int> jump_step;
  std::size_t jump_source = 0;       // nearest mode at the jump's branch point
  std::size_t jump_destination = 0;
  int jump_world = 0;                // world of the jump's branch point
  double energy_gap = 0.0;  // H after minus H before the jump step
  double log_jacobian = 0.0;
  double log_forward_branch = 0.0;  // log prob of the branch sequence taken
  int branch_step = -1;             // copied from the options
  std::vector<Vector> drift_points;  // positions x^(0..L)
  // Per step: where the branch is drawn (drift midpoint x + e v / 2) and where
  // the time-reversed step would draw it (x' - e v / 2). They differ only at
  // a jump.
  std::vector<Vector> branch_points;
  std::vector<Vector> reverse_branch_points;
};

// L steps of half kick, branch-dependent drift, half kick. At most one jump.
// Each branch is drawn at the drift midpoint from the mirror network built
// there, so a reversed non-jump step sees exactly the same probabilities.
AugTrajectory stochastic_leapfrog_aug(const PhaseState& start, const Vector& start_grad, double start_potential,
                                      const EnergyFunction& energy, const AugmentedGeometry& geometry,
                                      const AugTrajectoryOptions& options, const BranchChooser& chooser);

// log probability that the time-reversed trajectory (started from the final
// state with negated velocity) takes the mirrored branch sequence; -inf if it
// cannot.
double reverse_branch_log_probability(const AugTrajectory& forward, const AugmentedGeometry& geometry);

}  // namespace whmc
