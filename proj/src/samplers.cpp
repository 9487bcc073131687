#include "whmc/samplers.hpp"

#include <cmath>
#include <limits>
#include <string>

#include "whmc/errors.hpp"

namespace whmc {
namespace {

bool metropolis(double log_accept, Rng& rng) {
  if (std::isnan(log_accept)) return false;
  if (log_accept >= 0.0) return true;
  return std::log(uniform01(rng)) < log_accept;
}

double draw_step(const SamplerConfig& c, Rng& rng) {
  if (c.step_jitter <= 0.0) return c.step_size;
  return c.step_size * (1.0 + c.step_jitter * (2.0 * uniform01(rng) - 1.0));
}

}  // namespace

std::string_view variant_name(Variant v) {
  switch (v) {
    case Variant::kHmc:
      return "hmc";
    case Variant::kWhmcVf:
      return "whmc_vf";
    case Variant::kWhmcAug:
      return "whmc_aug";
  }
  return "unknown";
}

Variant parse_variant(std::string_view name) {
  if (name == "hmc") return Variant::kHmc;
  if (name == "whmc_vf") return Variant::kWhmcVf;
  if (name == "whmc_aug") return Variant::kWhmcAug;
  throw ConfigError("unknown sampler variant: " + std::string(name));
}

std::string_view jump_rule_name(JumpRule r) {
  return r == JumpRule::kModeMap ? "mode_map" : "collapse";
}

JumpRule parse_jump_rule(std::string_view name) {
  if (name == "mode_map") return JumpRule::kModeMap;
  if (name == "collapse") return JumpRule::kCollapse;
  throw ConfigError("unknown jump rule: " + std::string(name));
}

std::string_view jump_schedule_name(JumpSchedule s) {
  return s == JumpSchedule::kRandomStep ? "random_step" : "every_step";
}

JumpSchedule parse_jump_schedule(std::string_view name) {
  if (name == "random_step") return JumpSchedule::kRandomStep;
  if (name == "every_step") return JumpSchedule::kEveryStep;
  throw ConfigError("unknown jump schedule: " + std::string(name));
}

void SamplerConfig::validate() const {
  if (!(step_size > 0.0)) throw ConfigError("step_size must be positive");
  if (n_leapfrog < 1) throw ConfigError("n_leapfrog must be at least 1");
  if (!(step_jitter >= 0.0 && step_jitter < 1.0)) throw ConfigError("step_jitter must lie in [0,1)");
  validate_geometry_params(epsilon, influence, world_offset);
  if (fixed_point.max_iterations < 1) throw ConfigError("fixed-point iteration cap must be at least 1");
  if (!(fixed_point.tolerance > 0.0)) throw ConfigError("fixed-point tolerance must be positive");
}

Vector Sampler::initialize(const Vector& theta, Rng&) const { return theta; }

// ---------------------------------------------------------------------------

double EnergyCache::at(const Vector& x) {
  if (!valid_ || x.size() != x_.size() || x != x_) {
    u_ = energy_->value_and_gradient(x, grad_);
    x_ = x;
    valid_ = true;
  }
  return u_;
}

void EnergyCache::store(const Vector& x, double u, const Vector& grad) {
  x_ = x;
  u_ = u;
  grad_ = grad;
  valid_ = true;
}

EnergyFunction EnergyCache::function() const {
  const PotentialEnergy* e = energy_;
  return [e](const Vector& x, Vector& g) { return e->value_and_gradient(x, g); };
}

// ---------------------------------------------------------------------------

HmcSampler::HmcSampler(const TargetDensity& target, SamplerConfig config)
    : config_(config), energy_(target), cache_(energy_) {
  config_.validate();
}

TransitionInfo HmcSampler::transition(Vector& state, Rng& rng) {
  TransitionInfo info;
  const double u0 = cache_.at(state);
  PhaseState s{state, standard_normal(rng, state.size())};
  const double h0 = u0 + 0.5 * s.velocity.squaredNorm();
  const double e = draw_step(config_, rng);
  Vector grad = cache_.gradient();
  double u1 = u0;
  const EnergyFunction f = cache_.function();
  try {
    for (int l = 0; l < config_.n_leapfrog; ++l) u1 = leapfrog_step(s, grad, f, e);
    info.log_accept = h0 - (u1 + 0.5 * s.velocity.squaredNorm());
  } catch (const NumericError&) {
    info.log_accept = -std::numeric_limits<double>::infinity();
  }
  if (!std::isfinite(u1)) info.log_accept = -std::numeric_limits<double>::infinity();
  info.accepted = metropolis(info.log_accept, rng);
  if (info.accepted) {
    state = s.position;
    cache_.store(state, u1, grad);
  }
  return info;
}

// ---------------------------------------------------------------------------

WhmcVfSampler::WhmcVfSampler(const TargetDensity& target, const WormholeNetwork& network,
                             SamplerConfig config)
    : config_(config), energy_(target), cache_(energy_) {
  config_.validate();
  field_ = make_vector_field(network, config_.fixed_point);
  field_.base_dim = target.dim();
  field_.influence = config_.influence;
}

TransitionInfo WhmcVfSampler::transition(Vector& state, Rng& rng) {
  TransitionInfo info;
  const double u0 = cache_.at(state);
  PhaseState s{state, standard_normal(rng, state.size())};
  const double h0 = u0 + 0.5 * s.velocity.squaredNorm();
  const double e = draw_step(config_, rng);
  Vector grad = cache_.gradient();
  double u1 = u0;
  double log_jac = 0.0;
  const EnergyFunction f = cache_.function();
  try {
    for (int l = 0; l < config_.n_leapfrog; ++l) {
      const VfStepResult r = generalized_leapfrog_vf(s, grad, f, field_, e);
      u1 = r.potential;
      log_jac += r.log_jacobian;
      info.converged = info.converged && r.converged;
    }
    info.log_accept = h0 - (u1 + 0.5 * s.velocity.squaredNorm()) + log_jac;
  } catch (const NumericError&) {
    info.log_accept = -std::numeric_limits<double>::infinity();
  }
  if (!info.converged || !std::isfinite(u1)) info.log_accept = -std::numeric_limits<double>::infinity();
  info.accepted = metropolis(info.log_accept, rng);
  if (info.accepted) {
    state = s.position;
    cache_.store(state, u1, grad);
  }
  return info;
}

// ---------------------------------------------------------------------------

WhmcAugSampler::WhmcAugSampler(const TargetDensity& target, ModeLibrary library, SamplerConfig config)
    : config_(config), energy_(target, true), cache_(energy_), library_(std::move(library)) {
  config_.validate();
  if (library_.empty()) throw ConfigError("whmc_aug requires a non-empty mode library");
  if (library_.dim() != target.dim()) throw ConfigError("mode library dimension does not match target");
}

void WhmcAugSampler::set_library(ModeLibrary library) {
  if (library.empty() || library.dim() != library_.dim()) throw ConfigError("whmc_aug: invalid replacement library");
  library_ = std::move(library);
}

Vector WhmcAugSampler::initialize(const Vector& theta, Rng& rng) const {
  Vector out(theta.size() + 1);
  out.head(theta.size()) = theta;
  std::normal_distribution<double> normal(0.0, 1.0);
  out[theta.size()] = world_of(normal(rng)) * config_.world_offset;
  return out;
}

TransitionInfo WhmcAugSampler::transition(Vector& state, Rng& rng) {
  if (static_cast<std::size_t>(state.size()) != state_dim())
    throw ConfigError("whmc_aug: state must carry the world coordinate");
  TransitionInfo info;
  const double u0 = cache_.at(state);
  PhaseState start{state, standard_normal(rng, state.size())};
  const double h0 = u0 + 0.5 * start.velocity.squaredNorm();
  AugTrajectoryOptions opt;
  opt.step_size = draw_step(config_, rng);
  opt.n_steps = config_.n_leapfrog;
  opt.rule = config_.jump_rule;
  opt.jump_allowed = config_.allow_jumps;
  if (config_.jump_schedule == JumpSchedule::kRandomStep)
    opt.branch_step = static_cast<int>(uniform01(rng) * opt.n_steps) % opt.n_steps;
  const AugmentedGeometry geometry{&library_, config_.world_offset, config_.influence};
  const BranchChooser chooser = [&rng](int, const BranchProbabilities& p) {
    return sample_branch(p, uniform01(rng));
  };
  AugTrajectory traj;
  try {
    traj = stochastic_leapfrog_aug(start, cache_.gradient(), u0, cache_.function(), geometry, opt, chooser);
    const double h1 = traj.potential + 0.5 * traj.final.velocity.squaredNorm();
    info.proposed_jump = traj.jump_step.has_value();
    info.energy_gap = traj.energy_gap;
    if (traj.jump_step) info.jump_destination = traj.jump_destination;
    if (config_.jump_rule == JumpRule::kCollapse) {
      info.log_accept = -h1 + h0 + traj.energy_gap;
    } else {
      double log_ratio = 0.0;
      if (opt.jump_allowed)
        log_ratio = reverse_branch_log_probability(traj, geometry) - traj.log_forward_branch;
      info.log_accept = -h1 + h0 + traj.log_jacobian + log_ratio;
    }
    if (!std::isfinite(h1)) info.log_accept = -std::numeric_limits<double>::infinity();
  } catch (const NumericError&) {
    info.log_accept = -std::numeric_limits<double>::infinity();
  }
  info.accepted = metropolis(info.log_accept, rng);
  if (info.accepted) {
    state = traj.final.position;
    cache_.store(state, traj.potential, traj.gradient);
    info.jumped = info.proposed_jump;
  }
  return info;
}

std::unique_ptr<Sampler> make_sampler(const TargetDensity& target, const ModeLibrary& library,
                                      const SamplerConfig& config) {
  switch (config.variant) {
    case Variant::kHmc:
      return std::make_unique<HmcSampler>(target, config);
    case Variant::kWhmcVf: {
      const WormholeNetwork net = library.empty()
                                      ? WormholeNetwork{}
                                      : build_network(library, config.epsilon, config.influence,
                                                      config.world_offset);
      return std::make_unique<WhmcVfSampler>(target, net, config);
    }
    case Variant::kWhmcAug:
      return std::make_unique<WhmcAugSampler>(target, library, config);
  }
  throw ConfigError("unknown sampler variant");
}

// ---------------------------------------------------------------------------

Vector Trace::mean() const {
  if (n_iterations == 0) return initial;
  return sum / static_cast<double>(n_iterations);
}

double Trace::acceptance_rate() const {
  return n_iterations == 0 ? 0.0 : static_cast<double>(n_accepted) / static_cast<double>(n_iterations);
}

TraceRecorder::TraceRecorder(const Vector& initial, std::size_t dim, const ChainOptions& options)
    : options_(options), start_(Clock::now()), next_mark_s_(options.mark_start_s) {
  if (options_.thin == 0) throw ConfigError("thin must be at least 1");
  if (!(options_.mark_factor > 1.0)) throw ConfigError("mark_factor must exceed 1");
  trace_.dim = dim;
  trace_.initial = initial.head(static_cast<Eigen::Index>(dim));
  trace_.sum = Vector::Zero(static_cast<Eigen::Index>(dim));
}

double TraceRecorder::elapsed_s() const {
  return std::chrono::duration<double>(Clock::now() - start_).count();
}

bool TraceRecorder::keep_going() const {
  const bool by_iter = options_.n_iter == 0 || trace_.n_iterations < options_.n_iter;
  const bool by_time = options_.wall_budget_s <= 0.0 || elapsed_s() < options_.wall_budget_s;
  if (options_.n_iter == 0 && options_.wall_budget_s <= 0.0) return false;
  return by_iter && by_time;
}

void TraceRecorder::record(const Vector& state, bool accepted, bool jumped, bool regenerated) {
  const auto d = static_cast<Eigen::Index>(trace_.dim);
  trace_.sum += state.head(d);
  ++trace_.n_iterations;
  trace_.n_accepted += accepted ? 1 : 0;
  trace_.n_jumps += jumped ? 1 : 0;
  trace_.n_regenerations += regenerated ? 1 : 0;
  const double t = elapsed_s();
  if ((trace_.n_iterations - 1) % options_.thin == 0) {
    trace_.iteration.push_back(trace_.n_iterations);
    trace_.wall_ms.push_back(1e3 * t);
    trace_.samples.push_back(state.head(d));
    trace_.accepted.push_back(accepted ? 1 : 0);
    trace_.jumped.push_back(jumped ? 1 : 0);
    trace_.regenerated.push_back(regenerated ? 1 : 0);
  }
  while (t >= next_mark_s_) {
    trace_.marks.push_back({t, trace_.n_iterations, trace_.mean()});
    next_mark_s_ *= options_.mark_factor;
  }
}

Trace TraceRecorder::finish() {
  trace_.elapsed_s = elapsed_s();
  if (trace_.n_iterations > 0 &&
      (trace_.marks.empty() || trace_.marks.back().iterations != trace_.n_iterations))
    trace_.marks.push_back({trace_.elapsed_s, trace_.n_iterations, trace_.mean()});
  return std::move(trace_);
}

Trace run_chain(Sampler& sampler, const Vector& theta0, const ChainOptions& options, std::uint64_t seed) {
  if (static_cast<std::size_t>(theta0.size()) != sampler.base_dim())
    throw ConfigError("run_chain: initial point has wrong dimension");
  Rng rng(seed);
  Vector state = sampler.initialize(theta0, rng);
  TraceRecorder rec(theta0, sampler.base_dim(), options);
  while (rec.keep_going()) {
    const TransitionInfo info = sampler.transition(state, rng);
    rec.record(state, info.accepted, info.jumped, false);
  }
  return rec.finish();
}

}  // namespace whmc
