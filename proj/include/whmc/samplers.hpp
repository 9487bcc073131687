#pragma once

#include <chrono>
#include <cstddef>
#include <cstdint>
#include <memory>
#include <optional>
#include <string_view>
#include <vector>

#include "whmc/geometry.hpp"
#include "whmc/integrators.hpp"
#include "whmc/linalg.hpp"
#include "whmc/mode_library.hpp"
#include "whmc/rng.hpp"
#include "whmc/target.hpp"

namespace whmc {

enum class Variant { kHmc, kWhmcVf, kWhmcAug };

std::string_view variant_name(Variant v);
Variant parse_variant(std::string_view name);  // ConfigError on unknown
std::string_view jump_rule_name(JumpRule r);
JumpRule parse_jump_rule(std::string_view name);

// Where the augmented sampler may branch: at one uniformly drawn step per
// trajectory, or at every step until the first jump.
enum class JumpSchedule { kRandomStep, kEveryStep };
std::string_view jump_schedule_name(JumpSchedule s);
JumpSchedule parse_jump_schedule(std::string_view name);

struct SamplerConfig {
  Variant variant = Variant::kHmc;
  double step_size = 0.1;
  int n_leapfrog = 10;
  // Each trajectory draws its step size uniformly from step_size * [1 - j, 1 + j].
  double step_jitter = 0.0;
  double epsilon = kDefaultEpsilon;
  double influence = kDefaultInfluence;
  double world_offset = kDefaultWorldOffset;
  JumpRule jump_rule = JumpRule::kModeMap;
  JumpSchedule jump_schedule = JumpSchedule::kRandomStep;
  bool allow_jumps = true;
  FixedPointOptions fixed_point;

  void validate() const;  // ConfigError
};

struct TransitionInfo {
  bool accepted = false;
  bool jumped = false;   // an accepted trajectory that contained a jump
  bool proposed_jump = false;
  bool converged = true;
  double log_accept = 0.0;
  double energy_gap = 0.0;
  std::optional<std::size_t> jump_destination;
};

class Sampler {
 public:
  virtual ~Sampler() = default;
  virtual std::string_view name() const = 0;
  virtual std::size_t base_dim() const = 0;
  virtual std::size_t state_dim() const { return base_dim(); }
  // Lifts a point of the original space into the sampler's state space.
  virtual Vector initialize(const Vector& theta, Rng& rng) const;
  // Advances `state` in place.
  virtual TransitionInfo transition(Vector& state, Rng& rng) = 0;
};

// U and grad U memoized at the last evaluated point.
class EnergyCache {
 public:
  explicit EnergyCache(const PotentialEnergy& energy) : energy_(&energy) {}
  double at(const Vector& x);  // refreshes if x differs
  const Vector& gradient() const { return grad_; }
  void store(const Vector& x, double u, const Vector& grad);
  EnergyFunction function() const;

 private:
  const PotentialEnergy* energy_;
  Vector x_;
  Vector grad_;
  double u_ = 0.0;
  bool valid_ = false;
};

class HmcSampler : public Sampler {
 public:
  HmcSampler(const TargetDensity& target, SamplerConfig config);
  std::string_view name() const override { return "hmc"; }
  std::size_t base_dim() const override { return energy_.base_dim(); }
  TransitionInfo transition(Vector& state, Rng& rng) override;

 private:
  SamplerConfig config_;
  PotentialEnergy energy_;
  EnergyCache cache_;
};

class WhmcVfSampler : public Sampler {
 public:
  WhmcVfSampler(const TargetDensity& target, const WormholeNetwork& network, SamplerConfig config);
  std::string_view name() const override { return "whmc_vf"; }
  std::size_t base_dim() const override { return energy_.base_dim(); }
  TransitionInfo transition(Vector& state, Rng& rng) override;
  const VectorFieldContext& field() const { return field_; }

 private:
  SamplerConfig config_;
  PotentialEnergy energy_;
  EnergyCache cache_;
  VectorFieldContext field_;
};

class WhmcAugSampler : public Sampler {
 public:
  WhmcAugSampler(const TargetDensity& target, ModeLibrary library, SamplerConfig config);
  std::string_view name() const override { return "whmc_aug"; }
  std::size_t base_dim() const override { return energy_.base_dim(); }
  std::size_t state_dim() const override { return energy_.base_dim() + 1; }
  // Appends the world coordinate sign(N(0,1)) * h.
  Vector initialize(const Vector& theta, Rng& rng) const override;
  TransitionInfo transition(Vector& state, Rng& rng) override;

  const ModeLibrary& library() const { return library_; }
  void set_library(ModeLibrary library);

 private:
  SamplerConfig config_;
  PotentialEnergy energy_;
  EnergyCache cache_;
  ModeLibrary library_;
};

std::unique_ptr<Sampler> make_sampler(const TargetDensity& target, const ModeLibrary& library,
                                      const SamplerConfig& config);

// ---------------------------------------------------------------------------

struct TraceMark {
  double time_s = 0.0;
  std::size_t iterations = 0;
  Vector mean;  // running mean of all iterations so far
};

struct Trace {
  std::size_t dim = 0;
  Vector initial;
  // One row per recorded iteration (every `thin`-th).
  std::vector<std::size_t> iteration;
  std::vector<double> wall_ms;
  std::vector<Vector> samples;
  std::vector<std::uint8_t> accepted;
  std::vector<std::uint8_t> jumped;
  std::vector<std::uint8_t> regenerated;
  std::vector<TraceMark> marks;

  std::size_t n_iterations = 0;
  std::size_t n_accepted = 0;
  std::size_t n_jumps = 0;
  std::size_t n_regenerations = 0;
  double elapsed_s = 0.0;
  Vector sum;  // of every iteration's sample, thinned or not

  Vector mean() const;
  double acceptance_rate() const;
};

struct ChainOptions {
  std::size_t n_iter = 1000;
  double wall_budget_s = 0.0;  // 0 disables the wall-clock budget
  std::size_t thin = 1;
  double mark_start_s = 0.1;
  double mark_factor = 1.3;
};

// Shared bookkeeping for every chain driver.
class TraceRecorder {
 public:
  TraceRecorder(const Vector& initial, std::size_t dim, const ChainOptions& options);
  // False once either budget is exhausted.
  bool keep_going() const;
  void record(const Vector& state, bool accepted, bool jumped, bool regenerated);
  Trace finish();
  double elapsed_s() const;

 private:
  using Clock = std::chrono::steady_clock;
  ChainOptions options_;
  Trace trace_;
  Clock::time_point start_;
  double next_mark_s_;
};

// Runs `sampler` from theta0 (original coordinates).
Trace run_chain(Sampler& sampler, const Vector& theta0, const ChainOptions& options, std::uint64_t seed);

}  // namespace whmc
