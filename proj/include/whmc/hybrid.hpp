#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <vector>

#include "whmc/mode_library.hpp"
#include "whmc/modesearch.hpp"
#include "whmc/regeneration.hpp"
#include "whmc/samplers.hpp"

namespace whmc {

struct HybridConfig {
  SamplerConfig whmc = [] {
    SamplerConfig c;
    c.variant = Variant::kWhmcAug;
    return c;
  }();
  std::size_t whmc_per_cycle = 1;
  std::size_t independence_per_cycle = 1;
  std::size_t burn_in = 0;   // iterations before visits are counted
  bool search_modes = true;  // run mode discovery at regenerations
  // log c: the median log weight since the last regeneration unless fixed.
  std::optional<double> fixed_log_c;
  ModeSearchOptions search;

  void validate() const;
};

struct RegenerationEvent {
  std::size_t iteration = 0;
  double probability = 0.0;
  Vector discarded;
  Vector fresh;
  std::size_t library_before = 0;
  std::size_t library_after = 0;
  std::vector<Vector> added;
  double log_c_before = 0.0;
  double log_c_after = 0.0;
  std::size_t q_proposals = 0;
};

struct HybridResult {
  Trace trace;
  std::vector<RegenerationEvent> events;
  ModeLibrary library;
  IndependenceKernel kernel;
  std::vector<std::size_t> visits;
};

using RegenerationCallback = std::function<void(const RegenerationEvent&)>;

// Alternates WHMC (augmented) transitions with independence steps; the
// library, wormhole network, kernel and c change only at regenerations.
HybridResult hybrid_chain(const TargetDensity& target, ModeLibrary library, const Vector& theta0,
                          const HybridConfig& config, const ChainOptions& options, std::uint64_t seed,
                          const RegenerationCallback& on_event = {});

// Running mean and covariance (Welford).
class RunningMoments {
 public:
  explicit RunningMoments(std::size_t dim);
  void add(const Vector& x);
  std::size_t count() const { return n_; }
  const Vector& mean() const { return mean_; }
  Matrix covariance() const;  // identity until two points were seen

 private:
  std::size_t n_ = 0;
  Vector mean_;
  Matrix m2_;
};

}  // namespace whmc
