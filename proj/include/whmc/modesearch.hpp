#pragma once

#include <cstddef>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "whmc/linalg.hpp"
#include "whmc/mode_library.hpp"
#include "whmc/regeneration.hpp"
#include "whmc/rng.hpp"
#include "whmc/target.hpp"

namespace whmc {

// -log(max(pi/Z - q^{1/T} + c_r, c_r / 2)), evaluated with a max shift.
class ResidualEnergy {
 public:
  // c_r defaults to floor_scale * max_k pi(mode_k) / Z over the kernel's components.
  ResidualEnergy(const TargetDensity& target, const IndependenceKernel& kernel, double temperature,
                 double floor_scale = 1e-8);

  double value(const Vector& x) const;
  double value_and_gradient(const Vector& x, Vector& grad) const;
  double log_floor() const { return log_cr_; }
  double temperature() const { return temperature_; }
  // The value where the interior clamp binds: -log(c_r / 2).
  double clamp_value() const { return -(log_cr_ - std::log(2.0)); }

 private:
  const TargetDensity* target_;
  const IndependenceKernel* kernel_;
  double temperature_;
  double log_cr_;
};

// f(x, grad) returns the objective and writes its gradient.
using Objective = std::function<double(const Vector&, Vector&)>;

struct BfgsOptions {
  double tolerance = 1e-6;  // on the infinity norm of the gradient
  int max_iterations = 500;
  double armijo = 1e-4;
  double shrink = 0.5;
  int max_backtracks = 60;
};

struct BfgsResult {
  Vector x;
  double value = 0.0;
  Vector gradient;
  int iterations = 0;
  bool converged = false;
};

BfgsResult bfgs_minimize(const Objective& f, const Vector& x0, const BfgsOptions& options = {});

// -d^2 log pi by central differences of the analytic gradient, symmetrized.
Matrix finite_difference_hessian(const TargetDensity& target, const Vector& x, double rel_step = 1e-5);

struct ModeSearchOptions {
  std::size_t n_starts = 20;
  double temperature = 1.05;
  double floor_scale = 1e-8;
  double start_cov_scale = 4.0;
  BfgsOptions bfgs;
  int polish_iterations = 20;
};

struct StartOutcome {
  Vector start;
  Vector end;            // after polishing when accepted
  double energy = 0.0;   // objective value at the optimizer's end point
  bool converged = false;
  bool accepted = false; // passed the residual and gradient checks
  std::optional<std::size_t> known_basin;  // library mode within Mahalanobis 3 of `end`
  std::optional<std::size_t> new_mode;     // index into ModeSearchReport::new_modes
  std::string status;
};

struct ModeSearchReport {
  std::vector<Mode> new_modes;
  std::vector<StartOutcome> starts;
  double dedup_threshold = 0.0;

  // Fraction of all starts whose accepted end point lies in a known basin.
  double known_basin_fraction() const;
};

// Euclidean dedup radius: 1e-2 x mean pairwise distance of the library, or
// 1e-3 with fewer than two modes.
double dedup_threshold(const ModeLibrary& library);

// Starts ~ N(start_mean, start_cov_scale * start_cov). With a kernel the
// tempered residual energy is minimized and each accepted minimum polished on
// U; without one (or with an empty library) U is minimized directly.
ModeSearchReport search_new_modes(const TargetDensity& target, const ModeLibrary& library,
                                  const IndependenceKernel* kernel, const Vector& start_mean,
                                  const Matrix& start_cov, const ModeSearchOptions& options, Rng& rng);

// Same, from an explicit start set (paired comparisons).
ModeSearchReport search_from_starts(const TargetDensity& target, const ModeLibrary& library,
                                    const IndependenceKernel* kernel, const std::vector<Vector>& starts,
                                    const ModeSearchOptions& options);

std::vector<Vector> draw_starts(const Vector& mean, const Matrix& cov, double scale, std::size_t n, Rng& rng);

struct LibraryUpdate {
  ModeLibrary library;
  std::size_t added = 0;
  std::size_t skipped = 0;
};

// Appends modes farther than `threshold` (default: dedup_threshold(library))
// from every existing and previously appended mode. Visit counts start at 0.
LibraryUpdate update_library(const ModeLibrary& library, const std::vector<Mode>& new_modes,
                             std::optional<double> threshold = std::nullopt);

}  // namespace whmc
