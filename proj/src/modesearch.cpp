#include "whmc/modesearch.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "whmc/errors.hpp"
#include "whmc/targets.hpp"

namespace whmc {

ResidualEnergy::ResidualEnergy(const TargetDensity& target, const IndependenceKernel& kernel, double temperature,
                               double floor_scale)
    : target_(&target), kernel_(&kernel), temperature_(temperature) {
  if (!(temperature >= 1.0)) throw ConfigError("residual energy: temperature must be at least 1");
  if (!(floor_scale > 0.0)) throw ConfigError("residual energy: floor scale must be positive");
  if (kernel.mixture.empty()) throw ConfigError("residual energy: empty independence kernel");
  double best = -std::numeric_limits<double>::infinity();
  for (const Vector& m : kernel.mixture.means()) best = std::max(best, target.log_density(m) - kernel.log_z);
  log_cr_ = std::log(floor_scale) + best;
}

double ResidualEnergy::value(const Vector& x) const {
  Vector g;
  return value_and_gradient(x, g);
}

double ResidualEnergy::value_and_gradient(const Vector& x, Vector& grad) const {
  Vector gp;
  Vector gq;
  const double a = target_->log_density_and_gradient(x, gp) - kernel_->log_z;
  const double b = kernel_->mixture.log_density_and_gradient(x, gq) / temperature_;
  const double c = log_cr_;
  const double m = std::max({a, b, c});
  const double ea = std::exp(a - m);
  const double eb = std::exp(b - m);
  const double ec = std::exp(c - m);
  const double inner = ea - eb + ec;
  if (!(inner > 0.5 * ec)) {
    grad = Vector::Zero(x.size());
    return clamp_value();
  }
  grad = -(ea * gp - (eb / temperature_) * gq) / inner;
  return -(m + std::log(inner));
}

BfgsResult bfgs_minimize(const Objective& f, const Vector& x0, const BfgsOptions& options) {
  const auto n = x0.size();
  BfgsResult r;
  r.x = x0;
  r.value = f(r.x, r.gradient);
  if (!std::isfinite(r.value) || !r.gradient.allFinite()) return r;
  Matrix hinv = Matrix::Identity(n, n);
  Vector xn;
  Vector gn;
  for (r.iterations = 0; r.iterations < options.max_iterations; ++r.iterations) {
    if (r.gradient.lpNorm<Eigen::Infinity>() <= options.tolerance) {
      r.converged = true;
      return r;
    }
    Vector p = -hinv * r.gradient;
    double slope = r.gradient.dot(p);
    if (!(slope < 0.0)) {
      hinv.setIdentity();
      p = -r.gradient;
      slope = r.gradient.dot(p);
    }
    // Keep the very first trial step O(1).
    if (r.iterations == 0) {
      const double big = p.lpNorm<Eigen::Infinity>();
      if (big > 1.0) {
        p /= big;
        slope /= big;
      }
    }
    double t = 1.0;
    double fn = 0.0;
    bool ok = false;
    for (int k = 0; k < options.max_backtracks; ++k) {
      xn = r.x + t * p;
      fn = f(xn, gn);
      if (std::isfinite(fn) && gn.allFinite() && fn <= r.value + options.armijo * t * slope) {
        ok = true;
        break;
      }
      t *= options.shrink;
    }
    if (!ok) return r;
    // Secant refinement: jump to where the directional derivative interpolates
    // to zero. Exact on quadratics, which restores finite termination there.
    const double slope_n = gn.dot(p);
    if (slope_n > slope) {
      const double ts = t * slope / (slope - slope_n);
      if (std::abs(ts - t) > 1e-12 * t) {
        const Vector xs = r.x + ts * p;
        Vector gs;
        const double fs = f(xs, gs);
        if (std::isfinite(fs) && gs.allFinite() && fs < fn && fs <= r.value + options.armijo * ts * slope) {
          xn = xs;
          fn = fs;
          gn = gs;
        }
      }
    }
    const Vector s = xn - r.x;
    const Vector y = gn - r.gradient;
    const double ys = y.dot(s);
    if (ys > 1e-12 * s.norm() * y.norm()) {
      if (r.iterations == 0) hinv *= ys / y.squaredNorm();
      const double rho = 1.0 / ys;
      const Vector hy = hinv * y;
      // (I - rho s y^T) H (I - rho y s^T) + rho s s^T
      hinv += (rho * rho * y.dot(hy) + rho) * (s * s.transpose()) - rho * (hy * s.transpose() + s * hy.transpose());
    }
    r.x = xn;
    r.value = fn;
    r.gradient = gn;
  }
  r.converged = r.gradient.lpNorm<Eigen::Infinity>() <= options.tolerance;
  return r;
}

Matrix finite_difference_hessian(const TargetDensity& target, const Vector& x, double rel_step) {
  const auto n = x.size();
  Matrix h(n, n);
  Vector xp = x;
  for (Eigen::Index i = 0; i < n; ++i) {
    const double step = rel_step * std::max(1.0, std::abs(x[i]));
    xp[i] = x[i] + step;
    const Vector gp = target.grad_log_density(xp);
    xp[i] = x[i] - step;
    const Vector gm = target.grad_log_density(xp);
    xp[i] = x[i];
    h.col(i) = -(gp - gm) / (2.0 * step);
  }
  return 0.5 * (h + h.transpose());
}

double ModeSearchReport::known_basin_fraction() const {
  if (starts.empty()) return 0.0;
  std::size_t n = 0;
  for (const StartOutcome& s : starts) n += (s.accepted && s.known_basin) ? 1 : 0;
  return static_cast<double>(n) / static_cast<double>(starts.size());
}

double dedup_threshold(const ModeLibrary& library) {
  if (library.size() < 2) return 1e-3;
  return 1e-2 * mean_pairwise_distance(library.locations());
}

std::vector<Vector> draw_starts(const Vector& mean, const Matrix& cov, double scale, std::size_t n, Rng& rng) {
  const Matrix l = Eigen::LLT<Matrix>(regularize_hessian(scale * cov)).matrixL();
  std::vector<Vector> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) out.push_back(mean + l * standard_normal(rng, mean.size()));
  return out;
}

namespace {

bool lexicographic_less(const Vector& a, const Vector& b) {
  return std::lexicographical_compare(a.data(), a.data() + a.size(), b.data(), b.data() + b.size());
}

std::optional<std::size_t> basin_of(const ModeLibrary& library, const Vector& x) {
  std::optional<std::size_t> best;
  double best_d = 9.0;  // Mahalanobis radius 3
  for (std::size_t k = 0; k < library.size(); ++k) {
    const double d = library.mahalanobis2(k, x);
    if (d <= best_d) {
      best_d = d;
      best = k;
    }
  }
  return best;
}

}  // namespace

ModeSearchReport search_from_starts(const TargetDensity& target, const ModeLibrary& library,
                                    const IndependenceKernel* kernel, const std::vector<Vector>& starts,
                                    const ModeSearchOptions& options) {
  ModeSearchReport report;
  report.dedup_threshold = dedup_threshold(library);
  const Objective plain = [&target](const Vector& x, Vector& g) {
    const double lp = target.log_density_and_gradient(x, g);
    g = -g;
    return -lp;
  };
  std::optional<ResidualEnergy> residual;
  if (kernel != nullptr && !library.empty())
    residual.emplace(target, *kernel, options.temperature, options.floor_scale);

  struct Candidate {
    double energy;
    Vector location;
    std::size_t start;
  };
  std::vector<Candidate> candidates;
  for (std::size_t i = 0; i < starts.size(); ++i) {
    StartOutcome out;
    out.start = starts[i];
    Vector end;
    if (residual) {
      const Objective obj = [&residual](const Vector& x, Vector& g) { return residual->value_and_gradient(x, g); };
      const BfgsResult r = bfgs_minimize(obj, starts[i], options.bfgs);
      out.energy = r.value;
      out.converged = r.converged;
      out.end = r.x;
      // Only minima where pi/Z clearly exceeds q^{1/T} count.
      if (!(r.value < -(residual->log_floor() + std::log(2.0)))) {
        out.status = r.converged ? "residual_floor" : "residual_not_converged";
        report.starts.push_back(std::move(out));
        continue;
      }
      BfgsOptions polish = options.bfgs;
      polish.max_iterations = options.polish_iterations;
      end = bfgs_minimize(plain, r.x, polish).x;
    } else {
      const BfgsResult r = bfgs_minimize(plain, starts[i], options.bfgs);
      out.energy = r.value;
      out.converged = r.converged;
      end = r.x;
    }
    out.end = end;
    const Vector g = target.grad_log_density(end);
    if (!(g.lpNorm<Eigen::Infinity>() <= 10.0 * options.bfgs.tolerance)) {
      out.status = "gradient_check_failed";
      report.starts.push_back(std::move(out));
      continue;
    }
    out.accepted = true;
    out.known_basin = basin_of(library, end);
    out.status = out.known_basin ? "known_basin" : "candidate";
    candidates.push_back({-target.log_density(end), end, i});
    report.starts.push_back(std::move(out));
  }

  std::sort(candidates.begin(), candidates.end(), [](const Candidate& a, const Candidate& b) {
    if (a.energy != b.energy) return a.energy < b.energy;
    return lexicographic_less(a.location, b.location);
  });
  const double thr = report.dedup_threshold;
  std::vector<Vector> kept = library.locations();
  for (const Candidate& c : candidates) {
    StartOutcome& out = report.starts[c.start];
    bool duplicate = false;
    for (std::size_t j = 0; j < kept.size(); ++j) {
      if ((kept[j] - c.location).norm() <= thr) {
        duplicate = true;
        if (j >= library.size()) out.new_mode = j - library.size();
        break;
      }
    }
    if (duplicate) {
      if (!out.new_mode) out.status = "duplicate_of_library";
      continue;
    }
    const Matrix h = finite_difference_hessian(target, c.location);
    if (Eigen::LLT<Matrix>(h).info() != Eigen::Success) {
      out.accepted = false;
      out.status = "not_a_maximum";
      continue;
    }
    out.new_mode = report.new_modes.size();
    out.status = "new_mode";
    report.new_modes.push_back(Mode{c.location, h, 1.0, 0});
    kept.push_back(c.location);
  }
  return report;
}

ModeSearchReport search_new_modes(const TargetDensity& target, const ModeLibrary& library,
                                  const IndependenceKernel* kernel, const Vector& start_mean,
                                  const Matrix& start_cov, const ModeSearchOptions& options, Rng& rng) {
  const std::vector<Vector> starts = draw_starts(start_mean, start_cov, options.start_cov_scale, options.n_starts, rng);
  return search_from_starts(target, library, kernel, starts, options);
}

LibraryUpdate update_library(const ModeLibrary& library, const std::vector<Mode>& new_modes,
                             std::optional<double> threshold) {
  const double thr = threshold.value_or(dedup_threshold(library));
  std::vector<Mode> modes = library.modes();
  LibraryUpdate up;
  for (const Mode& m : new_modes) {
    const bool duplicate = std::any_of(modes.begin(), modes.end(),
                                       [&](const Mode& e) { return (e.location - m.location).norm() <= thr; });
    if (duplicate) {
      ++up.skipped;
      continue;
    }
    Mode copy = m;
    copy.visits = 0;
    modes.push_back(std::move(copy));
    ++up.added;
  }
  up.library = ModeLibrary(std::move(modes));
  return up;
}

}  // namespace whmc
