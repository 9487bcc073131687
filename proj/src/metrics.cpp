#include "whmc/metrics.hpp"

#include <chrono>
#include <cmath>
#include <limits>

#include "whmc/errors.hpp"

namespace whmc {

double rem(const Vector& mean, const Vector& reference) {
  if (mean.size() != reference.size()) throw ConfigError("rem: dimension mismatch");
  const double denom = reference.lpNorm<1>();
  if (!(denom > 0.0)) throw ConfigError("rem: reference mean has zero L1 norm");
  return (mean - reference).lpNorm<1>() / denom;
}

std::vector<RemPoint> rem_curve(const Trace& trace, const Vector& reference) {
  std::vector<RemPoint> out;
  out.reserve(trace.marks.size());
  for (const TraceMark& m : trace.marks) out.push_back({m.time_s, m.iterations, rem(m.mean, reference)});
  return out;
}

std::vector<RemPoint> rem_by_iteration(const Trace& trace, const Vector& reference) {
  std::vector<RemPoint> out;
  if (trace.samples.empty()) return out;
  Vector sum = Vector::Zero(reference.size());
  double next = 10.0;
  for (std::size_t i = 0; i < trace.samples.size(); ++i) {
    sum += trace.samples[i];
    const std::size_t n = i + 1;
    if (static_cast<double>(n) >= next || n == trace.samples.size()) {
      out.push_back({trace.wall_ms[i] / 1e3, trace.iteration[i], rem(sum / static_cast<double>(n), reference)});
      while (next <= static_cast<double>(n)) next *= 1.3;
    }
  }
  return out;
}

double rem_at(const std::vector<RemPoint>& curve, double time_s) {
  if (curve.empty()) return std::numeric_limits<double>::quiet_NaN();
  double value = curve.front().rem;
  for (const RemPoint& p : curve) {
    if (p.time_s > time_s) break;
    value = p.rem;
  }
  return value;
}

std::optional<double> time_to_threshold(const std::vector<RemPoint>& curve, double threshold) {
  for (const RemPoint& p : curve)
    if (p.rem <= threshold) return p.time_s;
  return std::nullopt;
}

Vector true_mean_gmm(const GaussianMixture& mixture) {
  Vector m = Vector::Zero(static_cast<Eigen::Index>(mixture.dim()));
  for (std::size_t k = 0; k < mixture.size(); ++k) m += mixture.weights()[k] * mixture.means()[k];
  return m;
}

std::vector<double> mode_occupancy(const std::vector<Vector>& samples, const ModeLibrary& library) {
  if (library.empty()) throw ConfigError("mode_occupancy: empty mode library");
  std::vector<double> counts(library.size(), 0.0);
  for (const Vector& x : samples) {
    std::size_t best = 0;
    double best_d = std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < library.size(); ++k) {
      const double d = library.mahalanobis2(k, x);
      if (d < best_d) {
        best_d = d;
        best = k;
      }
    }
    counts[best] += 1.0;
  }
  if (!samples.empty())
    for (double& c : counts) c /= static_cast<double>(samples.size());
  return counts;
}

std::vector<double> mode_occupancy(const std::vector<Vector>& samples, const std::vector<Vector>& locations) {
  if (locations.empty()) throw ConfigError("mode_occupancy: no modes");
  std::vector<double> counts(locations.size(), 0.0);
  for (const Vector& x : samples) {
    std::size_t best = 0;
    double best_d = std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < locations.size(); ++k) {
      const double d = (x - locations[k]).squaredNorm();
      if (d < best_d) {
        best_d = d;
        best = k;
      }
    }
    counts[best] += 1.0;
  }
  if (!samples.empty())
    for (double& c : counts) c /= static_cast<double>(samples.size());
  return counts;
}

ReferenceMean reference_mean_longrun(const TargetDensity& target, const ModeLibrary& library, std::uint64_t seed,
                                     std::size_t iterations_per_chain, const SamplerConfig& config,
                                     std::size_t n_chains) {
  if (library.empty()) throw ConfigError("reference_mean_longrun: empty mode library");
  if (n_chains < 2) throw ConfigError("reference_mean_longrun: need at least two chains");
  const auto start = std::chrono::steady_clock::now();
  ReferenceMean ref;
  ref.seed = seed;
  ref.iterations_per_chain = iterations_per_chain;
  ref.sampler = config;
  ChainOptions opt;
  opt.n_iter = iterations_per_chain;
  opt.thin = std::max<std::size_t>(1, iterations_per_chain);  // samples are not needed, only the sum
  for (std::size_t i = 0; i < n_chains; ++i) {
    const auto sampler = make_sampler(target, library, config);
    const Trace t = run_chain(*sampler, library[i % library.size()].location, opt, derive_seed(seed, i));
    ref.chain_means.push_back(t.mean());
  }
  const auto d = static_cast<Eigen::Index>(target.dim());
  ref.mean = Vector::Zero(d);
  for (const Vector& m : ref.chain_means) ref.mean += m;
  ref.mean /= static_cast<double>(n_chains);
  Vector var = Vector::Zero(d);
  for (const Vector& m : ref.chain_means) var += (m - ref.mean).cwiseAbs2();
  var /= static_cast<double>(n_chains - 1);
  ref.standard_error = (var / static_cast<double>(n_chains)).cwiseSqrt();
  ref.elapsed_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return ref;
}

}  // namespace whmc
