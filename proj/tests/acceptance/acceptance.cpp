// Acceptance run: the ten end-to-end criteria, one PASS/FAIL line each.
//
//   whmc_acceptance [--only 1,5,8] [--cache-dir DIR] [--rem-budget S]
//                   [--sensor-budget S] [--sensor-reference-iterations N]
//
// Exit status is the number of failed criteria (capped at 125).

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <iostream>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "fixtures.hpp"
#include "stats.hpp"
#include "whmc/geometry.hpp"
#include "whmc/hybrid.hpp"
#include "whmc/integrators.hpp"
#include "whmc/metrics.hpp"
#include "whmc/modesearch.hpp"
#include "whmc/regeneration.hpp"
#include "whmc/samplers.hpp"
#include "whmc/targets.hpp"

using namespace whmc;
using namespace whmc::testing;
namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

struct Settings {
  fs::path cache_dir;
  double rem_budget_s = 120.0;
  double sensor_budget_s = 300.0;
  std::size_t sensor_reference_iterations = 500'000;
};

// Collects named checks; the criterion passes when all of them do.
class Verdict {
 public:
  void check(bool ok, const std::string& what) {
    if (!ok) {
      pass_ = false;
      failures_.push_back(what);
    }
  }
  void note(const std::string& s) { notes_.push_back(s); }
  bool pass() const { return pass_; }
  std::string summary() const {
    std::ostringstream os;
    for (std::size_t i = 0; i < notes_.size(); ++i) os << (i ? "; " : "") << notes_[i];
    if (!failures_.empty()) {
      os << " | failed:";
      for (const auto& f : failures_) os << ' ' << f << ';';
    }
    return os.str();
  }

 private:
  bool pass_ = true;
  std::vector<std::string> notes_;
  std::vector<std::string> failures_;
};

template <class... Args>
std::string fmt(Args&&... args) {
  std::ostringstream os;
  os << std::setprecision(4);
  (os << ... << args);
  return os.str();
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

SamplerConfig sampler_config(Variant v, double step, int n_leapfrog, double jitter = 0.0) {
  SamplerConfig c;
  c.variant = v;
  c.step_size = step;
  c.n_leapfrog = n_leapfrog;
  c.step_jitter = jitter;
  return c;
}

EnergyFunction energy_of(const PotentialEnergy& u) {
  return [&u](const Vector& x, Vector& g) { return u.value_and_gradient(x, g); };
}

Vector stack(const PhaseState& s) {
  Vector z(s.position.size() * 2);
  z << s.position, s.velocity;
  return z;
}

PhaseState unstack(const Vector& z) {
  const Eigen::Index d = z.size() / 2;
  return {z.head(d), z.tail(d)};
}

// ---------------------------------------------------------------------------
// 1. Two-mode contrast on the Welling posterior.

Verdict two_mode_contrast(const Settings&) {
  Verdict v;
  const auto t0 = std::chrono::steady_clock::now();
  const WellingTarget target = generate_welling_data(kWellingDataSeed);
  const ModeLibrary modes = welling_library(target);
  ChainOptions opt;
  opt.n_iter = 5000;
  const std::size_t burn_in = 500;

  HmcSampler hmc(target, sampler_config(Variant::kHmc, 0.02, 20));
  const auto occ_h = mode_occupancy(run_chain(hmc, modes[0].location, opt, 101).samples, modes);

  SamplerConfig c = sampler_config(Variant::kWhmcAug, 0.02, 20);
  c.epsilon = 0.03;
  c.influence = 0.3;
  c.world_offset = 1.0;
  WhmcAugSampler aug(target, modes, c);
  const Trace tw = run_chain(aug, modes[0].location, opt, 102);
  const std::vector<Vector> kept(tw.samples.begin() + static_cast<std::ptrdiff_t>(burn_in), tw.samples.end());
  const auto occ_w = mode_occupancy(kept, modes);
  const double elapsed = seconds_since(t0);

  v.note(fmt("hmc occupancy ", occ_h[0], "/", occ_h[1]));
  v.note(fmt("whmc_aug occupancy ", occ_w[0], "/", occ_w[1], " (jumps ", tw.n_jumps, ")"));
  v.note(fmt(elapsed, " s"));
  v.check(std::max(occ_h[0], occ_h[1]) >= 0.99, "hmc single-mode occupancy >= 0.99");
  v.check(occ_w[0] >= 0.10 && occ_w[1] >= 0.10, "whmc_aug each mode >= 0.10");
  v.check(elapsed <= 120.0, "runtime <= 120 s");
  return v;
}

// ---------------------------------------------------------------------------
// 2. Stationarity on the 1D bimodal mixture.

Verdict stationarity(const Settings&) {
  Verdict v;
  const auto t0 = std::chrono::steady_clock::now();
  const GaussianMixtureTarget target(bimodal_1d());
  const ModeLibrary lib = library_of(target.mixture());
  WhmcAugSampler s(target, lib, sampler_config(Variant::kWhmcAug, 0.15, 10));
  ChainOptions opt;
  opt.n_iter = 50000;
  const Trace t = run_chain(s, lib[0].location, opt, 201);

  std::vector<double> xs;
  xs.reserve(t.samples.size());
  double n_plus = 0, s_plus = 0, s_minus = 0;
  for (const Vector& x : t.samples) {
    xs.push_back(x[0]);
    if (x[0] > 0) {
      n_plus += 1;
      s_plus += x[0];
    } else {
      s_minus += x[0];
    }
  }
  const double n = static_cast<double>(xs.size());
  const double occ = n_plus / n;
  const double mean_plus = s_plus / n_plus;
  const double mean_minus = s_minus / (n - n_plus);
  // KS assumes independent draws: thin by the integrated autocorrelation time.
  const std::size_t stride = independence_stride({xs});
  const double p = ks_pvalue(every_kth(xs, stride),
                             [](double x) { return 0.5 * normal_cdf(x + 5.0) + 0.5 * normal_cdf(x - 5.0); });
  const double elapsed = seconds_since(t0);

  v.note(fmt("occupancy(+) ", occ));
  v.note(fmt("mode means ", mean_minus, ", ", mean_plus));
  v.note(fmt("KS p ", p, " at stride ", stride));
  v.note(fmt(elapsed, " s"));
  v.check(std::abs(occ - 0.5) <= 0.05, "occupancy 0.50 +- 0.05");
  v.check(std::abs(mean_plus - 5.0) <= 0.1 && std::abs(mean_minus + 5.0) <= 0.1, "per-mode means within 0.1");
  v.check(p > 0.01, "KS p > 0.01");
  v.check(elapsed <= 180.0, "runtime <= 180 s");
  return v;
}

// ---------------------------------------------------------------------------
// 3. REM decay on a K = 10, D = 10 mixture.

// Runs the chains concurrently, each under the same wall-clock budget, so the
// whole run fits the desk budget regardless of core count.
std::vector<Trace> run_parallel(const TargetDensity& target, const ModeLibrary& lib, const SamplerConfig& c,
                                const std::vector<Vector>& starts, double budget_s, std::uint64_t seed) {
  std::vector<Trace> out(starts.size());
  {
    std::vector<std::jthread> pool;
    for (std::size_t i = 0; i < starts.size(); ++i)
      pool.emplace_back([&, i] {
        const auto s = make_sampler(target, lib, c);
        ChainOptions opt;
        opt.n_iter = std::numeric_limits<std::size_t>::max();
        opt.wall_budget_s = budget_s;
        opt.thin = 100;
        out[i] = run_chain(*s, starts[i], opt, derive_seed(seed, i));
      });
  }
  return out;
}

Verdict rem_decay(const Settings& settings) {
  Verdict v;
  const GaussianMixtureTarget target(generate_gmm_instance(10, 10, 1, 20.0));
  const ModeLibrary lib = library_of(target.mixture());
  const Vector ref = true_mean_gmm(target.mixture());
  std::vector<Vector> starts;
  for (std::size_t i = 0; i < 4; ++i) starts.push_back(lib[i].location);

  double mean_rem[2] = {0.0, 0.0};
  const Variant variants[2] = {Variant::kHmc, Variant::kWhmcAug};
  for (int k = 0; k < 2; ++k) {
    const auto traces =
        run_parallel(target, lib, sampler_config(variants[k], 0.3, 20, 0.2), starts, settings.rem_budget_s, 301);
    std::size_t iters = 0;
    for (const Trace& t : traces) {
      mean_rem[k] += rem(t.mean(), ref) / static_cast<double>(traces.size());
      iters += t.n_iterations;
    }
    v.note(fmt(variant_name(variants[k]), " mean REM ", mean_rem[k], " (", iters, " iterations)"));
  }
  v.note(fmt("budget ", settings.rem_budget_s, " s"));
  v.check(mean_rem[1] <= 0.10, "whmc_aug mean REM <= 0.10");
  v.check(mean_rem[1] < mean_rem[0], "whmc_aug REM < hmc REM");
  return v;
}

// ---------------------------------------------------------------------------
// 4 and 5: generalized leapfrog on a five-dimensional two-mode target.

struct VfRun {
  PhaseState state;
  double log_jacobian = 0.0;
  bool converged = true;
};

VfRun run_vf(PhaseState s, const EnergyFunction& energy, const VectorFieldContext& ctx, double e, int n) {
  Vector grad;
  energy(s.position, grad);
  VfRun out;
  for (int l = 0; l < n; ++l) {
    const VfStepResult r = generalized_leapfrog_vf(s, grad, energy, ctx, e);
    out.log_jacobian += r.log_jacobian;
    out.converged = out.converged && r.converged;
  }
  out.state = std::move(s);
  return out;
}

struct VfSetup {
  GaussianMixtureTarget target;
  PotentialEnergy energy;
  VectorFieldContext ctx;

  VfSetup()
      : target([] {
          Vector a = Vector::Zero(5), b = Vector::Zero(5);
          b[0] = 3.0;
          b[1] = 1.0;
          return GaussianMixture({0.5, 0.5}, {a, b}, {Matrix::Identity(5, 5), Matrix::Identity(5, 5)});
        }()),
        energy(target) {
    ctx = make_vector_field(build_network(library_of(target.mixture())), FixedPointOptions{200, 1e-12});
  }

  // Along the wormhole axis, past both ends, jittered off it.
  PhaseState random_state(Rng& rng) const {
    const Vector& a = target.mixture().means()[0];
    const Vector& b = target.mixture().means()[1];
    const double t = std::uniform_real_distribution<double>(-0.4, 1.4)(rng);
    return {(1 - t) * a + t * b + random_normal(rng, 5, 0.3), random_normal(rng, 5)};
  }
};

Verdict jacobian(const Settings&) {
  Verdict v;
  const VfSetup fx;
  const auto energy = energy_of(fx.energy);
  const double e = 0.05;
  const int n = 20;
  Rng rng(401);
  double worst = 0.0;
  int tested = 0, drawn = 0;
  while (tested < 20) {
    const PhaseState s = fx.random_state(rng);
    ++drawn;
    const VfRun r = run_vf(s, energy, fx.ctx, e, n);
    // A relative comparison needs a volume change to compare against.
    if (std::abs(r.log_jacobian) < 1e-3) continue;
    ++tested;
    v.check(r.converged, "fixed point converged");
    const Matrix j = fd_jacobian([&](const Vector& z) { return stack(run_vf(unstack(z), energy, fx.ctx, e, n).state); },
                                 stack(s), 1e-5);
    const double fd = std::log(std::abs(j.determinant()));
    worst = std::max(worst, std::abs(r.log_jacobian - fd) / std::abs(fd));
  }
  v.note(fmt("max relative error ", worst, " over ", tested, " states (", drawn, " drawn)"));
  v.check(worst <= 1e-3, "relative error <= 1e-3");
  return v;
}

struct AugSetup {
  GaussianMixtureTarget target;
  ModeLibrary library;
  PotentialEnergy energy;

  AugSetup()
      : target([] {
          Vector a(2), b(2);
          a << -4.0, 0.0;
          b << 4.0, 1.0;
          Matrix pa(2, 2), pb(2, 2);
          pa << 1.0, 0.2, 0.2, 0.8;
          pb << 2.0, -0.5, -0.5, 1.5;
          return GaussianMixture({0.5, 0.5}, {a, b}, {pa, pb});
        }()),
        library(library_of(target.mixture())),
        energy(target, true) {}

  AugmentedGeometry geometry() const { return {&library, 1.0, 0.3}; }
};

Verdict reversibility(const Settings&) {
  Verdict v;
  {
    const VfSetup fx;
    const auto energy = energy_of(fx.energy);
    Rng rng(501);
    double worst = 0.0;
    for (int trial = 0; trial < 100; ++trial) {
      const PhaseState s = fx.random_state(rng);
      const VfRun r = run_vf(s, energy, fx.ctx, 0.1, 20);
      PhaseState back = r.state;
      back.velocity = -back.velocity;
      const VfRun rb = run_vf(back, energy, fx.ctx, 0.1, 20);
      v.check(r.converged && rb.converged, "fixed point converged");
      worst = std::max({worst, (rb.state.position - s.position).lpNorm<Eigen::Infinity>(),
                        (rb.state.velocity + s.velocity).lpNorm<Eigen::Infinity>()});
    }
    v.note(fmt("generalized leapfrog max return error ", worst));
    v.check(worst <= 1e-6, "generalized leapfrog returns within 1e-6");
  }
  {
    // The forward pass draws its branch from the rng; the reverse replays the
    // mirrored branch and must land back on the start.
    const AugSetup fx;
    const auto energy = energy_of(fx.energy);
    Rng rng(502);
    AugTrajectoryOptions opt;
    opt.step_size = 0.1;
    opt.n_steps = 20;
    double worst = 0.0, worst_logp = 0.0;
    int jumps = 0;
    for (int trial = 0; trial < 100; ++trial) {
      const std::size_t near = static_cast<std::size_t>(trial % 2);
      Vector x(3);
      x << fx.library[near].location + random_normal(rng, 2, 0.5), (uniform01(rng) < 0.5 ? 1.0 : -1.0);
      const PhaseState start{x, random_normal(rng, 3)};
      Vector g;
      const double u0 = energy(x, g);
      opt.branch_step = static_cast<int>(uniform01(rng) * opt.n_steps);
      const BranchChooser draw = [&rng](int, const BranchProbabilities& p) { return sample_branch(p, uniform01(rng)); };
      const AugTrajectory fwd = stochastic_leapfrog_aug(start, g, u0, energy, fx.geometry(), opt, draw);

      AugTrajectoryOptions ropt = opt;
      ropt.branch_step = opt.n_steps - 1 - opt.branch_step;
      std::optional<std::size_t> replay;
      if (fwd.jump_step) {
        ++jumps;
        replay = fwd.jump_source;
      }
      const BranchChooser mirrored = [&](int, const BranchProbabilities&) { return replay; };
      PhaseState back = fwd.final;
      back.velocity = -back.velocity;
      const AugTrajectory rev = stochastic_leapfrog_aug(back, fwd.gradient, fwd.potential, energy, fx.geometry(), ropt,
                                                        mirrored);
      v.check(rev.jump_step.has_value() == fwd.jump_step.has_value(), "replay takes the mirrored branch");
      worst = std::max({worst, (rev.final.position - start.position).lpNorm<Eigen::Infinity>(),
                        (rev.final.velocity + start.velocity).lpNorm<Eigen::Infinity>()});
      const double rev_logp = reverse_branch_log_probability(fwd, fx.geometry());
      if (std::isfinite(rev_logp)) worst_logp = std::max(worst_logp, std::abs(rev.log_forward_branch - rev_logp));
    }
    v.note(fmt("augmented replay max return error ", worst, " (", jumps, " jumps in 100)"));
    v.check(worst <= 1e-6, "augmented replay returns within 1e-6");
    v.check(worst_logp <= 1e-8, "replayed branch probability matches");
    v.check(jumps >= 10, "replay exercised jumping trajectories");
  }
  return v;
}

// ---------------------------------------------------------------------------
// 6. Regeneration validity.

Verdict regeneration(const Settings&) {
  Verdict v;
  {
    const GaussianMixtureTarget t(four_mode_benchmark());
    Rng rng(601);
    double worst = std::numeric_limits<double>::infinity();
    for (int i = 0; i < 1000; ++i) {
      const IndependenceKernel k = fit_independence_kernel(library_of(t.mixture(), {0, 1}),
                                                           {static_cast<std::size_t>(i % 7), 3}, t,
                                                           4.0 * uniform01(rng) - 2.0);
      const Vector a = random_normal(rng, 2, 4.0), b = random_normal(rng, 2, 4.0);
      const TSQ x = compute_T_S_Q(k, t, a, b);
      worst = std::min(worst, x.log_t - (x.log_s + x.log_q));
    }
    v.note(fmt("min log T - log SQ ", worst));
    v.check(worst >= -1e-12, "T >= S Q on 1000 pairs");
  }
  {
    const GaussianMixtureTarget t(single_gaussian(Vector::Constant(2, 1.0), Matrix::Identity(2, 2)));
    HybridConfig c;
    c.whmc = sampler_config(Variant::kWhmcAug, 0.2, 10);
    c.search_modes = false;
    ChainOptions opt;
    opt.n_iter = 20000;
    const HybridResult r = hybrid_chain(t, library_of(t.mixture()), Vector::Constant(2, 1.0), c, opt, 602);
    const double steps = static_cast<double>(opt.n_iter / (c.whmc_per_cycle + c.independence_per_cycle));
    const double rate = static_cast<double>(r.events.size()) / steps;
    v.note(fmt("perfect-proposal regeneration rate ", rate));
    v.check(std::abs(rate - 1.0) <= 0.01, "regeneration rate 1.0 +- 0.01");
  }
  {
    // pi = 0.6 N(0, 1) + 0.4 N(2.5, 0.6^2) against q = N(0, 1) with c = e^0.8.
    const GaussianMixtureTarget t(GaussianMixture({0.6, 0.4}, {Vector::Constant(1, 0.0), Vector::Constant(1, 2.5)},
                                                  {Matrix::Identity(1, 1), Matrix::Constant(1, 1, 1.0 / 0.36)}));
    const IndependenceKernel k =
        fit_independence_kernel(ModeLibrary({Mode{Vector::Zero(1), Matrix::Identity(1, 1)}}), {}, t, 0.8);
    const auto unnormalized = [&](double x) {
      const Vector p = Vector::Constant(1, x);
      return std::exp(k.log_q(p) + std::min(0.0, k.log_weight(t.log_density(p), p) - k.log_c));
    };
    std::vector<double> edges{-1e9};
    for (double e = -3.0; e <= 3.5 + 1e-9; e += 0.25) edges.push_back(e);
    edges.push_back(1e9);
    const std::size_t bins = edges.size() - 1;
    const auto bin_of = [&](double x) {
      return static_cast<std::size_t>(std::upper_bound(edges.begin(), edges.end(), x) - edges.begin()) - 1;
    };
    std::vector<double> expected(bins, 0.0);
    const double h = 1e-3;
    for (double x = -12.0 + 0.5 * h; x < 12.0; x += h) expected[bin_of(x)] += unnormalized(x) * h;
    double total = 0.0;
    for (double e : expected) total += e;
    const int n = 20000;
    for (double& e : expected) e *= n / total;
    std::vector<double> observed(bins, 0.0);
    Rng rng(603);
    for (int i = 0; i < n; ++i) observed[bin_of(sample_from_Q(k, t, rng).state[0])] += 1.0;
    const double p = chi2_sf(chi2_statistic(observed, expected), static_cast<double>(bins - 1));
    v.note(fmt("Q histogram chi2 p ", p));
    v.check(p > 0.01, "Q chi2 p > 0.01");
  }
  return v;
}

// ---------------------------------------------------------------------------
// 7. Mode discovery on the four-mode benchmark.

Verdict mode_discovery(const Settings&) {
  Verdict v;
  const GaussianMixtureTarget t(four_mode_benchmark());
  const ModeLibrary known = library_of(t.mixture(), {0, 1});
  {
    HybridConfig c;
    c.whmc = sampler_config(Variant::kWhmcAug, 0.2, 10);
    ChainOptions opt;
    opt.n_iter = 4000;
    const HybridResult r = hybrid_chain(t, known, known[0].location, c, opt, 701);
    std::vector<Vector> found;
    std::optional<std::size_t> at;
    const auto covered = [&](std::size_t k) {
      return std::any_of(found.begin(), found.end(),
                         [&](const Vector& m) { return (m - t.mixture().means()[k]).norm() <= 0.2; });
    };
    for (std::size_t i = 0; i < r.events.size() && !at; ++i) {
      for (const Vector& m : r.events[i].added) found.push_back(m);
      if (covered(2) && covered(3)) at = i + 1;
    }
    v.note(at ? fmt("both held-out modes found at regeneration ", *at) : fmt("held-out modes not both found in ",
                                                                              r.events.size(), " regenerations"));
    v.check(at.has_value() && *at <= 10, "held-out modes within 10 regenerations");
  }
  {
    const IndependenceKernel kernel = fit_independence_kernel(known, {}, t);
    ModeSearchOptions opt;
    opt.temperature = 1.05;
    Rng rng(702);
    const std::vector<Vector> starts = draw_starts(Vector::Zero(2), Matrix::Identity(2, 2) * 9.0, 1.0, 40, rng);
    const double plain = search_from_starts(t, known, nullptr, starts, opt).known_basin_fraction();
    const double resid = search_from_starts(t, known, &kernel, starts, opt).known_basin_fraction();
    v.note(fmt("known-basin fraction plain ", plain, ", residual ", resid));
    v.check(resid < plain, "residual search fraction < plain");
  }
  return v;
}

// ---------------------------------------------------------------------------
// 8. Sensor network localization.

constexpr std::uint64_t kSensorSeed = 1;

// Modes from BFGS on -log pi at uniform starts in the unit square, kept when
// within 10 nats of the best and sorted by density.
ModeLibrary sensor_library(const SensorNetworkTarget& target) {
  Rng rng(801);
  std::vector<Vector> starts;
  for (int i = 0; i < 200; ++i) {
    Vector x(static_cast<Eigen::Index>(target.dim()));
    for (Eigen::Index j = 0; j < x.size(); ++j) x[j] = uniform01(rng);
    starts.push_back(x);
  }
  const ModeSearchReport r = search_from_starts(target, ModeLibrary{}, nullptr, starts, {});
  double best = -std::numeric_limits<double>::infinity();
  for (const Mode& m : r.new_modes) best = std::max(best, target.log_density(m.location));
  std::vector<Mode> kept;
  for (const Mode& m : r.new_modes)
    if (target.log_density(m.location) >= best - 10.0) kept.push_back(m);
  std::sort(kept.begin(), kept.end(), [&](const Mode& a, const Mode& b) {
    return target.log_density(a.location) > target.log_density(b.location);
  });
  return ModeLibrary(std::move(kept));
}

SamplerConfig sensor_sampler(Variant v) { return sampler_config(v, 0.005, 30, 0.2); }

struct SensorReference {
  Vector mean;
  std::vector<double> occupancy;
};

// Eight long WHMC chains, chain i started at mode i mod K. Cached by key.
SensorReference sensor_reference(const SensorNetworkTarget& target, const ModeLibrary& lib, const Settings& settings) {
  const std::size_t n_chains = 8;
  const std::string key = fmt("sensor_reference_seed", kSensorSeed, "_k", lib.size(), "_n",
                              settings.sensor_reference_iterations, ".json");
  const fs::path cached = settings.cache_dir / key;
  if (!settings.cache_dir.empty() && fs::exists(cached)) {
    const json j = json::parse(std::ifstream(cached));
    SensorReference r;
    const auto mean = j.at("mean").get<std::vector<double>>();
    r.mean = Eigen::Map<const Vector>(mean.data(), static_cast<Eigen::Index>(mean.size()));
    r.occupancy = j.at("occupancy").get<std::vector<double>>();
    return r;
  }
  Vector sum = Vector::Zero(static_cast<Eigen::Index>(target.dim()));
  std::vector<Vector> samples;
  for (std::size_t i = 0; i < n_chains; ++i) {
    const auto s = make_sampler(target, lib, sensor_sampler(Variant::kWhmcAug));
    ChainOptions opt;
    opt.n_iter = settings.sensor_reference_iterations;
    opt.thin = 50;
    const Trace t = run_chain(*s, lib[i % lib.size()].location, opt, derive_seed(803, i));
    sum += t.mean();
    samples.insert(samples.end(), t.samples.begin(), t.samples.end());
  }
  SensorReference r{sum / static_cast<double>(n_chains), mode_occupancy(samples, lib)};
  if (!settings.cache_dir.empty()) {
    fs::create_directories(settings.cache_dir);
    std::ofstream(cached) << json{{"mean", std::vector<double>(r.mean.data(), r.mean.data() + r.mean.size())},
                                  {"occupancy", r.occupancy}}
                                 .dump(2);
  }
  return r;
}

Verdict sensor_network(const Settings& settings) {
  Verdict v;
  const SensorNetworkTarget target(generate_sensor_data(kSensorSeed).observations);
  const ModeLibrary lib = sensor_library(target);
  const SensorReference ref = sensor_reference(target, lib, settings);
  std::vector<std::size_t> identified;
  for (std::size_t k = 0; k < lib.size(); ++k)
    if (ref.occupancy[k] >= 0.01) identified.push_back(k);
  v.note(fmt(lib.size(), " library modes, ", identified.size(), " identified by the reference run"));

  double rems[2];
  std::vector<double> occ_w;
  const Variant variants[2] = {Variant::kHmc, Variant::kWhmcAug};
  for (int k = 0; k < 2; ++k) {
    const auto s = make_sampler(target, lib, sensor_sampler(variants[k]));
    ChainOptions opt;
    opt.n_iter = std::numeric_limits<std::size_t>::max();
    opt.wall_budget_s = settings.sensor_budget_s;
    opt.thin = 10;
    const Trace t = run_chain(*s, lib[0].location, opt, derive_seed(802, static_cast<std::uint64_t>(k)));
    rems[k] = rem(t.mean(), ref.mean);
    if (variants[k] == Variant::kWhmcAug) occ_w = mode_occupancy(t.samples, lib);
    v.note(fmt(variant_name(variants[k]), " REM ", rems[k], " (", t.n_iterations, " iterations)"));
  }
  v.note(fmt("budget ", settings.sensor_budget_s, " s"));
  v.check(rems[1] <= 0.5 * rems[0], "whmc_aug REM <= 0.5 x hmc REM");
  for (std::size_t k : identified) v.check(occ_w[k] > 0.0, fmt("whmc_aug occupies mode ", k));
  return v;
}

// ---------------------------------------------------------------------------
// 9 and 10: geometry.

Verdict arclength(const Settings&) {
  Verdict v;
  Rng rng(901);
  double worst = 0.0;
  for (int i = 0; i < 20; ++i) {
    const auto d = static_cast<Eigen::Index>(2 + i % 5);
    const Vector a = random_normal(rng, d, 3.0), b = random_normal(rng, d, 3.0);
    const Wormhole w = make_wormhole(a, b);
    const double eps = 0.03;
    const auto gw = [&](const Vector&) { return wormhole_metric(w.direction, eps); };
    const double len = numeric_arclength(straight_curve(a, b, 10000), gw);
    worst = std::max(worst, std::abs(len - std::sqrt(eps) * (b - a).norm()));
  }
  v.note(fmt("max |length - sqrt(eps) |v||  ", worst, " over 20 segments"));
  v.check(worst <= 1e-6, "arclength within 1e-6");
  return v;
}

Verdict mst_oracle(const Settings&) {
  Verdict v;
  Rng rng(1001);
  double worst = 0.0;
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t k = 2 + static_cast<std::size_t>(trial % 6);
    std::vector<Vector> pts;
    for (std::size_t i = 0; i < k; ++i) pts.push_back(random_normal(rng, 3, 5.0));
    const auto edges = mst_network(pts);
    v.check(edges.size() == k - 1, "K - 1 edges");
    const double brute = brute_force_mst_weight(pts);
    worst = std::max(worst, std::abs(network_weight(pts, edges) - brute) / brute);
  }
  v.note(fmt("max relative weight difference ", worst, " over 50 libraries"));
  v.check(worst <= 1e-12, "network weight equals brute-force minimum");
  return v;
}

struct Criterion {
  int id;
  const char* name;
  std::function<Verdict(const Settings&)> run;
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Runs the acceptance criteria"};
  Settings settings;
  std::vector<int> only;
  std::string cache;
  app.add_option("--only", only, "criteria to run (default all)")->delimiter(',');
  app.add_option("--cache-dir", cache, "where long reference runs are cached");
  app.add_option("--rem-budget", settings.rem_budget_s, "wall-clock budget of criterion 3, seconds");
  app.add_option("--sensor-budget", settings.sensor_budget_s, "wall-clock budget per chain of criterion 8, seconds");
  app.add_option("--sensor-reference-iterations", settings.sensor_reference_iterations,
                 "iterations per reference chain of criterion 8");
  CLI11_PARSE(app, argc, argv);
  settings.cache_dir = cache;

  const std::vector<Criterion> criteria{
      {1, "two-mode contrast", two_mode_contrast},
      {2, "stationarity", stationarity},
      {3, "REM decay", rem_decay},
      {4, "Jacobian", jacobian},
      {5, "reversibility", reversibility},
      {6, "regeneration validity", regeneration},
      {7, "mode discovery", mode_discovery},
      {8, "sensor network", sensor_network},
      {9, "arclength", arclength},
      {10, "MST oracle", mst_oracle},
  };
  const std::set<int> selected(only.begin(), only.end());
  int failed = 0;
  for (const Criterion& c : criteria) {
    if (!selected.empty() && !selected.count(c.id)) continue;
    const auto t0 = std::chrono::steady_clock::now();
    Verdict v;
    try {
      v = c.run(settings);
    } catch (const std::exception& e) {
      v.check(false, std::string("exception: ") + e.what());
    }
    failed += v.pass() ? 0 : 1;
    std::cout << (v.pass() ? "PASS" : "FAIL") << "  [" << c.id << "] " << c.name << ": " << v.summary() << " ["
              << std::fixed << std::setprecision(1) << seconds_since(t0) << " s]" << std::defaultfloat << std::endl;
  }
  return std::min(failed, 125);
}
