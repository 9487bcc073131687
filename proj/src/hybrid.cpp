#include "whmc/hybrid.hpp"

#include <cmath>

#include "whmc/errors.hpp"

namespace whmc {

void HybridConfig::validate() const {
  whmc.validate();
  if (whmc.variant != Variant::kWhmcAug) throw ConfigError("hybrid chain requires the whmc_aug sampler");
  if (whmc_per_cycle == 0 && independence_per_cycle == 0) throw ConfigError("hybrid cycle is empty");
  if (independence_per_cycle == 0) throw ConfigError("hybrid chain needs at least one independence step per cycle");
  if (fixed_log_c && !std::isfinite(*fixed_log_c)) throw ConfigError("hybrid.log_c must be finite");
}

RunningMoments::RunningMoments(std::size_t dim)
    : mean_(Vector::Zero(static_cast<Eigen::Index>(dim))),
      m2_(Matrix::Zero(static_cast<Eigen::Index>(dim), static_cast<Eigen::Index>(dim))) {}

void RunningMoments::add(const Vector& x) {
  ++n_;
  const Vector delta = x - mean_;
  mean_ += delta / static_cast<double>(n_);
  m2_ += delta * (x - mean_).transpose();
}

Matrix RunningMoments::covariance() const {
  if (n_ < 2) return Matrix::Identity(mean_.size(), mean_.size());
  return m2_ / static_cast<double>(n_ - 1);
}

HybridResult hybrid_chain(const TargetDensity& target, ModeLibrary library, const Vector& theta0,
                          const HybridConfig& config, const ChainOptions& options, std::uint64_t seed,
                          const RegenerationCallback& on_event) {
  config.validate();
  const std::size_t d = target.dim();
  const auto di = static_cast<Eigen::Index>(d);
  if (static_cast<std::size_t>(theta0.size()) != d) throw ConfigError("hybrid_chain: initial point has wrong dimension");

  Rng rng(seed);
  HybridResult out;
  out.visits.assign(library.size(), 0);
  WhmcAugSampler sampler(target, library, config.whmc);
  IndependenceKernel kernel = fit_independence_kernel(library, out.visits, target, config.fixed_log_c.value_or(0.0));
  Vector state = sampler.initialize(theta0, rng);
  TraceRecorder rec(theta0, d, options);
  RunningMoments moments(d);
  std::vector<double> log_weights;

  auto observe = [&](const Vector& s, bool accepted, bool jumped, bool regenerated) {
    rec.record(s, accepted, jumped, regenerated);
    const Vector theta = s.head(di);
    moments.add(theta);
    if (moments.count() > config.burn_in) {
      std::size_t best = library.size();
      double best_d = 9.0;
      for (std::size_t k = 0; k < library.size(); ++k) {
        const double m2 = library.mahalanobis2(k, theta);
        if (m2 <= best_d) {
          best_d = m2;
          best = k;
        }
      }
      if (best < library.size()) ++out.visits[best];
    }
  };

  while (rec.keep_going()) {
    for (std::size_t i = 0; i < config.whmc_per_cycle && rec.keep_going(); ++i) {
      const TransitionInfo info = sampler.transition(state, rng);
      observe(state, info.accepted, info.jumped, false);
    }
    for (std::size_t i = 0; i < config.independence_per_cycle && rec.keep_going(); ++i) {
      const IndependenceStep step = independence_step(state.head(di), target, kernel, rng, false);
      log_weights.push_back(step.log_weight);
      if (!step.regenerated) {
        state.head(di) = step.state;
        observe(state, step.accepted, false, false);
        continue;
      }
      RegenerationEvent ev;
      ev.probability = step.regeneration_probability;
      ev.discarded = step.state;
      ev.library_before = library.size();
      ev.log_c_before = kernel.log_c;
      if (config.search_modes) {
        Rng search_rng(derive_seed(seed, 0x5EA4C0000ULL + library.size() * 7919ULL + moments.count()));
        const ModeSearchReport report = search_new_modes(target, library, &kernel, moments.mean(),
                                                         moments.covariance(), config.search, search_rng);
        if (!report.new_modes.empty()) {
          LibraryUpdate up = update_library(library, report.new_modes);
          for (std::size_t k = library.size(); k < up.library.size(); ++k) ev.added.push_back(up.library[k].location);
          library = std::move(up.library);
          out.visits.resize(library.size(), 0);
          sampler.set_library(library);
        }
      }
      const double log_c = config.fixed_log_c.value_or(median_log_weight(log_weights));
      log_weights.clear();
      kernel = fit_independence_kernel(library, out.visits, target, log_c);
      const QDraw fresh = sample_from_Q(kernel, target, rng);
      state.head(di) = fresh.state;
      ev.fresh = fresh.state;
      ev.q_proposals = fresh.proposals;
      ev.library_after = library.size();
      ev.log_c_after = kernel.log_c;
      observe(state, true, false, true);
      ev.iteration = moments.count();
      if (on_event) on_event(ev);
      out.events.push_back(std::move(ev));
    }
  }
  out.trace = rec.finish();
  out.library = std::move(library);
  out.kernel = std::move(kernel);
  return out;
}

}  // namespace whmc
