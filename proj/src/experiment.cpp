#include "whmc/experiment.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <sstream>

#include "whmc/errors.hpp"
#include "whmc/hybrid.hpp"
#include "whmc/metrics.hpp"
#include "whmc/modesearch.hpp"
#include "whmc/regeneration.hpp"
#include "whmc/rng.hpp"
#include "whmc/samplers.hpp"
#include "whmc/simd/kernels.hpp"

namespace whmc::experiment {
namespace {

using io::get_or;
using io::require;

fs::path resolve(const fs::path& base, const std::string& p) {
  const fs::path path(p);
  return fs::absolute(path.is_absolute() ? path : base / path).lexically_normal();
}

std::string path_key(const json& j, const std::string& key, const std::string& ctx) {
  const json& v = require(j, key, ctx);
  if (!v.is_string()) throw ConfigError("config key '" + io::key_path(ctx, key) + "' must be a path string");
  return v.get<std::string>();
}

void refuse_existing(const std::vector<fs::path>& paths, bool force) {
  if (force) return;
  for (const fs::path& p : paths)
    if (fs::exists(p)) throw ConfigError("refusing to overwrite existing file " + p.string() + " (use --force)");
}

// --- generate ---

json generate_one(const json& item, const fs::path& base, bool force, std::vector<fs::path>& written) {
  const std::string kind = require(item, "kind", "instance").get<std::string>();
  const auto seed = require(item, "seed", "instance").get<std::uint64_t>();
  const fs::path out = resolve(base, path_key(item, "output", "instance"));
  json summary{{"kind", kind}, {"seed", seed}, {"output", out.string()}};
  if (kind == "gmm") {
    const auto k = require(item, "K", "instance").get<std::size_t>();
    const auto d = require(item, "D", "instance").get<std::size_t>();
    const double spacing = get_or<double>(item, "spacing", 20.0, "instance");
    const GaussianMixture g = generate_gmm_instance(k, d, seed, spacing);
    std::vector<fs::path> targets{out};
    std::optional<fs::path> lib_out;
    if (item.contains("library_output")) {
      lib_out = resolve(base, path_key(item, "library_output", "instance"));
      targets.push_back(*lib_out);
    }
    refuse_existing(targets, force);
    io::write_json(out, io::gmm_to_json(g, seed, {{"K", k}, {"D", d}, {"spacing", spacing}}), force);
    written.push_back(out);
    summary["mean_pairwise_distance"] = mean_pairwise_distance(g.means());
    if (lib_out) {
      io::write_json(*lib_out, io::library_to_json(io::library_from_mixture(g)), force);
      written.push_back(*lib_out);
      summary["library_output"] = lib_out->string();
    }
  } else if (kind == "sensor") {
    refuse_existing({out}, force);
    const SensorInstance inst = generate_sensor_data(seed, get_or<std::size_t>(item, "n_sensors", 8, "instance"),
                                                     get_or<double>(item, "radius", 0.3, "instance"),
                                                     get_or<double>(item, "noise_sd", 0.02, "instance"));
    io::write_json(out, io::sensor_to_json(inst, seed), force);
    written.push_back(out);
  } else if (kind == "welling") {
    refuse_existing({out}, force);
    WellingParams p;
    p.theta1 = get_or<double>(item, "theta1", p.theta1, "instance");
    p.theta2 = get_or<double>(item, "theta2", p.theta2, "instance");
    p.prior_var1 = get_or<double>(item, "prior_var1", p.prior_var1, "instance");
    p.prior_var2 = get_or<double>(item, "prior_var2", p.prior_var2, "instance");
    p.obs_var = get_or<double>(item, "obs_var", p.obs_var, "instance");
    p.n = get_or<std::size_t>(item, "n", p.n, "instance");
    io::write_json(out, io::welling_to_json(generate_welling_data(seed, p), seed, p), force);
    written.push_back(out);
  } else {
    throw ConfigError("instance.kind must be one of gmm, sensor, welling");
  }
  return summary;
}

// --- run ---

struct RunInputs {
  io::LoadedTarget target;
  fs::path target_path;
  ModeLibrary library;
  std::optional<fs::path> library_path;
};

ModeLibrary load_library_spec(const json& config, const fs::path& base, const io::LoadedTarget& target,
                              std::optional<fs::path>& path_out) {
  if (!config.contains("library") || config.at("library").is_null()) return ModeLibrary{};
  const std::string spec = config.at("library").get<std::string>();
  if (spec == "from_instance") {
    if (!target.mixture) throw ConfigError("config key 'library': from_instance needs a gmm instance");
    return io::library_from_mixture(*target.mixture);
  }
  path_out = resolve(base, spec);
  return io::library_from_json(io::load_json(*path_out));
}

std::vector<Vector> initial_points(const json& config, const ModeLibrary& library, std::size_t n_chains,
                                   std::size_t dim) {
  std::vector<Vector> out;
  if (!config.contains("initial") || config.at("initial") == "modes") {
    if (library.empty()) throw ConfigError("missing required config key 'initial' (no mode library to start from)");
    for (std::size_t i = 0; i < n_chains; ++i) out.push_back(library[i % library.size()].location);
    return out;
  }
  const json& init = config.at("initial");
  if (init.is_array() && !init.empty() && init.front().is_array()) {
    if (init.size() != n_chains) throw ConfigError("config key 'initial' must list one point per chain");
    for (const json& p : init) out.push_back(io::vector_from_json(p, "initial"));
  } else {
    const Vector p = io::vector_from_json(init, "initial");
    out.assign(n_chains, p);
  }
  for (const Vector& p : out)
    if (static_cast<std::size_t>(p.size()) != dim) throw ConfigError("config key 'initial' has the wrong dimension");
  return out;
}

std::optional<Vector> reference_spec(const json& config, const fs::path& base, const io::LoadedTarget& target,
                                     const ModeLibrary& library, bool force, json& provenance) {
  if (!config.contains("reference") || config.at("reference").is_null()) return std::nullopt;
  const json& r = config.at("reference");
  if (r.is_string()) {
    if (r.get<std::string>() == "true_mean") {
      if (!target.mixture) throw ConfigError("config key 'reference': true_mean needs a gmm instance");
      provenance = {{"source", "true_mean"}};
      return true_mean_gmm(*target.mixture);
    }
    const fs::path p = resolve(base, r.get<std::string>());
    provenance = {{"source", p.string()}, {"hash", io::file_hash(p)}};
    return load_reference(p);
  }
  const fs::path p = resolve(base, path_key(r, "path", "reference"));
  if (!fs::exists(p)) {
    const json& lr = require(r, "longrun", "reference");
    if (library.empty()) throw ConfigError("config key 'reference.longrun' needs a mode library");
    const SamplerConfig sc = io::sampler_config_from_json(require(lr, "sampler", "reference.longrun"));
    const ReferenceMean ref = reference_mean_longrun(
        *target.target, library, require(lr, "seed", "reference.longrun").get<std::uint64_t>(),
        require(lr, "iterations", "reference.longrun").get<std::size_t>(), sc,
        get_or<std::size_t>(lr, "n_chains", 8, "reference.longrun"));
    io::write_json(p, io::reference_to_json(ref), force);
  }
  provenance = {{"source", p.string()}, {"hash", io::file_hash(p)}};
  return load_reference(p);
}

std::string rem_csv(const std::vector<RemPoint>& curve) {
  std::ostringstream os;
  os << std::setprecision(17) << "time_s,iterations,rem\n";
  for (const RemPoint& p : curve) os << p.time_s << ',' << p.iterations << ',' << p.rem << '\n';
  return os.str();
}

std::string rem_jsonl(const std::vector<RemPoint>& curve, std::size_t chain, const char* axis) {
  std::string out;
  for (const RemPoint& p : curve)
    out += json{{"chain", chain}, {"axis", axis}, {"time_s", p.time_s}, {"iterations", p.iterations}, {"rem", p.rem}}.dump() + "\n";
  return out;
}

json absolutize(json config, const fs::path& base) {
  for (const char* key : {"target", "output_dir"})
    if (config.contains(key) && config.at(key).is_string()) config[key] = resolve(base, config[key].get<std::string>()).string();
  if (config.contains("library") && config.at("library").is_string() && config.at("library") != "from_instance")
    config["library"] = resolve(base, config["library"].get<std::string>()).string();
  if (config.contains("reference")) {
    json& r = config["reference"];
    if (r.is_string() && r != "true_mean") r = resolve(base, r.get<std::string>()).string();
    if (r.is_object() && r.contains("path") && r.at("path").is_string()) r["path"] = resolve(base, r["path"].get<std::string>()).string();
  }
  return config;
}

}  // namespace

Vector load_reference(const fs::path& path) {
  const json j = io::load_json(path);
  if (j.contains("kind") && j.at("kind") == "gmm") return true_mean_gmm(*io::target_from_json(j).mixture);
  return io::reference_from_json(j);
}

json cmd_generate(const json& spec, const fs::path& base_dir, bool force) {
  std::vector<json> items;
  if (spec.contains("instances")) {
    for (const json& item : require(spec, "instances")) items.push_back(item);
  } else {
    items.push_back(spec);
  }
  // Fail before writing anything if an output already exists.
  if (!force) {
    for (const json& item : items) {
      refuse_existing({resolve(base_dir, path_key(item, "output", "instance"))}, false);
      if (item.contains("library_output")) refuse_existing({resolve(base_dir, path_key(item, "library_output", "instance"))}, false);
    }
  }
  std::vector<fs::path> written;
  json out = json::array();
  for (const json& item : items) out.push_back(generate_one(item, base_dir, force, written));
  return json{{"generated", out}};
}

json cmd_run(const json& input, const fs::path& base_dir, bool force) {
  // A manifest replays its chains for exactly the recorded iteration counts.
  const bool replay = input.contains("format") && input.at("format") == "whmc.manifest";
  const json config = replay ? require(input, "config", "manifest") : absolutize(input, base_dir);
  const fs::path base = replay ? fs::path(require(input, "base_dir", "manifest").get<std::string>()) : base_dir;

  const fs::path target_path = resolve(base, path_key(config, "target", ""));
  const io::LoadedTarget target = io::target_from_json(io::load_json(target_path));
  std::optional<fs::path> library_path;
  const ModeLibrary library = load_library_spec(config, base, target, library_path);
  if (!library.empty() && library.dim() != target.target->dim())
    throw ConfigError("config key 'library': dimension does not match the target");

  const json& sampler_json = require(config, "sampler");
  const std::string variant = require(sampler_json, "variant", "sampler").get<std::string>();
  const bool hybrid = variant == "hybrid";
  json sj = sampler_json;
  if (hybrid) sj["variant"] = "whmc_aug";
  const SamplerConfig sampler = io::sampler_config_from_json(sj);
  if (sampler.variant != Variant::kHmc && library.empty())
    throw ConfigError("missing required config key 'library' (needed by " + variant + ")");

  HybridConfig hcfg;
  if (hybrid) {
    hcfg.whmc = sampler;
    const json h = config.contains("hybrid") ? config.at("hybrid") : json::object();
    hcfg.whmc_per_cycle = get_or<std::size_t>(h, "whmc_per_cycle", 1, "hybrid");
    hcfg.independence_per_cycle = get_or<std::size_t>(h, "independence_per_cycle", 1, "hybrid");
    hcfg.burn_in = get_or<std::size_t>(h, "burn_in", 0, "hybrid");
    hcfg.search_modes = get_or<bool>(h, "search_modes", true, "hybrid");
    const std::string c_policy = get_or<std::string>(h, "c_policy", "median", "hybrid");
    if (c_policy == "fixed") {
      hcfg.fixed_log_c = require(h, "log_c", "hybrid").get<double>();
    } else if (c_policy != "median") {
      throw ConfigError("config key 'hybrid.c_policy' must be median or fixed");
    }
    if (h.contains("search")) hcfg.search = io::search_options_from_json(h.at("search"));
    hcfg.validate();
  }

  const auto master = require(config, "seed").get<std::uint64_t>();
  const auto n_chains = get_or<std::size_t>(config, "n_chains", 1);
  if (n_chains == 0) throw ConfigError("config key 'n_chains' must be positive");
  const json& budget = require(config, "budget");
  ChainOptions copt;
  copt.n_iter = get_or<std::size_t>(budget, "n_iter", 0, "budget");
  copt.wall_budget_s = get_or<double>(budget, "wall_s", 0.0, "budget");
  copt.thin = get_or<std::size_t>(budget, "thin", 1, "budget");
  if (copt.n_iter == 0 && copt.wall_budget_s <= 0.0)
    throw ConfigError("missing required config key 'budget.n_iter' or 'budget.wall_s'");

  const fs::path out_dir = resolve(base, path_key(config, "output_dir", ""));
  json ref_prov;
  const std::optional<Vector> reference = reference_spec(config, base, target, library, true, ref_prov);
  const std::vector<Vector> starts = initial_points(config, library, n_chains, target.target->dim());
  // A chain started where pi vanishes would reject forever.
  for (std::size_t i = 0; i < starts.size(); ++i)
    if (!std::isfinite(target.target->log_density(starts[i])))
      throw NumericError("chain " + std::to_string(i) + ": log density is not finite at the initial point");

  std::vector<fs::path> outputs{out_dir / "manifest.json"};
  for (std::size_t i = 0; i < n_chains; ++i) outputs.push_back(out_dir / ("chain_" + std::to_string(i) + ".csv"));
  refuse_existing(outputs, force);
  fs::create_directories(out_dir);

  json manifest{{"format", "whmc.manifest"},
                {"version", 1},
                {"config", config},
                {"base_dir", base.string()},
                {"kernel_isa", simd::isa_name(simd::active().isa)},
                {"master_seed", master},
                {"target", {{"path", target_path.string()}, {"hash", io::file_hash(target_path)}, {"kind", target.kind}}},
                {"sampler", io::sampler_config_to_json(sampler)},
                {"hybrid", hybrid}};
  if (library_path) manifest["library"] = {{"path", library_path->string()}, {"hash", io::file_hash(*library_path)}};
  manifest["library_snapshot_hash"] = io::hex64(io::fnv1a(io::library_to_json(library).dump()));
  if (reference) manifest["reference"] = ref_prov;

  json chains = json::array();
  for (std::size_t i = 0; i < n_chains; ++i) {
    const std::uint64_t seed = derive_seed(master, i);
    ChainOptions opt = copt;
    if (replay) {
      opt.n_iter = input.at("chains").at(i).at("iterations").get<std::size_t>();
      opt.wall_budget_s = 0.0;
    }
    Trace trace;
    json chain{{"index", i}, {"seed", seed}};
    if (hybrid) {
      std::string events;
      HybridResult res = hybrid_chain(*target.target, library, starts[i], hcfg, opt, seed,
                                      [&events](const RegenerationEvent& ev) {
                                        events += io::regeneration_event_to_json(ev).dump() + "\n";
                                      });
      io::write_text(out_dir / ("events_chain_" + std::to_string(i) + ".jsonl"), events, true);
      io::write_json(out_dir / ("library_chain_" + std::to_string(i) + ".json"), io::library_to_json(res.library.with_visits(res.visits)), true);
      chain["regenerations"] = res.events.size();
      chain["final_library_size"] = res.library.size();
      trace = std::move(res.trace);
    } else {
      const auto s = make_sampler(*target.target, library, sampler);
      trace = run_chain(*s, starts[i], opt, seed);
    }
    const fs::path csv = out_dir / ("chain_" + std::to_string(i) + ".csv");
    io::write_text(csv, io::trace_to_csv(trace), true);
    chain["trace"] = csv.string();
    chain["iterations"] = trace.n_iterations;
    chain["acceptance_rate"] = trace.acceptance_rate();
    chain["jumps"] = trace.n_jumps;
    chain["elapsed_s"] = trace.elapsed_s;
    chain["mean"] = io::vector_to_json(trace.mean());
    if (reference) {
      const auto by_time = rem_curve(trace, *reference);
      const auto by_iter = rem_by_iteration(trace, *reference);
      io::write_text(out_dir / ("rem_chain_" + std::to_string(i) + ".csv"), rem_csv(by_time), true);
      io::write_text(out_dir / ("metrics_chain_" + std::to_string(i) + ".jsonl"),
                     rem_jsonl(by_time, i, "wall_clock") + rem_jsonl(by_iter, i, "iteration"), true);
      chain["final_rem"] = rem(trace.mean(), *reference);
    }
    if (!library.empty()) {
      json occ = json::array();
      for (double o : mode_occupancy(trace.samples, library)) occ.push_back(o);
      chain["occupancy"] = occ;
    }
    chains.push_back(chain);
  }
  manifest["chains"] = chains;
  io::write_json(out_dir / "manifest.json", manifest, true);
  return json{{"output_dir", out_dir.string()}, {"chains", chains}};
}

json cmd_modesearch(const json& config, const fs::path& base_dir, bool force) {
  const fs::path target_path = resolve(base_dir, path_key(config, "target", ""));
  const io::LoadedTarget target = io::target_from_json(io::load_json(target_path));
  std::optional<fs::path> lib_path;
  const ModeLibrary library = load_library_spec(config, base_dir, target, lib_path);
  const fs::path out = resolve(base_dir, path_key(config, "output", ""));
  const fs::path report_path = resolve(base_dir, path_key(config, "report", ""));
  refuse_existing({out, report_path}, force);
  const auto seed = require(config, "seed").get<std::uint64_t>();
  const ModeSearchOptions opt = io::search_options_from_json(config.contains("search") ? config.at("search") : json::object());
  const std::size_t d = target.target->dim();
  const auto di = static_cast<Eigen::Index>(d);

  Rng rng(seed);
  std::vector<Vector> starts;
  const json st = config.contains("starts") ? config.at("starts") : json::object();
  if (st.contains("box")) {
    const json& box = st.at("box");
    const double lo = require(box, "lo", "starts.box").get<double>();
    const double hi = require(box, "hi", "starts.box").get<double>();
    if (!(hi > lo)) throw ConfigError("config key 'starts.box' needs hi > lo");
    std::uniform_real_distribution<double> u(lo, hi);
    for (std::size_t i = 0; i < opt.n_starts; ++i) {
      Vector x(di);
      for (Eigen::Index j = 0; j < di; ++j) x[j] = u(rng);
      starts.push_back(std::move(x));
    }
  } else {
    Vector mean = Vector::Zero(di);
    Matrix cov = Matrix::Identity(di, di);
    if (st.contains("mean")) {
      mean = io::vector_from_json(st.at("mean"), "starts.mean");
      if (mean.size() != di) throw ConfigError("config key 'starts.mean' has the wrong dimension");
    } else if (!library.empty()) {
      RunningMoments m(d);
      for (const Mode& mode : library.modes()) m.add(mode.location);
      mean = m.mean();
      cov = library.size() > 1 ? m.covariance() : Matrix(library[0].hessian.inverse());
    }
    if (st.contains("sd")) cov = Matrix::Identity(di, di) * std::pow(st.at("sd").get<double>(), 2);
    // Start covariance is scaled by start_cov_scale inside draw_starts.
    starts = draw_starts(mean, cov, opt.start_cov_scale, opt.n_starts, rng);
  }

  std::optional<IndependenceKernel> kernel;
  if (!library.empty()) {
    std::vector<std::size_t> visits;
    for (const Mode& m : library.modes()) visits.push_back(m.visits);
    kernel = fit_independence_kernel(library, visits, *target.target);
  }
  const ModeSearchReport report =
      search_from_starts(*target.target, library, kernel ? &*kernel : nullptr, starts, opt);
  std::vector<Mode> modes = report.new_modes;
  LibraryUpdate up;
  if (library.empty()) {
    up.library = ModeLibrary(modes);
    up.added = modes.size();
  } else {
    up = update_library(library, modes);
  }
  json rep = io::search_report_to_json(report);
  rep["residual"] = kernel.has_value();
  rep["temperature"] = opt.temperature;
  rep["seed"] = seed;
  rep["added"] = up.added;
  rep["skipped"] = up.skipped;
  rep["library_size"] = up.library.size();
  io::write_json(out, io::library_to_json(up.library), force);
  io::write_json(report_path, rep, force);
  return json{{"output", out.string()}, {"report", report_path.string()}, {"added", up.added},
              {"library_size", up.library.size()}, {"known_basin_fraction", report.known_basin_fraction()}};
}

json cmd_rem(const std::vector<fs::path>& traces, const fs::path& reference, double threshold,
             const fs::path& output_csv, bool force) {
  if (traces.empty()) throw ConfigError("rem: at least one trace is required");
  refuse_existing({output_csv}, force);
  const Vector ref = load_reference(reference);
  std::vector<std::vector<RemPoint>> curves;
  double t_max = 0.0;
  json chains = json::array();
  for (const fs::path& p : traces) {
    const io::CsvTrace t = io::trace_from_csv(p);
    if (t.samples.empty()) throw ConfigError("rem: trace " + p.string() + " has no samples");
    if (t.samples.front().size() != ref.size()) throw ConfigError("rem: trace " + p.string() + " dimension does not match the reference");
    std::vector<RemPoint> curve;
    Vector sum = Vector::Zero(ref.size());
    double next_mark = 0.1;
    for (std::size_t i = 0; i < t.samples.size(); ++i) {
      sum += t.samples[i];
      const double ts = t.wall_ms[i] / 1e3;
      if (ts >= next_mark || i + 1 == t.samples.size()) {
        curve.push_back({ts, t.iteration[i], rem(sum / static_cast<double>(i + 1), ref)});
        while (next_mark <= ts) next_mark *= 1.3;
      }
    }
    t_max = std::max(t_max, curve.back().time_s);
    const auto hit = time_to_threshold(curve, threshold);
    chains.push_back({{"trace", p.string()},
                      {"final_rem", curve.back().rem},
                      {"final_time_s", curve.back().time_s},
                      {"time_to_threshold_s", hit ? json(*hit) : json(nullptr)}});
    curves.push_back(std::move(curve));
  }
  std::ostringstream os;
  os << std::setprecision(10) << "time_s,rem_mean,rem_lo,rem_hi";
  for (std::size_t c = 0; c < curves.size(); ++c) os << ",rem_chain" << c;
  os << '\n';
  std::vector<double> grid;
  for (double t = 0.1; t < t_max; t *= 1.3) grid.push_back(t);
  grid.push_back(t_max);
  double final_mean = 0.0;
  for (const double t : grid) {
    std::vector<double> vals;
    for (const auto& c : curves) vals.push_back(rem_at(c, t));
    double mean = 0.0;
    for (double v : vals) mean += v;
    mean /= static_cast<double>(vals.size());
    double half = 0.0;
    if (vals.size() > 1) {
      double var = 0.0;
      for (double v : vals) var += (v - mean) * (v - mean);
      var /= static_cast<double>(vals.size() - 1);
      half = 1.96 * std::sqrt(var / static_cast<double>(vals.size()));
    }
    os << t << ',' << mean << ',' << mean - half << ',' << mean + half;
    for (double v : vals) os << ',' << v;
    os << '\n';
    final_mean = mean;
  }
  io::write_text(output_csv, os.str(), force);
  std::optional<double> mean_hit;
  {
    std::vector<RemPoint> mean_curve;
    for (const double t : grid) {
      double m = 0.0;
      for (const auto& c : curves) m += rem_at(c, t);
      mean_curve.push_back({t, 0, m / static_cast<double>(curves.size())});
    }
    mean_hit = time_to_threshold(mean_curve, threshold);
  }
  return json{{"output", output_csv.string()},
              {"threshold", threshold},
              {"final_rem_mean", final_mean},
              {"time_to_threshold_s", mean_hit ? json(*mean_hit) : json(nullptr)},
              {"chains", chains}};
}

}  // namespace whmc::experiment
