#include "whmc/io.hpp"

#include <fstream>
#include <iomanip>
#include <sstream>

#include "whmc/errors.hpp"

namespace whmc::io {

std::string key_path(const std::string& context, const std::string& key) {
  return context.empty() ? key : context + "." + key;
}

const json& require(const json& obj, const std::string& key, const std::string& context) {
  if (!obj.is_object() || !obj.contains(key)) throw ConfigError("missing required config key '" + key_path(context, key) + "'");
  return obj.at(key);
}

json load_json(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open " + path.string());
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError("invalid JSON in " + path.string() + ": " + e.what());
  }
}

void write_text(const std::filesystem::path& path, const std::string& text, bool force) {
  if (!force && std::filesystem::exists(path))
    throw ConfigError("refusing to overwrite existing file " + path.string() + " (use --force)");
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw ConfigError("cannot write " + path.string());
  out << text;
}

void write_json(const std::filesystem::path& path, const json& value, bool force) {
  write_text(path, value.dump(2) + "\n", force);
}

std::uint64_t fnv1a(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (const char c : bytes) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string hex64(std::uint64_t v) {
  std::ostringstream os;
  os << std::hex << std::setw(16) << std::setfill('0') << v;
  return os.str();
}

std::string file_hash(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return hex64(fnv1a(ss.str()));
}

json vector_to_json(const Vector& v) { return json(std::vector<double>(v.data(), v.data() + v.size())); }

Vector vector_from_json(const json& j, const std::string& context) {
  if (!j.is_array()) throw ConfigError("config key '" + context + "' must be an array of numbers");
  Vector v(static_cast<Eigen::Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) {
    if (!j[i].is_number()) throw ConfigError("config key '" + context + "' must be an array of numbers");
    v[static_cast<Eigen::Index>(i)] = j[i].get<double>();
  }
  return v;
}

json matrix_to_json(const Matrix& m) { return json(to_row_major(m)); }

Matrix matrix_from_json(const json& j, Eigen::Index rows, Eigen::Index cols, const std::string& context) {
  const Vector flat = vector_from_json(j, context);
  if (flat.size() != rows * cols)
    throw ConfigError("config key '" + context + "' must hold " + std::to_string(rows * cols) + " row-major entries");
  return from_row_major(view(flat), rows, cols);
}

namespace {

json dense_rows(const Matrix& m) {
  json rows = json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) rows.push_back(vector_to_json(m.row(r).transpose()));
  return rows;
}

Matrix dense_from_rows(const json& j, Eigen::Index n, const std::string& context) {
  if (!j.is_array() || static_cast<Eigen::Index>(j.size()) != n)
    throw ConfigError("config key '" + context + "' must be a " + std::to_string(n) + "x" + std::to_string(n) + " array");
  Matrix m(n, n);
  for (Eigen::Index r = 0; r < n; ++r) {
    const Vector row = vector_from_json(j[static_cast<std::size_t>(r)], context);
    if (row.size() != n) throw ConfigError("config key '" + context + "' has a row of the wrong length");
    m.row(r) = row.transpose();
  }
  return m;
}

json point_list(const std::vector<Point2>& pts) {
  json out = json::array();
  for (const Point2& p : pts) out.push_back({p[0], p[1]});
  return out;
}

std::vector<Point2> points_from_json(const json& j, const std::string& context) {
  std::vector<Point2> out;
  if (!j.is_array()) throw ConfigError("config key '" + context + "' must be an array of points");
  for (const json& p : j) {
    const Vector v = vector_from_json(p, context);
    if (v.size() != 2) throw ConfigError("config key '" + context + "' must hold planar points");
    out.push_back({v[0], v[1]});
  }
  return out;
}

}  // namespace

json gmm_to_json(const GaussianMixture& mixture, std::uint64_t seed, const json& generator) {
  json means = json::array();
  json precisions = json::array();
  for (std::size_t k = 0; k < mixture.size(); ++k) {
    means.push_back(vector_to_json(mixture.means()[k]));
    precisions.push_back(matrix_to_json(mixture.precisions()[k]));
  }
  return json{{"format", "whmc.instance"}, {"version", 1},        {"kind", "gmm"},
              {"seed", seed},              {"generator", generator}, {"dim", mixture.dim()},
              {"weights", mixture.weights()}, {"means", means},      {"precisions", precisions}};
}

json sensor_to_json(const SensorInstance& instance, std::uint64_t seed) {
  const SensorObservations& o = instance.observations;
  return json{{"format", "whmc.instance"},   {"version", 1},
              {"kind", "sensor"},            {"seed", seed},
              {"n_sensors", o.n_sensors},    {"anchors", point_list(o.anchors)},
              {"radius", o.radius},          {"noise_sd", o.noise_sd},
              {"distance", dense_rows(o.distance)}, {"indicator", dense_rows(o.indicator)},
              {"truth", point_list(instance.truth)}};
}

json welling_to_json(const WellingTarget& target, std::uint64_t seed, const WellingParams& params) {
  return json{{"format", "whmc.instance"},
              {"version", 1},
              {"kind", "welling"},
              {"seed", seed},
              {"theta", {params.theta1, params.theta2}},
              {"prior_vars", {target.prior_vars()[0], target.prior_vars()[1]}},
              {"obs_var", target.obs_var()},
              {"data", target.data()}};
}

LoadedTarget target_from_json(const json& j) {
  LoadedTarget out;
  out.kind = require(j, "kind", "instance").get<std::string>();
  if (out.kind == "gmm") {
    const auto d = require(j, "dim", "instance").get<Eigen::Index>();
    const json& means = require(j, "means", "instance");
    const json& precs = require(j, "precisions", "instance");
    const auto weights = require(j, "weights", "instance").get<std::vector<double>>();
    if (means.size() != weights.size() || precs.size() != weights.size())
      throw ConfigError("instance: weights, means and precisions must have equal length");
    std::vector<Vector> mu;
    std::vector<Matrix> lam;
    for (std::size_t k = 0; k < weights.size(); ++k) {
      mu.push_back(vector_from_json(means[k], "instance.means"));
      if (mu.back().size() != d) throw ConfigError("instance.means: wrong dimension");
      lam.push_back(matrix_from_json(precs[k], d, d, "instance.precisions"));
    }
    out.mixture = GaussianMixture(weights, mu, lam);
    out.target = std::make_unique<GaussianMixtureTarget>(*out.mixture);
  } else if (out.kind == "sensor") {
    SensorObservations o;
    o.n_sensors = require(j, "n_sensors", "instance").get<std::size_t>();
    o.anchors = points_from_json(require(j, "anchors", "instance"), "instance.anchors");
    o.radius = require(j, "radius", "instance").get<double>();
    o.noise_sd = require(j, "noise_sd", "instance").get<double>();
    const auto n = static_cast<Eigen::Index>(o.n_sensors + o.anchors.size());
    o.distance = dense_from_rows(require(j, "distance", "instance"), n, "instance.distance");
    o.indicator = dense_from_rows(require(j, "indicator", "instance"), n, "instance.indicator");
    if (j.contains("truth")) out.truth = points_from_json(j.at("truth"), "instance.truth");
    out.target = std::make_unique<SensorNetworkTarget>(std::move(o));
  } else if (out.kind == "welling") {
    const auto pv = require(j, "prior_vars", "instance").get<std::vector<double>>();
    if (pv.size() != 2) throw ConfigError("instance.prior_vars must hold two variances");
    out.target = std::make_unique<WellingTarget>(require(j, "data", "instance").get<std::vector<double>>(),
                                                 std::array<double, 2>{pv[0], pv[1]},
                                                 require(j, "obs_var", "instance").get<double>());
  } else {
    throw ConfigError("instance.kind must be one of gmm, sensor, welling");
  }
  return out;
}

json library_to_json(const ModeLibrary& library) {
  json modes = json::array();
  for (const Mode& m : library.modes())
    modes.push_back({{"location", vector_to_json(m.location)},
                     {"hessian", matrix_to_json(m.hessian)},
                     {"weight", m.weight},
                     {"visits", m.visits}});
  return json{{"format", "whmc.library"}, {"version", 1}, {"dim", library.dim()}, {"modes", modes}};
}

ModeLibrary library_from_json(const json& j) {
  const json& modes = require(j, "modes", "library");
  if (!modes.is_array()) throw ConfigError("library.modes must be an array");
  std::vector<Mode> out;
  for (const json& m : modes) {
    Mode mode;
    mode.location = vector_from_json(require(m, "location", "library.modes[]"), "library.modes[].location");
    const Eigen::Index d = mode.location.size();
    mode.hessian = matrix_from_json(require(m, "hessian", "library.modes[]"), d, d, "library.modes[].hessian");
    mode.weight = get_or<double>(m, "weight", 1.0, "library.modes[]");
    mode.visits = get_or<std::size_t>(m, "visits", 0, "library.modes[]");
    out.push_back(std::move(mode));
  }
  if (j.contains("dim") && !out.empty() && j.at("dim").get<std::size_t>() != static_cast<std::size_t>(out.front().location.size()))
    throw ConfigError("library.dim does not match the mode locations");
  return ModeLibrary(std::move(out));
}

ModeLibrary library_from_mixture(const GaussianMixture& mixture) {
  std::vector<Mode> modes;
  for (std::size_t k = 0; k < mixture.size(); ++k)
    modes.push_back(Mode{mixture.means()[k], mixture.precisions()[k], mixture.weights()[k], 0});
  return ModeLibrary(std::move(modes));
}

SamplerConfig sampler_config_from_json(const json& j) {
  SamplerConfig c;
  c.variant = parse_variant(require(j, "variant", "sampler").get<std::string>());
  c.step_size = require(j, "step_size", "sampler").get<double>();
  c.n_leapfrog = require(j, "n_leapfrog", "sampler").get<int>();
  c.step_jitter = get_or<double>(j, "step_jitter", c.step_jitter, "sampler");
  c.epsilon = get_or<double>(j, "epsilon", c.epsilon, "sampler");
  c.influence = get_or<double>(j, "influence", c.influence, "sampler");
  c.world_offset = get_or<double>(j, "world_offset", c.world_offset, "sampler");
  c.jump_rule = parse_jump_rule(get_or<std::string>(j, "jump_rule", "mode_map", "sampler"));
  c.jump_schedule =
      parse_jump_schedule(get_or<std::string>(j, "jump_schedule", std::string(jump_schedule_name(c.jump_schedule)), "sampler"));
  c.allow_jumps = get_or<bool>(j, "allow_jumps", c.allow_jumps, "sampler");
  if (j.contains("fixed_point")) {
    const json& fp = j.at("fixed_point");
    c.fixed_point.max_iterations = get_or<int>(fp, "max_iterations", c.fixed_point.max_iterations, "sampler.fixed_point");
    c.fixed_point.tolerance = get_or<double>(fp, "tolerance", c.fixed_point.tolerance, "sampler.fixed_point");
  }
  c.validate();
  return c;
}

json sampler_config_to_json(const SamplerConfig& c) {
  return json{{"variant", variant_name(c.variant)},
              {"step_size", c.step_size},
              {"n_leapfrog", c.n_leapfrog},
              {"step_jitter", c.step_jitter},
              {"epsilon", c.epsilon},
              {"influence", c.influence},
              {"world_offset", c.world_offset},
              {"jump_rule", jump_rule_name(c.jump_rule)},
              {"jump_schedule", jump_schedule_name(c.jump_schedule)},
              {"allow_jumps", c.allow_jumps},
              {"fixed_point", {{"max_iterations", c.fixed_point.max_iterations}, {"tolerance", c.fixed_point.tolerance}}}};
}

ModeSearchOptions search_options_from_json(const json& j) {
  ModeSearchOptions o;
  const std::string ctx = "search";
  o.n_starts = get_or<std::size_t>(j, "n_starts", o.n_starts, ctx);
  o.temperature = get_or<double>(j, "temperature", o.temperature, ctx);
  o.floor_scale = get_or<double>(j, "floor_scale", o.floor_scale, ctx);
  o.start_cov_scale = get_or<double>(j, "start_cov_scale", o.start_cov_scale, ctx);
  o.bfgs.tolerance = get_or<double>(j, "tolerance", o.bfgs.tolerance, ctx);
  o.bfgs.max_iterations = get_or<int>(j, "max_iterations", o.bfgs.max_iterations, ctx);
  o.polish_iterations = get_or<int>(j, "polish_iterations", o.polish_iterations, ctx);
  if (o.temperature < 1.0) throw ConfigError("search.temperature must be at least 1");
  if (o.n_starts == 0) throw ConfigError("search.n_starts must be positive");
  return o;
}

json search_options_to_json(const ModeSearchOptions& o) {
  return json{{"n_starts", o.n_starts},
              {"temperature", o.temperature},
              {"floor_scale", o.floor_scale},
              {"start_cov_scale", o.start_cov_scale},
              {"tolerance", o.bfgs.tolerance},
              {"max_iterations", o.bfgs.max_iterations},
              {"polish_iterations", o.polish_iterations}};
}

std::string trace_to_csv(const Trace& trace) {
  std::ostringstream os;
  os << std::setprecision(17);
  os << "iter,wall_ms";
  for (std::size_t i = 0; i < trace.dim; ++i) os << ",x" << i;
  os << ",accepted,jumped,regen\n";
  for (std::size_t r = 0; r < trace.samples.size(); ++r) {
    os << trace.iteration[r] << ',' << trace.wall_ms[r];
    for (Eigen::Index i = 0; i < trace.samples[r].size(); ++i) os << ',' << trace.samples[r][i];
    os << ',' << int{trace.accepted[r]} << ',' << int{trace.jumped[r]} << ',' << int{trace.regenerated[r]} << '\n';
  }
  return os.str();
}

CsvTrace trace_from_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open trace " + path.string());
  std::string line;
  if (!std::getline(in, line)) throw ConfigError("empty trace file " + path.string());
  std::size_t cols = 1;
  for (char c : line) cols += c == ',' ? 1 : 0;
  if (cols < 6) throw ConfigError("trace " + path.string() + " has too few columns");
  const std::size_t d = cols - 5;
  CsvTrace out;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::vector<double> vals;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) {
      try {
        vals.push_back(std::stod(cell));
      } catch (const std::exception&) {
        throw ConfigError("trace " + path.string() + ": bad number on line " + std::to_string(lineno));
      }
    }
    if (vals.size() != cols) throw ConfigError("trace " + path.string() + ": wrong column count on line " + std::to_string(lineno));
    out.iteration.push_back(static_cast<std::size_t>(vals[0]));
    out.wall_ms.push_back(vals[1]);
    Vector x(static_cast<Eigen::Index>(d));
    for (std::size_t i = 0; i < d; ++i) x[static_cast<Eigen::Index>(i)] = vals[2 + i];
    out.samples.push_back(std::move(x));
  }
  return out;
}

json reference_to_json(const ReferenceMean& ref) {
  json chains = json::array();
  for (const Vector& m : ref.chain_means) chains.push_back(vector_to_json(m));
  return json{{"format", "whmc.reference"},
              {"version", 1},
              {"mean", vector_to_json(ref.mean)},
              {"standard_error", vector_to_json(ref.standard_error)},
              {"chain_means", chains},
              {"seed", ref.seed},
              {"iterations_per_chain", ref.iterations_per_chain},
              {"sampler", sampler_config_to_json(ref.sampler)},
              {"elapsed_s", ref.elapsed_s}};
}

Vector reference_from_json(const json& j) { return vector_from_json(require(j, "mean", "reference"), "reference.mean"); }

json regeneration_event_to_json(const RegenerationEvent& ev) {
  json added = json::array();
  for (const Vector& a : ev.added) added.push_back(vector_to_json(a));
  return json{{"iteration", ev.iteration},
              {"r", ev.probability},
              {"discarded", vector_to_json(ev.discarded)},
              {"fresh", vector_to_json(ev.fresh)},
              {"library_before", ev.library_before},
              {"library_after", ev.library_after},
              {"added", added},
              {"log_c_before", ev.log_c_before},
              {"log_c_after", ev.log_c_after},
              {"q_proposals", ev.q_proposals}};
}

json search_report_to_json(const ModeSearchReport& report) {
  json starts = json::array();
  for (const StartOutcome& s : report.starts) {
    json row{{"start", vector_to_json(s.start)},
             {"end", vector_to_json(s.end)},
             {"energy", s.energy},
             {"converged", s.converged},
             {"accepted", s.accepted},
             {"status", s.status},
             {"known_basin", nullptr},
             {"new_mode", nullptr}};
    if (s.known_basin) row["known_basin"] = *s.known_basin;
    if (s.new_mode) row["new_mode"] = *s.new_mode;
    starts.push_back(std::move(row));
  }
  json modes = json::array();
  for (const Mode& m : report.new_modes) modes.push_back(vector_to_json(m.location));
  return json{{"dedup_threshold", report.dedup_threshold},
              {"known_basin_fraction", report.known_basin_fraction()},
              {"new_modes", modes},
              {"starts", starts}};
}

}  // namespace whmc::io
