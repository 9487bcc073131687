#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "whmc/errors.hpp"
#include "whmc/gaussian_mixture.hpp"
#include "whmc/hybrid.hpp"
#include "whmc/metrics.hpp"
#include "whmc/mode_library.hpp"
#include "whmc/samplers.hpp"
#include "whmc/targets.hpp"

namespace whmc::io {

using nlohmann::json;

// ConfigError naming the dotted path of a missing or mistyped key.
const json& require(const json& obj, const std::string& key, const std::string& context = "");
std::string key_path(const std::string& context, const std::string& key);

template <class T>
T get_or(const json& obj, const std::string& key, T fallback, const std::string& context = "") {
  if (!obj.is_object() || !obj.contains(key)) return fallback;
  try {
    return obj.at(key).get<T>();
  } catch (const json::exception&) {
    throw ConfigError("config key '" + key_path(context, key) + "' has the wrong type");
  }
}

json load_json(const std::filesystem::path& path);
// Refuses to overwrite an existing file unless `force`.
void write_text(const std::filesystem::path& path, const std::string& text, bool force);
void write_json(const std::filesystem::path& path, const json& value, bool force);

// 64-bit FNV-1a, rendered as 16 hex digits.
std::uint64_t fnv1a(std::string_view bytes);
std::string hex64(std::uint64_t v);
std::string file_hash(const std::filesystem::path& path);

json vector_to_json(const Vector& v);
Vector vector_from_json(const json& j, const std::string& context);
json matrix_to_json(const Matrix& m);  // row-major flat array
Matrix matrix_from_json(const json& j, Eigen::Index rows, Eigen::Index cols, const std::string& context);

// --- target instances ---
json gmm_to_json(const GaussianMixture& mixture, std::uint64_t seed, const json& generator);
json sensor_to_json(const SensorInstance& instance, std::uint64_t seed);
json welling_to_json(const WellingTarget& target, std::uint64_t seed, const WellingParams& params);

struct LoadedTarget {
  std::string kind;  // gmm | sensor | welling
  std::unique_ptr<TargetDensity> target;
  std::optional<GaussianMixture> mixture;  // gmm only
  std::vector<Point2> truth;               // sensor only
};
LoadedTarget target_from_json(const json& j);

// --- mode library ---
json library_to_json(const ModeLibrary& library);
ModeLibrary library_from_json(const json& j);
// Means as modes with the component precisions as Hessians.
ModeLibrary library_from_mixture(const GaussianMixture& mixture);

// --- configs ---
SamplerConfig sampler_config_from_json(const json& j);
json sampler_config_to_json(const SamplerConfig& c);
ModeSearchOptions search_options_from_json(const json& j);
json search_options_to_json(const ModeSearchOptions& o);

// --- traces and metrics ---
// Columns: iter, wall_ms, x0..x{D-1}, accepted, jumped, regen.
std::string trace_to_csv(const Trace& trace);
struct CsvTrace {
  std::vector<std::size_t> iteration;
  std::vector<double> wall_ms;
  std::vector<Vector> samples;
};
CsvTrace trace_from_csv(const std::filesystem::path& path);

json reference_to_json(const ReferenceMean& ref);
Vector reference_from_json(const json& j);

json regeneration_event_to_json(const RegenerationEvent& ev);
json search_report_to_json(const ModeSearchReport& report);

}  // namespace whmc::io
