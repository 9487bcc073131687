// whmc: generate | run | modesearch | rem
// Exit codes: 0 success, 2 configuration error, 3 numeric failure.

#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "whmc/errors.hpp"
#include "whmc/experiment.hpp"
#include "whmc/simd/kernels.hpp"

namespace {

namespace fs = std::filesystem;
using whmc::experiment::json;

constexpr int kConfigExit = 2;
constexpr int kNumericExit = 3;

void fail(const char* kind, const std::string& message) {
  std::cerr << json{{"error", kind}, {"message", message}}.dump() << '\n';
}

bool select_kernels(const std::string& name) {
  namespace simd = whmc::simd;
  if (name == "auto") return true;
  const simd::KernelTable* t = nullptr;
  if (name == "scalar") t = &simd::scalar_kernels();
  if (name == "avx2") t = simd::avx2_kernels();
  if (name == "neon") t = simd::neon_kernels();
  if (t == nullptr) return false;
  simd::set_active(*t);
  return true;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Wormhole HMC sampler and experiment harness"};
  app.require_subcommand(1);
  bool force = false;
  std::string kernels = "auto";
  app.add_option("--kernels", kernels, "SIMD kernel table: auto, scalar, avx2, neon");

  std::string config_path;
  auto* gen = app.add_subcommand("generate", "Write target instances described by a spec file");
  gen->add_option("spec", config_path, "Instance spec (JSON)")->required();
  gen->add_flag("--force", force, "Overwrite existing outputs");

  auto* run = app.add_subcommand("run", "Run chains for a config file or a previous run manifest");
  run->add_option("config", config_path, "Run config or manifest (JSON)")->required();
  run->add_flag("--force", force, "Overwrite existing outputs");

  auto* ms = app.add_subcommand("modesearch", "Search for new modes and write an updated library");
  ms->add_option("config", config_path, "Mode-search config (JSON)")->required();
  ms->add_flag("--force", force, "Overwrite existing outputs");

  std::vector<std::string> traces;
  std::string reference;
  std::string output;
  double threshold = 0.1;
  auto* rem = app.add_subcommand("rem", "REM curves and summary for trace CSV files");
  rem->add_option("traces", traces, "Trace CSV files")->required();
  rem->add_option("--reference", reference, "Reference JSON or gmm instance")->required();
  rem->add_option("--output", output, "Output CSV")->required();
  rem->add_option("--threshold", threshold, "REM threshold for time-to-threshold");
  rem->add_flag("--force", force, "Overwrite existing outputs");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kConfigExit;
  }

  try {
    if (!select_kernels(kernels)) throw whmc::ConfigError("unsupported kernel table: " + kernels);
    json result;
    if (*rem) {
      std::vector<fs::path> paths(traces.begin(), traces.end());
      result = whmc::experiment::cmd_rem(paths, reference, threshold, output, force);
    } else {
      const fs::path path = fs::absolute(config_path);
      const json config = whmc::io::load_json(path);
      const fs::path base = path.parent_path();
      if (*gen) result = whmc::experiment::cmd_generate(config, base, force);
      if (*run) result = whmc::experiment::cmd_run(config, base, force);
      if (*ms) result = whmc::experiment::cmd_modesearch(config, base, force);
    }
    std::cout << result.dump(2) << '\n';
    return 0;
  } catch (const whmc::ConfigError& e) {
    fail("config", e.what());
    return kConfigExit;
  } catch (const whmc::NumericError& e) {
    fail("numeric", e.what());
    return kNumericExit;
  } catch (const json::exception& e) {
    fail("config", e.what());
    return kConfigExit;
  }
}
