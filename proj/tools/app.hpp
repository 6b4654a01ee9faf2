#pragma once

// Batch front end: JSON run configs in, trajectory/report files out.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include <json.hpp>

#include "opdyn/opdyn.hpp"

namespace opdyn::cli {

using json = nlohmann::json;

inline constexpr const char* kRunSchema = "opdyn.run/1";
inline constexpr const char* kAschSchema = "opdyn.asch/1";

enum class Format { csv, json };

struct NetworkFile {
  std::filesystem::path path;
  std::string m_mode = "uniform";  ///< edge lists only; JSON networks carry their own
};
struct NetworkGenerator {
  std::size_t n = 0;
  std::size_t k = 0;
  std::string m_mode = "uniform";
};
struct NetworkInline {
  json network;
};
using NetworkSource = std::variant<NetworkFile, NetworkGenerator, NetworkInline>;

struct ParameterFileSource {
  std::filesystem::path path;
};
/// lambda ~ Beta(2,8), phi ~ Beta(2,2), optionally overridden by constants.
struct BetaPreset {
  std::optional<double> lambda_override;
  std::optional<double> phi_override;
};
struct ParameterValues {
  json values;
};
using ParameterSource = std::variant<ParameterFileSource, BetaPreset, ParameterValues>;

enum class Resample { all, y0 };

struct SweepConfig {
  std::size_t instances = 100;
  Resample resample = Resample::all;
  std::size_t threads = 0;  ///< 0: hardware concurrency
};

struct RunConfig {
  std::uint64_t seed = 0;
  PublicOpinion mode = PublicOpinion::local;
  ExpressionModel model = ExpressionModel::continuous;
  std::optional<double> threshold;  ///< uniform tau for the threshold model
  StopCriteria stop{};
  std::size_t stride = 1;
  Format format = Format::csv;
  NetworkSource network;
  ParameterSource parameters;
  std::optional<Vector> y0;
  SweepConfig sweep{};
  std::string config_hash;  ///< of the effective config, overrides applied
};

/// Command-line values that take precedence over the config file.
struct Overrides {
  std::optional<std::uint64_t> seed;
  std::optional<PublicOpinion> mode;
  std::optional<Format> format;
};

/// FNV-1a over the compact dump of `j` (object keys are sorted).
std::string config_hash(const json& j);

RunConfig parse_run_config(json j, const std::filesystem::path& base_dir,
                           const Overrides& overrides = {});
RunConfig load_run_config(const std::filesystem::path& path, const Overrides& overrides = {});

struct Instance {
  InfluenceNetwork net;
  AgentParameters params;
  Vector y0;
};

/// Builds the network, parameters and initial opinions the config describes.
/// Generated or sampled parts draw from `seed`; fixed parts are read as given.
Instance materialize(const RunConfig& cfg, std::uint64_t seed);
inline Instance materialize(const RunConfig& cfg) { return materialize(cfg, cfg.seed); }

/// Files produced by a command, held in memory until every computation has
/// succeeded.
struct OutputSet {
  std::vector<std::pair<std::string, std::string>> files;
  void add(std::string name, std::string content) {
    files.emplace_back(std::move(name), std::move(content));
  }
};

void write_outputs(const std::filesystem::path& dir, const OutputSet& out);

struct CommandResult {
  OutputSet outputs;
  int exit_code = 0;
  std::vector<std::string> warnings;
};

CommandResult cmd_simulate(const RunConfig& cfg);
CommandResult cmd_steady(const RunConfig& cfg);
CommandResult cmd_sweep(const RunConfig& cfg);

struct AschGrid {
  std::vector<double> lambda1;
  std::vector<double> phi1;
  std::vector<double> tau1;  ///< threshold model only
  std::size_t seeds = 1;
};

struct AschConfig {
  asch::AschScenario scenario;
  std::uint64_t seed = 0;
  StopCriteria stop{1000000, 1e-13};
  std::optional<AschGrid> grid;
  Format format = Format::csv;
  std::string config_hash;
};

AschConfig parse_asch_config(json j, const Overrides& overrides = {});
AschConfig load_asch_config(const std::filesystem::path& path, const Overrides& overrides = {});
CommandResult cmd_asch(const AschConfig& cfg);

/// Entry point behind main(); returns the process exit status.
int run(int argc, char** argv);

}  // namespace opdyn::cli
