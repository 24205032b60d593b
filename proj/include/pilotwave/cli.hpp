#pragma once

#include "pilotwave/core.hpp"

#include "json.hpp"

#include <map>
#include <optional>
#include <string>
#include <vector>

namespace pilotwave::cli {

using json = nlohmann::json;

inline constexpr int kSchemaVersion = 1;

enum ExitCode : int {
  exit_ok = 0,
  exit_internal = 1,
  exit_invalid_input = 2,
  exit_validation = 3,
  exit_physics = 4,
  exit_numerical = 5,
  exit_io = 6,
};

int exit_code_for(ErrorCategory c);

struct ParamSpec {
  std::string name;
  std::string kind;  // number, integer, string, boolean, number?, json
  json fallback;     // null means "derived when absent"
  std::string help;
};

struct ExperimentInfo {
  std::string name;
  std::string summary;
  std::vector<ParamSpec> params;
};

const std::vector<ExperimentInfo>& registry();
const ExperimentInfo& find_experiment(const std::string& name);

struct ExperimentConfig {
  std::string experiment;
  json parameters = json::object();  // complete: defaults filled in
  std::uint64_t seed = 1;
  std::string output_dir = "out";
};

// Flag values as written on the command line ("--t-final 10" gives
// {"t_final", "10"}); values are read as JSON when they parse, else as text.
using FlagMap = std::vector<std::pair<std::string, std::string>>;

// Merges an optional JSON config file with command-line values (flags win).
// Unknown keys and wrongly typed values are config errors.
ExperimentConfig load_config(const std::optional<std::string>& file,
                             const std::optional<std::string>& experiment, const FlagMap& flags,
                             std::optional<std::uint64_t> seed,
                             std::optional<std::string> output_dir);

struct Issue {
  ErrorCategory category;
  std::string field;
  std::string message;
};

struct ValidationReport {
  std::vector<Issue> issues;
  json derived = json::object();
  bool ok() const { return issues.empty(); }
  int exit_code() const;
};

// Every check runs; failures are collected.
ValidationReport validate(const ExperimentConfig& c);

struct RunResult {
  json summary;
  std::vector<std::string> files;
  double wall_time = 0.0;
};

// Validates fail-fast, runs, writes the outputs and manifest.json into
// c.output_dir. Throws Error on failure.
RunResult run(const ExperimentConfig& c);

// ---- file schemas

struct TrajectoryRow {
  long run_id = 0;
  int particle = 0;
  double t = 0, x = 0, y = 0, z = 0;
  std::string status;
};

class TrajectoryWriter {
 public:
  explicit TrajectoryWriter(const std::string& path);
  void row(long run_id, int particle, double t, const Vec3& x, const std::string& status);
  void close();

 private:
  std::string path_;
  std::string buf_;
};

std::vector<TrajectoryRow> read_trajectory_csv(const std::string& path);

struct Curve {
  std::map<std::string, std::string> header;  // "# key=value" lines
  std::vector<std::string> columns;
  std::vector<std::vector<double>> rows;
};

void write_curve_csv(const std::string& path, const Curve& c);
Curve read_curve_csv(const std::string& path);

struct Field2D {
  std::string quantity;
  int nx = 0, ny = 0;
  double x_lo = 0, x_hi = 0, y_lo = 0, y_hi = 0;
  std::vector<double> data;  // row-major, y slowest
};

// Little-endian float64 data plus a JSON sidecar at path + ".json".
void write_field(const std::string& path, const Field2D& f);
Field2D read_field(const std::string& path);

void write_json(const std::string& path, const json& j);
json read_json(const std::string& path);
// Checks schema_version and the top-level keys of stats.json / manifest.json.
json read_stats(const std::string& path);
json read_manifest(const std::string& path);

std::string usage();

}  // namespace pilotwave::cli
