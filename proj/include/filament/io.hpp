#pragma once

#include <filesystem>
#include <functional>
#include <nlohmann/json.hpp>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "filament/corner_ivp.hpp"
#include "filament/hasimoto.hpp"

// Run configuration, command dispatch and the artifact layout.
//
//   <out>/config.json    resolved configuration (defaults filled in)
//   <out>/summary.json   scalars of the run and the assertion table
//   <out>/...            command outputs (CSV, JSON lines, evolution directories)
//
// Parameters are flat: key = value files, JSON objects and --key flags all
// name the same fields. Precedence: key = value file < JSON file < flags.

namespace filament::io {

inline constexpr const char* kFormatVersion = "filament-artifact/1";

class SchemaError : public std::invalid_argument {
 public:
  SchemaError(std::string path, const std::string& what)
      : std::invalid_argument(path.empty() ? what : path + ": " + what), path_(std::move(path)) {}
  const std::string& path() const { return path_; }

 private:
  std::string path_;
};

class MissingOutputs : public std::runtime_error {
 public:
  explicit MissingOutputs(std::vector<std::string> names);
  const std::vector<std::string>& names() const { return names_; }

 private:
  std::vector<std::string> names_;
};

enum class Kind { Number, Integer, Boolean, String, NumberList };

struct Field {
  std::string name;
  Kind kind = Kind::Number;
  nlohmann::json fallback;  // null and !nullable: required
  std::string help;
  std::vector<std::string> choices;
  std::optional<double> lo, hi;  // inclusive bounds (list entries too)
  bool nullable = false;         // null disables what the field controls
};

const std::vector<std::string>& commands();
/// Throws SchemaError for an unknown command.
const std::vector<Field>& schema(const std::string& command);

struct RunConfig {
  std::string command;
  nlohmann::json params;  // validated, defaults filled in
  std::string output_dir;
  std::string format_version = kFormatVersion;

  nlohmann::json to_json() const;
};

/// key = value lines, '#' comments; values stay strings until validation.
nlohmann::json parse_key_value(std::istream& is);
/// .json files are JSON (a bare object or an echoed config.json), anything else key = value.
nlohmann::json load_config_file(const std::filesystem::path& path, const std::string& command);

/// Merges the layers, coerces strings, checks types, bounds and choices.
RunConfig make_config(const std::string& command, const std::vector<nlohmann::json>& layers,
                      const std::string& output_dir);

struct Assertion {
  std::string id;
  double value = 0.0, limit = 0.0;
  bool upper = true;  // value <= limit, else value >= limit
  bool pass = false;
};

struct RunResult {
  nlohmann::json summary;
  std::vector<Assertion> assertions;
  std::vector<std::string> failed() const;
};

/// Writes config.json, the command outputs and summary.json under output_dir.
RunResult run(const RunConfig& config);

/// Plot-ready files under <artifact>/plot; throws MissingOutputs.
std::vector<std::string> emit_plotdata(const std::filesystem::path& artifact);

/// JSON text with every double in shortest round-trip form; non-finite numbers become null.
std::string dump_json(const nlohmann::json& j, int indent = 2);
void write_json(const std::filesystem::path& path, const nlohmann::json& j);

/// FILAMENT_THREADS (>= 1) or 1 when unset; SchemaError when malformed.
int thread_cap();

/// Evolution directory with frames and psi when present:
/// index.json plus slice_NNNNN.csv with x, chi, T[, e1, e2][, psi].
void write_evolution(const std::filesystem::path& dir, const CurveEvolution& evo);
CurveEvolution read_evolution(const std::filesystem::path& dir);

/// One block per slice (x,y,z rows), blank-line separated.
void write_polylines(std::ostream& os, const std::vector<SampledCurve>& curves);

}  // namespace filament::io
