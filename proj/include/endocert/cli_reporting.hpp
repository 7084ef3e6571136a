#pragma once

// Command pipelines behind the endocert tool. Each command returns a Report
// (JSON tree, text rendering, columnar plot files and an exit status); writing
// it out is separate so tests can run commands without touching the disk.

#include <endocert/surface_map.hpp>

#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace endocert {

inline constexpr const char* kToolVersion = "0.1.0";

struct SurgeryEntry {
  TorusPoint center;
  double inner_radius = 0.05;
  double outer_radius = 0.0;
  std::optional<Mat2> target;  // unset: Df(center), a no-op
};

struct RunConfig {
  std::string map = "cat";
  std::filesystem::path out;   // empty: $ENDOCERT_OUT, then ./endocert_out
  int grid = 64;
  int core_grid = 32;
  int horizon = 40;            // N and M
  double eta = 0.2;
  int ell = 5;
  int k = 5;
  double epsilon = 0.05;
  double nu = 0.4;
  double delta = 0.1;
  std::uint64_t seed = 1;
  int threads = 1;

  // arcs
  int iterates = 8;
  double arc_length = 0.05;
  // periodic
  std::optional<TorusPoint> start;
  int min_period = 1;
  // perturb
  std::string recipe = "noop";  // noop | scale | kernel | sink | config
  std::optional<TorusPoint> center;
  double radius = 0.05;
  double scale = 0.99;
  int chain = 2;                // m for the kernel recipe
  long probe_steps = 100000;
  int probe_grid = 64;
  int probe_starts = 8;
  std::vector<SurgeryEntry> surgeries;
  // homology
  bool inject_certificate = false;
};

/// Reads keys named like the long flags (dashes or underscores) and
/// [[surgery]] blocks with center, inner, outer, target. Throws Config.
RunConfig load_run_config(const std::filesystem::path& path, RunConfig base = {});
/// Checks documented ranges. Throws Config.
void validate(const RunConfig& cfg);

struct ColumnFile {
  std::string name;     // file name inside the output directory
  std::string header;   // without the leading '#'
  std::vector<std::vector<double>> rows;
};

struct Report {
  std::string command;
  nlohmann::ordered_json data;
  std::vector<ColumnFile> columns;
  int exit_code = 0;    // 0 certified/consistent, 1 negative result, 2 inconclusive
};

Report cmd_certify(const RunConfig& cfg);
Report cmd_arcs(const RunConfig& cfg);
Report cmd_dichotomy(const RunConfig& cfg);
Report cmd_homology(const RunConfig& cfg);
Report cmd_perturb(const RunConfig& cfg);
Report cmd_periodic(const RunConfig& cfg);

Report run_command(const std::string& command, const RunConfig& cfg);
std::vector<std::string> command_names();

/// Indented key: value rendering of the JSON tree.
std::string render_text(const Report& r);
std::string render_columns(const ColumnFile& c);

/// FNV-1a of the JSON dump with provenance.timestamp removed.
std::string content_hash(const nlohmann::ordered_json& data);

/// Adds provenance (tool version, seed, content hash, and a timestamp unless
/// with_timestamp is false) and writes report.txt, report.json and the column
/// files. Returns the directory used.
std::filesystem::path write_report(Report& r, const RunConfig& cfg, bool with_timestamp = true);

std::filesystem::path output_directory(const RunConfig& cfg);

}  // namespace endocert
