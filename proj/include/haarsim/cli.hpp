#pragma once

#include "haarsim/bidomain_model.hpp"
#include "haarsim/config.hpp"
#include "haarsim/verification_harness.hpp"

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace haarsim {

enum ExitCode : int { exit_ok = 0, exit_config = 2, exit_solver = 3, exit_check = 4 };

struct FileRecord {
  std::string name;  ///< relative to the output directory
  std::uintmax_t bytes = 0;
  std::string sha256;
};

struct StepRecord {
  std::size_t step = 0;
  int gating_iterations = 0;
  int vue_iterations = 0;
  double vue_residual = 0.0;
};

struct RunManifest {
  std::string tool_version;
  std::string mode;
  std::string config_echo;  ///< emit_config of the resolved configuration
  double duration_seconds = 0.0;
  int exit_code = exit_ok;
  std::optional<bool> check_passed;
  std::optional<std::size_t> failure_step;
  std::string failure_message;
  std::vector<std::string> summary;  ///< human-readable result lines
  SolverSummary solver;
  std::vector<StepRecord> steps;       ///< per-step statistics (simulate mode)
  std::vector<FileRecord> files;       ///< emitted by this run
  std::vector<FileRecord> other_files; ///< already present in the directory
};

struct ExecuteOptions {
  std::filesystem::path out_dir;
  int jobs = 1;
  std::optional<std::vector<Point>> seed_probes;
  std::ostream* log = nullptr;
  bool color = false;
};

/// Run the configured mode, write CSV outputs atomically and manifest.json.
/// Solver failures and failed checks are reported through the exit code.
RunManifest execute(const RunConfig& cfg, const ExecuteOptions& opt);

std::string manifest_json(const RunManifest& m);

std::string sha256_hex(const std::string& bytes);
std::string sha256_file(const std::filesystem::path& p);

/// Write via a sibling temporary file and rename over the target.
void write_atomic(const std::filesystem::path& p, const std::string& content);

/// Parse "x[,y[,z]]; ..." into points.
std::vector<Point> parse_probe_list(const std::string& s, int dim);

/// Entry point of the command-line tool.
int run_cli(int argc, char** argv);

}  // namespace haarsim
