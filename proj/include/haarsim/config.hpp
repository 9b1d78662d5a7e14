#pragma once

#include "haarsim/bidomain_model.hpp"
#include "haarsim/collocation_stepper.hpp"

#include <string>
#include <vector>

namespace haarsim {

enum class RunMode { simulate, error_table, grid_validation, temporal_order, coeff_decay };

std::string to_string(RunMode m);
RunMode parse_mode(const std::string& s);

/// Applied-current settings for one medium.
struct StimulusSpec {
  std::string kind = "zero";  ///< zero | constant | box
  double amplitude = 0.0;
  std::vector<double> lo{0.0, 0.0, 0.0};
  std::vector<double> hi{1.0, 1.0, 1.0};
  std::vector<double> window{0.0, 0.0};  ///< [t_start, t_end]
  bool operator==(const StimulusSpec&) const = default;
};

/// A run configuration in the flat, line-oriented form it is written in.
/// `to_problem` and `to_stepping` turn it into solver objects.
struct RunConfig {
  RunMode mode = RunMode::simulate;

  // [problem]
  int dim = 1;
  std::vector<double> domain_lo{0.0, 0.0, 0.0};
  std::vector<double> domain_hi{1.0, 1.0, 1.0};
  double cm = 1.0;
  double t_final = 0.5;
  std::string conductivity = "example-closure";
  double sigma_il = 1.2e-3;
  double sigma_it = 1.2e-3;
  double sigma_el = 1.2e-3;
  double sigma_et = 1.2e-3;
  std::vector<double> poly_intra{0.0, 1.0, -1.0};
  std::vector<double> poly_extra{0.0, 1.0, -1.0};
  std::string ionic = "fhn-cubic";
  double ionic_a = 0.1;
  std::vector<double> gate_coupling{1.0};
  std::vector<double> gate_c1{1.0};
  std::vector<double> gate_c2{2.0};
  StimulusSpec stim_intra;
  StimulusSpec stim_extra;
  std::string v0 = "constant";  ///< constant | cosine
  double v0_value = 0.2;
  double v0_amplitude = 0.0;
  std::vector<int> v0_modes{1, 0, 0};
  std::vector<double> w0_value{0.2};

  // [numerics]
  std::vector<int> levels{5};
  double dt = 1e-3;
  double gmres_tol = 1e-10;
  int gmres_restart = 50;
  int gmres_max_iters = 500;
  bool warm_start = true;
  bool preconditioned = true;
  std::string anchor = "point";  ///< point | zero-mean
  int anchor_index = 0;
  bool allow_large = false;
  std::vector<double> sweep_dts{1e-2, 1e-3, 1e-4};
  double dt_ref = 1e-5;  ///< 0 selects min(sweep_dts) / 10
  std::vector<int> ref_levels;  ///< empty: same as levels
  std::vector<int> sweep_levels{2, 3, 4, 5};
  std::string decay_function = "abs-diff";  ///< abs-diff | sum | constant
  int decay_level = 6;

  // [outputs]
  int snapshot_every = 0;
  std::vector<std::vector<double>> probes;  ///< empty: defaults per dimension
  std::string directory;

  bool operator==(const RunConfig&) const = default;
};

/// Parse the `[section]` / `key = value` format. Unknown sections or keys,
/// malformed values, duplicates and missing required keys (dim, t_final,
/// levels, dt) raise ConfigError naming the line and key.
RunConfig parse_config(const std::string& text);

/// Canonical text form; parse_config(emit_config(c)) == c.
std::string emit_config(const RunConfig& c);

/// Semantic checks (positivity, preset names, guard-rail levels); throws
/// ConfigError naming the offending key.
void validate_config(const RunConfig& c);

BidomainProblem to_problem(const RunConfig& c);
SteppingConfig to_stepping(const RunConfig& c);
std::vector<Point> probe_points(const RunConfig& c);

/// Human-readable listing of every preset with its parameters and defaults.
std::string describe_presets();

}  // namespace haarsim
