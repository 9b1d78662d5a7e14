#pragma once

#include "haarsim/bidomain_model.hpp"
#include "haarsim/collocation_stepper.hpp"

#include <Eigen/Dense>

#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace haarsim {

/// Final-time fields of one run on its tensor collocation grid.
struct FieldSet {
  Domain domain;
  std::vector<int> levels;
  double t = 0.0;
  Eigen::VectorXd v;
  Eigen::VectorXd ue;
  std::vector<Eigen::VectorXd> w;

  std::size_t points() const { return static_cast<std::size_t>(v.size()); }
  double cell_volume() const;
  /// Flat index of the collocation point nearest to `p`: the cell containing
  /// it, with points on a cell boundary assigned to the upper cell.
  std::size_t nearest_point(const Point& p) const;
};

FieldSet final_fields(const CollocationStepper& stepper, const Trajectory& tr);

/// Fine-to-coarse restriction by averaging the fine values over each coarse
/// cell (the dyadic Haar projection). Coarse levels must not exceed fine ones.
FieldSet restrict_to(const FieldSet& fine, const std::vector<int>& levels);

struct FieldErrors {
  double linf_v = 0.0;
  double linf_ue = 0.0;
  double linf_w = 0.0;
  double l2_v = 0.0;
  double l2_ue = 0.0;
  double l2_w = 0.0;  ///< root of the summed squares over gating components
  double x_norm = 0.0;
};

/// Errors on a common grid. u_e is compared after removing each field's mean,
/// since it is only defined up to a constant. L2 norms use the collocation
/// rule (sum of squares times cell volume).
FieldErrors field_errors(const FieldSet& a, const FieldSet& b);

/// sqrt(v^2 + ue^2 + w^2) of three component norms.
double combine_x_norm(double l2_v, double l2_ue, double l2_w);

/// Aggregate GMRES statistics over one or more trajectories.
struct SolverSummary {
  std::size_t solves = 0;
  int max_iterations = 0;
  double max_residual = 0.0;
  bool all_converged = true;

  void add(const Trajectory& tr);
  void merge(const SolverSummary& other);
};

struct ErrorReport {
  std::vector<Point> probe_points;
  std::vector<std::size_t> probe_map;  ///< nearest collocation index of each probe
  std::vector<double> dts;
  /// abs_v[d][p]: |v_run - v_ref| at probe p for the run at dts[d]; same for abs_ue.
  std::vector<std::vector<double>> abs_v;
  std::vector<std::vector<double>> abs_ue;
  std::vector<FieldErrors> norms;  ///< one per dt
};

/// Probe abscissae of the 1D tables (collocation points of J = 5 on [0,1]).
std::vector<Point> default_probes_1d();

/// Runs must share the reference's final time. The reference is restricted to
/// each run's grid when it is finer.
ErrorReport error_table(const std::vector<FieldSet>& runs, const std::vector<double>& dts,
                        const FieldSet& reference, const std::vector<Point>& probes);

enum class TableField { v, ue };
/// Probe rows (coordinates first) by dt columns, 17 significant digits.
std::string error_table_csv(const ErrorReport& r, TableField field);
/// One row per dt: dt, linf_v, linf_ue, x_norm.
std::string norm_table_csv(const ErrorReport& r);

struct ConvergenceReport {
  std::string parameter;           ///< "dt", "J" or "m"
  std::vector<double> sweep;       ///< swept values, in input order
  std::vector<double> errors;      ///< one per swept value that was compared
  std::vector<double> ratios;      ///< errors[i] / errors[i+1]
  double fitted_order = 0.0;       ///< least-squares log-log slope (sign per operation)
  bool monotone = false;           ///< strictly decreasing errors
  bool flagged = false;            ///< set when the sequence is not monotone
  std::optional<double> selected;  ///< grid validation: smallest J within 2x of the finest
  bool passed = false;
  std::string note;
  SolverSummary solver;
};

std::string convergence_csv(const ConvergenceReport& r);

/// Least-squares slope of log(y) against log(x).
double loglog_slope(const std::vector<double>& x, const std::vector<double>& y);

/// Reference trajectory with dt_ref strictly below every compared dt.
Trajectory reference_run(const BidomainProblem& problem, const std::vector<int>& levels,
                         double dt_ref, const SteppingConfig& base,
                         const std::vector<double>& compared_dts);

/// Runs each J (sharing `base`), compares every J but the largest against the
/// largest in the X norm after restriction. Needs at least three levels.
/// passed = monotone.
ConvergenceReport grid_validation(const BidomainProblem& problem, const std::vector<int>& js,
                                  const SteppingConfig& base, int jobs = 1);

/// L-infinity error of v at the final time for each dt against a reference at
/// dt_ref (default min(dts)/10) on the same grid. fitted_order is the slope of
/// log error against log dt. passed = monotone and every ratio in [5, 30].
ConvergenceReport temporal_order(const BidomainProblem& problem, const std::vector<int>& levels,
                                 const std::vector<double>& dts, const SteppingConfig& base,
                                 double dt_ref = 0.0, int jobs = 1);

/// Same analysis with a caller-supplied error per dt (e.g. an analytic solution).
ConvergenceReport temporal_order(const std::vector<double>& dts,
                                 const std::function<double(double)>& error_for_dt);

/// Largest |<f, h_{i1} x h_{i2}>| over the wavelet pairs at each common level
/// j = 0..j_max on [0,1]^2 (inner products, not normalized coefficients),
/// regressed against log2 m. passed = slope <= -2.75.
ConvergenceReport coefficient_decay_check(const std::function<double(double, double)>& f,
                                          int j_max);

/// Sampled Lipschitz estimate of f on [0,1]^2 (max difference quotient on a grid).
double estimate_lipschitz(const std::function<double(double, double)>& f, int samples = 64);

/// printf %.17g: 17 significant digits, enough to round-trip any double.
std::string format_number(double x);

/// Run `count` independent tasks on up to `jobs` threads; results keep input order.
void parallel_for(std::size_t count, int jobs, const std::function<void(std::size_t)>& task);

}  // namespace haarsim
