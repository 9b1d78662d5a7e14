#pragma once

#include "haarsim/bidomain_model.hpp"
#include "haarsim/haar_basis.hpp"
#include "haarsim/krylov.hpp"

#include <Eigen/Dense>

#include <cstddef>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace haarsim {

/// Per-axis collocation matrices, all laid out point x mode.
///
/// The v-basis on one axis is {1, p_{2,2}, ..., p_{2,2M}}: each p_{2,i} with
/// i >= 2 has zero slope at both ends, so every element satisfies the
/// homogeneous Neumann condition. n0/n1/n2 hold the basis values and its first
/// and second derivatives at the collocation points.
struct AxisOperators {
  using Matrix = std::shared_ptr<const Eigen::MatrixXd>;

  HaarBasis basis;
  std::vector<double> y;
  Matrix n0, n1, n2;
  Matrix ht;      ///< H^T, gating collocation
  Matrix ht_inv;  ///< (H^T)^{-1} = D^{-1} H with D = H H^T diagonal

  explicit AxisOperators(const HaarBasis& b);
  int size() const { return basis.size(); }
};

enum class AnchorMode { point, zero_mean };

struct SteppingConfig {
  double dt = 1e-3;
  GmresConfig gmres;
  AnchorMode anchor = AnchorMode::point;
  std::size_t anchor_index = 0;
  /// Snapshot cadence in steps; 0 keeps only the initial and final states.
  std::size_t snapshot_every = 0;
  /// Hold v (and u_e) fixed and advance only the gating variables.
  bool freeze_v = false;
  /// Fast-diagonalization right preconditioner for the (v, u_e) system.
  bool preconditioned = true;

  void validate() const;
  bool operator==(const SteppingConfig&) const = default;
};

/// Fields sampled at the tensor collocation points (axis 0 slowest).
struct BidomainState {
  std::size_t step = 0;
  double t = 0.0;
  Eigen::VectorXd v;
  Eigen::VectorXd ue;
  std::vector<Eigen::VectorXd> w;          ///< one field per gating component
  std::vector<Eigen::VectorXd> trace_vxx;  ///< d2v/dx_a^2 per axis
  std::vector<Eigen::VectorXd> trace_vx;   ///< dv/dx_a per axis
  Eigen::VectorXd coeffs;                  ///< last [alpha; beta], empty before the first step
};

struct StepSystems {
  OperatorPtr k;
  Eigen::VectorXd b;
  OperatorPtr hsys;
  std::vector<Eigen::VectorXd> c;  ///< gating right-hand sides, one per component
};

struct StepDiagnostics {
  std::size_t step = 0;
  std::vector<SolveStats> gating;
  std::optional<SolveStats> vue;  ///< absent when v is frozen
};

struct Trajectory {
  std::vector<BidomainState> snapshots;
  std::vector<StepDiagnostics> diagnostics;
  bool failed = false;
  std::size_t failure_step = 0;
  std::string failure_message;
};

class CollocationStepper {
 public:
  /// `levels` holds J per active axis; a single entry is broadcast.
  CollocationStepper(BidomainProblem problem, std::vector<int> levels, SteppingConfig cfg);

  const BidomainProblem& problem() const { return problem_; }
  const SteppingConfig& config() const { return cfg_; }
  const std::vector<AxisOperators>& axes() const { return axes_; }
  int dim() const { return problem_.domain.dim; }
  std::size_t points() const { return npts_; }
  std::vector<std::size_t> shape() const;
  Point point(std::size_t flat) const;
  /// Volume of one collocation cell.
  double cell_volume() const;
  std::size_t step_count() const { return steps_; }
  double time_at(std::size_t s) const { return static_cast<double>(s) * cfg_.dt; }

  BidomainState initial_state() const;

  /// Hsys = (x)_a H_a^T and c = g(v_s, w_s) for gate `gate`.
  std::pair<OperatorPtr, Eigen::VectorXd> assemble_gating(const BidomainState& s,
                                                          std::size_t gate) const;
  /// w at t_{s+1} for every gate; stats appended to `diag`.
  std::vector<Eigen::VectorXd> step_gating(const BidomainState& s, StepDiagnostics* diag) const;

  /// Block system over [alpha; beta] given w at t_{s+1}.
  StepSystems assemble_vue(const BidomainState& s, const std::vector<Eigen::VectorXd>& w_next) const;
  /// Solve the block system and advance v, u_e and the derivative traces in place.
  void step_vue(BidomainState& s, const std::vector<Eigen::VectorXd>& w_next,
                StepDiagnostics* diag) const;

  /// One full step; throws StepError on a non-converged solve.
  StepDiagnostics step(BidomainState& s) const;
  /// Advance to the problem's final time. Failures end the run early and are
  /// recorded in the trajectory instead of thrown.
  Trajectory run() const;

  OperatorPtr system_operator() const { return k_; }
  OperatorPtr preconditioner() const { return precond_; }
  /// u_e at the collocation points from beta, before anchoring.
  Eigen::VectorXd reconstruct_ue(const Eigen::VectorXd& beta) const;
  void anchor(Eigen::VectorXd& ue) const;

 private:
  void build_operators();

  BidomainProblem problem_;
  SteppingConfig cfg_;
  std::vector<AxisOperators> axes_;
  std::size_t npts_ = 0;
  std::size_t steps_ = 0;
  std::vector<Point> coords_;
  Eigen::VectorXd absorber_;  ///< sum_a (x_a - A_a)^2 / 2 at the points
  std::vector<Eigen::VectorXd> sigma_i_, sigma_i_d_;  ///< intracellular value / derivative per axis
  std::vector<bool> sigma_i_varies_;
  OperatorPtr k_;
  OperatorPtr precond_;
  OperatorPtr hsys_;
  OperatorPtr hsys_inv_;
};

}  // namespace haarsim
