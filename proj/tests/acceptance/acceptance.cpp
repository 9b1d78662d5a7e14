// End-to-end acceptance run. Each criterion prints one PASS/FAIL line with the
// measured quantities and its wall time; the exit status is nonzero if any fails.

#include "haarsim/cli.hpp"
#include "haarsim/collocation_stepper.hpp"
#include "haarsim/config.hpp"
#include "haarsim/haar_basis.hpp"
#include "haarsim/krylov.hpp"
#include "haarsim/verification_harness.hpp"
#include "oracles.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <exception>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <random>
#include <sstream>
#include <string>
#include <vector>

using namespace haarsim;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

struct Criterion {
  int id;
  std::string title;
  double budget_seconds;
  std::function<Outcome()> body;
};

std::string sci(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3e", x);
  return buf;
}

std::string join(const std::vector<double>& xs) {
  std::string s;
  for (std::size_t i = 0; i < xs.size(); ++i) s += (i ? ", " : "") + sci(xs[i]);
  return "[" + s + "]";
}

SteppingConfig stepping(double dt) {
  SteppingConfig c;
  c.dt = dt;
  return c;
}

// Solver statistics collected by criteria 4-8, inspected by criterion 11.
std::map<int, SolverSummary> solver_log;

std::string solver_note(const SolverSummary& s) {
  return std::to_string(s.solves) + " solves, max residual " + sci(s.max_residual);
}

// Criterion-6 configuration: 1D default closure at J=5, three dts against 1e-5.
RunConfig table1_config() {
  RunConfig c;
  c.mode = RunMode::error_table;
  c.dim = 1;
  c.t_final = 0.5;
  c.levels = {5};
  c.sweep_dts = {1e-2, 1e-3, 1e-4};
  c.dt_ref = 1e-5;
  return c;
}

fs::path scratch_dir(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("haarsim_acceptance_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::vector<double> csv_column(const fs::path& p, std::size_t column) {
  std::ifstream in(p);
  std::string line;
  std::getline(in, line);
  std::vector<double> out;
  while (std::getline(in, line)) {
    std::stringstream row(line);
    std::string cell;
    for (std::size_t c = 0; c <= column && std::getline(row, cell, ','); ++c) {
      if (c == column && !cell.empty()) out.push_back(std::stod(cell));
    }
  }
  return out;
}

Outcome orthogonality() {
  double worst = 0.0;
  for (int level = 0; level <= 6; ++level) {
    const HaarBasis b(0.0, 1.0, level);
    const int n = b.size();
    const auto grid = collocation_grid(b);
    // Products are constant on every finest cell, so the midpoint sum is exact.
    Eigen::MatrixXd h(n, n);
    for (int i = 1; i <= n; ++i)
      for (int k = 0; k < n; ++k) h(i - 1, k) = eval_haar(i, grid.y[k], b);
    const Eigen::MatrixXd gram = h * h.transpose() * b.dx();
    for (int i = 1; i <= n; ++i) {
      const double norm = i == 1 ? 1.0 : 1.0 / wavelet_index(i, b).m;
      for (int j = 1; j <= n; ++j) {
        worst = std::max(worst, std::abs(gram(i - 1, j - 1) - (i == j ? norm : 0.0)));
      }
    }
  }
  return {worst <= 1e-12, "max |<h_i,h_j> - 2^-j delta_ij| = " + sci(worst)};
}

Outcome integral_oracle() {
  const HaarBasis b(0.0, 1.0, 4);
  std::mt19937 rng(2024);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<double> xs(50);
  for (double& x : xs) x = u(rng);
  double worst = 0.0;
  for (int alpha = 1; alpha <= 3; ++alpha)
    for (int i = 1; i <= b.size(); ++i)
      for (double x : xs) {
        const double d = eval_integral(alpha, i, x, b) - oracle::oracle_integral(alpha, i, x, 0.0, 1.0);
        worst = std::max(worst, std::abs(d));
      }
  return {worst <= 1e-8, "max deviation " + sci(worst) + " over 3 x 32 x 50 evaluations"};
}

Outcome gating() {
  const BidomainProblem p = example_closure(1, 0.5);
  const double exact = 0.1 + 0.1 * std::exp(-2.0 * 0.5);
  auto gate_error = [&](double dt) {
    SteppingConfig c = stepping(dt);
    c.freeze_v = true;
    const Trajectory tr = CollocationStepper(p, {5}, c).run();
    if (tr.failed) throw std::runtime_error(tr.failure_message);
    return (tr.snapshots.back().w[0].array() - exact).abs().maxCoeff();
  };
  const double err = gate_error(1e-4);
  const auto r = temporal_order({1e-2, 1e-3, 1e-4}, gate_error);
  const bool ok = err <= 5e-5 && std::abs(r.fitted_order - 1.0) <= 0.1;
  return {ok, "|w - w_exact| = " + sci(err) + " at dt 1e-4, order " + sci(r.fitted_order)};
}

Outcome fixed_point() {
  double drift = 0.0;
  SolverSummary sum;
  for (int dim = 1; dim <= 3; ++dim) {
    BidomainProblem p = example_closure(dim, 0.1);
    p.v0 = initial::Constant{0.0};
    p.w0 = {initial::Constant{0.0}};
    const int level = dim == 1 ? 5 : dim == 2 ? 4 : 2;
    const Trajectory tr = CollocationStepper(p, {level}, stepping(1e-3)).run();
    if (tr.failed || tr.snapshots.back().step != 100) return {false, "run stopped early"};
    const auto& s = tr.snapshots.back();
    drift = std::max({drift, s.v.lpNorm<Eigen::Infinity>(), s.ue.lpNorm<Eigen::Infinity>(),
                      s.w[0].lpNorm<Eigen::Infinity>()});
    sum.add(tr);
  }
  solver_log[4] = sum;
  return {drift <= 1e-9, "max drift " + sci(drift) + " after 100 steps (1D J=5, 2D J=4, 3D J=2)"};
}

Outcome reduction() {
  BidomainProblem p1 = example_closure(1, 0.01);
  p1.v0 = initial::Cosine{0.2, 0.1, {1, 0, 0}};
  BidomainProblem p2 = p1;
  p2.domain.dim = 2;
  p2.conductivity = example3_conductivity();
  p1.conductivity = p2.conductivity;
  const Trajectory t1 = CollocationStepper(p1, {5}, stepping(1e-3)).run();
  const Trajectory t2 = CollocationStepper(p2, {5, 5}, stepping(1e-3)).run();
  if (t1.failed || t2.failed) return {false, "run failed"};
  const auto& a = t1.snapshots.back();
  const auto& b = t2.snapshots.back();
  const Eigen::Index nx = a.v.size(), ny = b.v.size() / nx;
  double worst = 0.0;
  for (Eigen::Index i = 0; i < nx; ++i)
    for (Eigen::Index j = 0; j < ny; ++j) {
      const Eigen::Index q = i * ny + j;
      worst = std::max({worst, std::abs(a.v[i] - b.v[q]), std::abs(a.ue[i] - b.ue[q]),
                        std::abs(a.w[0][i] - b.w[0][q])});
    }
  SolverSummary sum;
  sum.add(t1);
  sum.add(t2);
  solver_log[5] = sum;
  return {worst <= 1e-8, "max |2D - 1D| = " + sci(worst) + " after " + std::to_string(a.step) + " steps at J=5"};
}

Outcome table1_trend() {
  ExecuteOptions opt;
  opt.out_dir = scratch_dir("table1_a");
  const RunManifest m = execute(table1_config(), opt);
  solver_log[6] = m.solver;
  const auto errors = csv_column(opt.out_dir / "temporal_trend.csv", 1);
  const auto ratios = csv_column(opt.out_dir / "temporal_trend.csv", 2);
  const bool ok = m.exit_code == exit_ok && m.check_passed.value_or(false);
  return {ok, "v errors " + join(errors) + ", ratios " + join(ratios)};
}

// 2D problem with a non-trivial spatial profile; the default closure is flat.
BidomainProblem table3_problem(double t_final) {
  BidomainProblem p = example_closure(2, t_final);
  p.conductivity = example3_conductivity();
  p.v0 = initial::Cosine{0.2, 0.1, {1, 1, 0}};
  return p;
}

Outcome table3_trend() {
  const auto r = temporal_order(table3_problem(1.0), {4}, {1e-2, 1e-3, 1e-4}, SteppingConfig{}, 1e-5);
  solver_log[7] = r.solver;
  return {r.passed, "v errors " + join(r.errors) + ", ratios " + join(r.ratios)};
}

Outcome grid_check() {
  const auto r = grid_validation(table3_problem(0.1), {2, 3, 4, 5}, stepping(1e-5));
  solver_log[8] = r.solver;
  const bool ok = r.monotone && r.selected && *r.selected == 4.0;
  return {ok, "X errors " + join(r.errors) + ", ratios " + join(r.ratios) + ", selected J = " +
                  (r.selected ? std::to_string(static_cast<int>(*r.selected)) : std::string("none"))};
}

Outcome decay() {
  const auto r = coefficient_decay_check([](double x, double y) { return std::abs(x - y); }, 6);
  return {r.passed, "fitted slope " + sci(r.fitted_order)};
}

Outcome operator_equivalence() {
  std::mt19937 rng(7);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  double worst = 0.0;
  for (int dim : {2, 3})
    for (int level : {0, 1}) {
      BidomainProblem p = example_closure(dim, 0.1);
      p.conductivity = example3_conductivity();
      p.conductivity.intra_l = ScalarField::polynomial(0, {1e-3, 2e-3, -1e-3});
      p.conductivity.extra_t = ScalarField::polynomial(1, {2e-4, 1e-4});
      const CollocationStepper st(p, {level}, stepping(0.01));
      const Eigen::MatrixXd dense = oracle::dense_system(p, std::vector<int>(dim, level), 0.01);
      const LinearOperator& k = *st.system_operator();
      for (int trial = 0; trial < 20; ++trial) {
        Eigen::VectorXd x(dense.cols());
        for (auto& e : x) e = u(rng);
        worst = std::max(worst, (k(x) - dense * x).lpNorm<Eigen::Infinity>());
      }
    }
  return {worst <= 1e-12, "max |K x - K_dense x| = " + sci(worst)};
}

Outcome gmres_health() {
  SolverSummary all;
  std::string missing;
  for (int id = 4; id <= 8; ++id) {
    const auto it = solver_log.find(id);
    if (it == solver_log.end()) {
      missing += " " + std::to_string(id);
      continue;
    }
    all.merge(it->second);
  }
  std::mt19937 rng(11);
  std::normal_distribution<double> g(0.0, 1.0);
  bool spd_ok = true;
  for (int trial = 0; trial < 10; ++trial) {
    const int n = 20 + 18 * trial;
    Eigen::MatrixXd a(n, n);
    Eigen::VectorXd b(n);
    for (auto& e : a.reshaped()) e = g(rng);
    for (auto& e : b) e = g(rng);
    const Eigen::MatrixXd spd = a * a.transpose() + n * Eigen::MatrixXd::Identity(n, n);
    GmresConfig cfg;
    cfg.restart = n;
    cfg.max_iters = 2 * n;
    const auto r = gmres_solve(DenseOperator(spd), b, Eigen::VectorXd::Zero(n), cfg);
    spd_ok = spd_ok && r.stats.converged && r.stats.iterations <= n &&
             (b - spd * r.x).norm() / b.norm() <= 1e-10;
  }
  const bool ok = missing.empty() && all.all_converged && all.max_residual <= 1e-10 && spd_ok;
  std::string detail = solver_note(all) + ", SPD termination " + (spd_ok ? "ok" : "violated");
  if (!missing.empty()) detail += ", no data from criteria" + missing;
  return {ok, detail};
}

Outcome determinism() {
  ExecuteOptions opt;
  opt.out_dir = scratch_dir("table1_b");
  const RunManifest m = execute(table1_config(), opt);
  const fs::path first = fs::temp_directory_path() / "haarsim_acceptance_table1_a";
  std::size_t compared = 0;
  std::string differing;
  for (const auto& f : m.files) {
    if (fs::path(f.name).extension() != ".csv") continue;
    ++compared;
    if (!fs::exists(first / f.name) || slurp(first / f.name) != slurp(opt.out_dir / f.name)) {
      differing += " " + f.name;
    }
  }
  const bool ok = compared > 0 && differing.empty();
  return {ok, std::to_string(compared) + " CSV files compared" +
                  (differing.empty() ? std::string(", all identical") : ", differing:" + differing)};
}

}  // namespace

int main() {
  const std::vector<Criterion> criteria{
      {1, "Haar orthogonality, J <= 6", 5, orthogonality},
      {2, "iterated integrals vs Simpson oracle, J = 4", 30, integral_oracle},
      {3, "gating against the analytic solution", 10, gating},
      {4, "fixed point preserved in 1D/2D/3D", 120, fixed_point},
      {5, "y-invariant 2D equals 1D", 60, reduction},
      {6, "1D temporal trend, J = 5", 300, table1_trend},
      {7, "2D temporal trend, J = 4", 900, table3_trend},
      {8, "2D grid validation, J = 2..5", 900, grid_check},
      {9, "coefficient decay of |x - y|", 30, decay},
      {10, "matrix-free vs dense block operator", 10, operator_equivalence},
      {11, "GMRES convergence in 4-8 and SPD termination", 30, gmres_health},
      {12, "criterion 6 outputs are byte-identical on rerun", 300, determinism},
  };

  int failures = 0;
  for (const auto& c : criteria) {
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.body();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (secs > c.budget_seconds) {
      o.pass = false;
      o.detail += ", over the " + std::to_string(static_cast<int>(c.budget_seconds)) + " s budget";
    }
    if (!o.pass) ++failures;
    std::printf("%s criterion %2d: %s (%s) [%.2f s]\n", o.pass ? "PASS" : "FAIL", c.id, c.title.c_str(),
                o.detail.c_str(), secs);
    std::fflush(stdout);
  }
  std::printf("%d of %zu criteria passed\n", static_cast<int>(criteria.size()) - failures, criteria.size());
  return failures == 0 ? 0 : 1;
}
