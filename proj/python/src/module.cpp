#include "haarsim/cli.hpp"
#include "haarsim/collocation_stepper.hpp"
#include "haarsim/config.hpp"
#include "haarsim/errors.hpp"
#include "haarsim/haar_basis.hpp"
#include "haarsim/krylov.hpp"
#include "haarsim/verification_harness.hpp"

#include <pybind11/eigen.h>
#include <pybind11/functional.h>
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

namespace py = pybind11;
using namespace haarsim;

namespace {

// Final fields of a configured simulation, laid out on the collocation grid.
py::dict simulate(const std::string& config_text) {
  const RunConfig cfg = parse_config(config_text);
  validate_config(cfg);
  Trajectory tr;
  std::vector<std::vector<double>> axes;
  std::vector<py::ssize_t> shape;
  {
    py::gil_scoped_release release;
    const CollocationStepper st(to_problem(cfg), cfg.levels, to_stepping(cfg));
    tr = st.run();
    for (const auto& ax : st.axes()) {
      axes.push_back(ax.y);
      shape.push_back(static_cast<py::ssize_t>(ax.y.size()));
    }
  }
  if (tr.failed) throw StepError(tr.failure_message, tr.failure_step);
  const BidomainState& s = tr.snapshots.back();
  auto grid = [&](const Eigen::VectorXd& f) {
    py::array_t<double> a(shape);
    std::copy(f.data(), f.data() + f.size(), a.mutable_data());
    return a;
  };
  py::list w;
  for (const auto& g : s.w) w.append(grid(g));
  py::dict out;
  out["t"] = s.t;
  out["steps"] = s.step;
  out["axes"] = axes;
  out["v"] = grid(s.v);
  out["ue"] = grid(s.ue);
  out["w"] = w;
  return out;
}

std::string run(const std::string& config_text, const std::string& out_dir, int jobs) {
  const RunConfig cfg = parse_config(config_text);
  ExecuteOptions opt;
  opt.out_dir = out_dir;
  opt.jobs = jobs;
  RunManifest m;
  {
    py::gil_scoped_release release;
    m = execute(cfg, opt);
  }
  return manifest_json(m);
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Haar wavelet collocation for the bidomain equations";

  py::register_exception<DomainError>(m, "DomainError", PyExc_ValueError);
  py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
  py::register_exception<NumericalError>(m, "NumericalError", PyExc_ArithmeticError);
  py::register_exception<AssemblyError>(m, "AssemblyError", PyExc_RuntimeError);
  py::register_exception<StepError>(m, "StepError", PyExc_RuntimeError);

  py::class_<HaarBasis>(m, "HaarBasis")
      .def(py::init<double, double, int>(), py::arg("a"), py::arg("b"), py::arg("level"))
      .def_property_readonly("a", &HaarBasis::a)
      .def_property_readonly("b", &HaarBasis::b)
      .def_property_readonly("level", &HaarBasis::level)
      .def_property_readonly("size", &HaarBasis::size)
      .def_property_readonly("dx", &HaarBasis::dx)
      .def("__repr__", [](const HaarBasis& b) {
        return "HaarBasis(" + format_number(b.a()) + ", " + format_number(b.b()) + ", " +
               std::to_string(b.level()) + ")";
      });

  m.def("eval_haar", &eval_haar, py::arg("i"), py::arg("x"), py::arg("basis"));
  m.def("eval_integral", &eval_integral, py::arg("alpha"), py::arg("i"), py::arg("x"), py::arg("basis"));
  m.def("collocation_points", [](const HaarBasis& b) { return collocation_grid(b).y; }, py::arg("basis"));
  m.def(
      "operator_matrices",
      [](const HaarBasis& b) {
        const auto mats = assemble_matrices(b);
        return py::make_tuple(mats.H, mats.P1, mats.P2);
      },
      py::arg("basis"), "(H, P1, P2) with one row per wavelet.");
  m.def(
      "project",
      [](const std::function<double(double)>& f, const HaarBasis& b, double tol) {
        return project(f, b, tol).coeffs;
      },
      py::arg("f"), py::arg("basis"), py::arg("tol") = 1e-12);

  m.def(
      "gmres",
      [](const Eigen::MatrixXd& a, const Eigen::VectorXd& rhs, double tol, int restart, int max_iters) {
        GmresConfig cfg;
        cfg.tol = tol;
        cfg.restart = restart;
        cfg.max_iters = max_iters;
        const auto r = gmres_solve(DenseOperator(a), rhs, Eigen::VectorXd::Zero(rhs.size()), cfg);
        py::dict stats;
        stats["iterations"] = r.stats.iterations;
        stats["relative_residual"] = r.stats.final_relative_residual;
        stats["converged"] = r.stats.converged;
        return py::make_tuple(r.x, stats);
      },
      py::arg("a"), py::arg("b"), py::arg("tol") = 1e-10, py::arg("restart") = 50,
      py::arg("max_iters") = 500);

  m.def("coefficient_decay_slope", [](const std::function<double(double, double)>& f, int j_max) {
    return coefficient_decay_check(f, j_max).fitted_order;
  }, py::arg("f"), py::arg("j_max"));

  m.def("normalize_config", [](const std::string& text) { return emit_config(parse_config(text)); },
        py::arg("text"), "Parse a run configuration and return its canonical form.");
  m.def("presets", &describe_presets);
  m.def("simulate", &simulate, py::arg("config"),
        "Run a configuration and return the final v, ue and w on the collocation grid.");
  m.def("run", &run, py::arg("config"), py::arg("out_dir"), py::arg("jobs") = 1,
        "Execute a configuration like the command-line tool; returns the manifest JSON.");
}
