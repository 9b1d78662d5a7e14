#pragma once

#include <array>
#include <span>
#include <variant>
#include <vector>

namespace haarsim {

using Point = std::array<double, 3>;

/// Axis-aligned box [lo_a, hi_a] for the first `dim` axes.
struct Domain {
  int dim = 1;
  Point lo{0.0, 0.0, 0.0};
  Point hi{1.0, 1.0, 1.0};

  void validate() const;
  bool contains(const Point& p) const;
  bool operator==(const Domain&) const = default;
};

namespace field {

struct Constant {
  double value = 0.0;
  bool operator==(const Constant&) const = default;
};

/// Separable product prod_a p_a(x_a); p_a has ascending coefficients, an
/// empty list is the constant 1.
struct Polynomial {
  std::array<std::vector<double>, 3> coeffs;
  bool operator==(const Polynomial&) const = default;
};

/// Node values on a uniform grid spanning `domain` (row-major, axis 0 slowest),
/// multilinear in between. Derivatives are centered differences with step
/// `fd_step`, one-sided where the stencil would leave the domain.
struct Tabulated {
  Domain domain;
  std::array<int, 3> shape{1, 1, 1};
  std::vector<double> values;
  double fd_step = 0.0;
  bool operator==(const Tabulated&) const = default;
};

}  // namespace field

class ScalarField {
 public:
  using Rep = std::variant<field::Constant, field::Polynomial, field::Tabulated>;

  ScalarField() : rep_(field::Constant{}) {}
  explicit ScalarField(Rep rep);

  static ScalarField constant(double value) { return ScalarField(field::Constant{value}); }
  /// Polynomial in the coordinate of a single axis.
  static ScalarField polynomial(int axis, std::vector<double> coeffs);

  double value(const Point& p) const;
  double derivative(int axis, const Point& p) const;
  /// True when the field is constant everywhere (derivatives vanish exactly).
  bool is_constant() const;
  const Rep& rep() const { return rep_; }

  bool operator==(const ScalarField&) const = default;

 private:
  Rep rep_;
};

enum class Medium { intra, extra };

/// Per-axis conductivities: axis 0 uses the longitudinal field, every other
/// axis the transverse one. Zeros are allowed (degenerate media).
struct ConductivityField {
  ScalarField intra_l = ScalarField::constant(1.2e-3);
  ScalarField intra_t = ScalarField::constant(1.2e-3);
  ScalarField extra_l = ScalarField::constant(1.2e-3);
  ScalarField extra_t = ScalarField::constant(1.2e-3);

  const ScalarField& along(int axis, Medium medium) const;
  bool operator==(const ConductivityField&) const = default;
};

struct ConductivitySample {
  double value = 0.0;
  double derivative = 0.0;
};

/// Conductivity of `medium` acting along `axis` at `point`, with its
/// derivative along the same axis.
ConductivitySample conductivity_at(const ConductivityField& c, const Domain& domain, int axis,
                                   Medium medium, const Point& point);

/// Linear recovery gate: dw/dt = c1 v - c2 w; enters f with weight `coupling`.
struct GateParams {
  double coupling = 1.0;
  double c1 = 1.0;
  double c2 = 2.0;
  bool operator==(const GateParams&) const = default;
};

/// Cubic kinetics f(v,w) = v (v - a)(1 - v) - sum_k coupling_k w_k.
struct IonicModel {
  double a = 0.1;
  std::vector<GateParams> gates{GateParams{}};

  std::size_t components() const { return gates.size(); }
  bool operator==(const IonicModel&) const = default;
};

double ionic_current(const IonicModel& m, double v, std::span<const double> w);
double ionic_current(const IonicModel& m, double v, double w);
double gating_rate(const IonicModel& m, double v, double w, std::size_t gate = 0);

namespace stimulus {

struct Zero {
  bool operator==(const Zero&) const = default;
};
struct Constant {
  double amplitude = 0.0;
  bool operator==(const Constant&) const = default;
};
/// amplitude inside the box [lo, hi] during [t_start, t_end], zero elsewhere.
struct Box {
  double amplitude = 0.0;
  Point lo{0.0, 0.0, 0.0};
  Point hi{1.0, 1.0, 1.0};
  double t_start = 0.0;
  double t_end = 0.0;
  bool operator==(const Box&) const = default;
};

}  // namespace stimulus

using StimulusField = std::variant<stimulus::Zero, stimulus::Constant, stimulus::Box>;

double stimulus_value(const StimulusField& s, int dim, const Point& p, double t);

/// Applied currents: `intra` is I1 (intracellular), `extra` is I2.
struct Stimulus {
  StimulusField intra = stimulus::Zero{};
  StimulusField extra = stimulus::Zero{};
  bool operator==(const Stimulus&) const = default;
};

namespace initial {

struct Constant {
  double value = 0.0;
  bool operator==(const Constant&) const = default;
};
/// base + amplitude * prod_a cos(modes_a * pi * (x_a - lo_a) / (hi_a - lo_a)).
/// Satisfies homogeneous Neumann conditions for integer modes.
struct Cosine {
  double base = 0.0;
  double amplitude = 0.0;
  std::array<int, 3> modes{1, 0, 0};
  bool operator==(const Cosine&) const = default;
};

}  // namespace initial

using InitialField = std::variant<initial::Constant, initial::Cosine>;

double initial_value(const InitialField& f, const Domain& d, const Point& p);
/// d^order/dx_axis^order of the initial field (order 1 or 2), analytic.
double initial_derivative(const InitialField& f, const Domain& d, int axis, int order,
                          const Point& p);

struct BidomainProblem {
  Domain domain;
  double cm = 1.0;
  ConductivityField conductivity;
  IonicModel ionic;
  Stimulus stimulus;
  InitialField v0 = initial::Constant{0.2};
  std::vector<InitialField> w0{initial::Constant{0.2}};
  double t_final = 0.5;

  void validate() const;
  bool operator==(const BidomainProblem&) const = default;
};

/// Default closure for the unstated example parameters: D_i = D_e = 1.2e-3 on
/// every axis, zero stimulus, cubic kinetics a = 0.1 with one gate (1, 1, 2),
/// v0 = w0 = 0.2, C_m = 1.
BidomainProblem example_closure(int dim, double t_final = 0.5);

/// Longitudinal 1.2e-3 and transverse 2.5562e-4 in both media.
ConductivityField example3_conductivity();

}  // namespace haarsim
