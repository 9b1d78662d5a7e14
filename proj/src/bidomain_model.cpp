#include "haarsim/bidomain_model.hpp"

#include "haarsim/errors.hpp"

#include <cmath>
#include <numbers>
#include <string>

namespace haarsim {

namespace {

double poly_eval(const std::vector<double>& c, double x) {
  double r = 0.0;
  for (auto it = c.rbegin(); it != c.rend(); ++it) r = r * x + *it;
  return c.empty() ? 1.0 : r;
}

double poly_deriv(const std::vector<double>& c, double x) {
  double r = 0.0;
  for (std::size_t q = c.size(); q-- > 1;) r = r * x + static_cast<double>(q) * c[q];
  return r;
}

double tabulated_value(const field::Tabulated& t, const Point& p) {
  const int dim = t.domain.dim;
  std::array<int, 3> base{0, 0, 0};
  std::array<double, 3> frac{0.0, 0.0, 0.0};
  for (int a = 0; a < dim; ++a) {
    const int n = t.shape[a];
    if (n == 1) continue;
    const double s = (p[a] - t.domain.lo[a]) / (t.domain.hi[a] - t.domain.lo[a]) * (n - 1);
    int i0 = static_cast<int>(std::floor(s));
    i0 = std::clamp(i0, 0, n - 2);
    base[a] = i0;
    frac[a] = std::clamp(s - i0, 0.0, 1.0);
  }
  double acc = 0.0;
  const int corners = 1 << dim;
  for (int c = 0; c < corners; ++c) {
    double weight = 1.0;
    std::size_t idx = 0;
    for (int a = 0; a < dim; ++a) {
      const int bit = (c >> a) & 1;
      const int n = t.shape[a];
      if (n == 1 && bit) {
        weight = 0.0;
        break;
      }
      weight *= bit ? frac[a] : 1.0 - frac[a];
      idx = idx * static_cast<std::size_t>(n) + static_cast<std::size_t>(base[a] + bit);
    }
    if (weight != 0.0) acc += weight * t.values[idx];
  }
  return acc;
}

}  // namespace

void Domain::validate() const {
  if (dim < 1 || dim > 3) throw DomainError("dimension must be 1, 2 or 3");
  for (int a = 0; a < dim; ++a) {
    if (!(hi[a] > lo[a]) || !std::isfinite(lo[a]) || !std::isfinite(hi[a])) {
      throw DomainError("domain axis " + std::to_string(a) + " needs hi > lo");
    }
  }
}

bool Domain::contains(const Point& p) const {
  for (int a = 0; a < dim; ++a) {
    if (!(p[a] >= lo[a] && p[a] <= hi[a])) return false;
  }
  return true;
}

ScalarField::ScalarField(Rep rep) : rep_(std::move(rep)) {
  if (const auto* t = std::get_if<field::Tabulated>(&rep_)) {
    t->domain.validate();
    std::size_t n = 1;
    for (int a = 0; a < t->domain.dim; ++a) {
      if (t->shape[a] < 1) throw DomainError("tabulated field shape must be positive");
      n *= static_cast<std::size_t>(t->shape[a]);
    }
    if (t->values.size() != n) throw DomainError("tabulated field value count mismatch");
    if (!(t->fd_step > 0.0)) throw DomainError("tabulated field needs a positive fd_step");
    for (double v : t->values) {
      if (!(v >= 0.0)) throw DomainError("conductivity tables must be non-negative");
    }
  }
  if (const auto* c = std::get_if<field::Constant>(&rep_)) {
    if (!(c->value >= 0.0)) throw DomainError("conductivity must be non-negative");
  }
}

ScalarField ScalarField::polynomial(int axis, std::vector<double> coeffs) {
  if (axis < 0 || axis > 2) throw DomainError("polynomial axis must be 0..2");
  field::Polynomial p;
  p.coeffs[axis] = std::move(coeffs);
  return ScalarField(std::move(p));
}

double ScalarField::value(const Point& p) const {
  return std::visit(
      [&](const auto& f) -> double {
        using T = std::decay_t<decltype(f)>;
        if constexpr (std::is_same_v<T, field::Constant>) {
          return f.value;
        } else if constexpr (std::is_same_v<T, field::Polynomial>) {
          double r = 1.0;
          for (int a = 0; a < 3; ++a) r *= poly_eval(f.coeffs[a], p[a]);
          return r;
        } else {
          return tabulated_value(f, p);
        }
      },
      rep_);
}

double ScalarField::derivative(int axis, const Point& p) const {
  return std::visit(
      [&](const auto& f) -> double {
        using T = std::decay_t<decltype(f)>;
        if constexpr (std::is_same_v<T, field::Constant>) {
          return 0.0;
        } else if constexpr (std::is_same_v<T, field::Polynomial>) {
          double r = 1.0;
          for (int a = 0; a < 3; ++a) {
            r *= a == axis ? poly_deriv(f.coeffs[a], p[a]) : poly_eval(f.coeffs[a], p[a]);
          }
          return r;
        } else {
          const double lo = std::max(f.domain.lo[axis], p[axis] - f.fd_step);
          const double hi = std::min(f.domain.hi[axis], p[axis] + f.fd_step);
          Point pl = p;
          Point ph = p;
          pl[axis] = lo;
          ph[axis] = hi;
          return (tabulated_value(f, ph) - tabulated_value(f, pl)) / (hi - lo);
        }
      },
      rep_);
}

bool ScalarField::is_constant() const {
  if (std::holds_alternative<field::Constant>(rep_)) return true;
  if (const auto* p = std::get_if<field::Polynomial>(&rep_)) {
    for (const auto& c : p->coeffs) {
      for (std::size_t q = 1; q < c.size(); ++q) {
        if (c[q] != 0.0) return false;
      }
    }
    return true;
  }
  return false;
}

const ScalarField& ConductivityField::along(int axis, Medium medium) const {
  if (medium == Medium::intra) return axis == 0 ? intra_l : intra_t;
  return axis == 0 ? extra_l : extra_t;
}

ConductivitySample conductivity_at(const ConductivityField& c, const Domain& domain, int axis,
                                   Medium medium, const Point& point) {
  if (axis < 0 || axis >= domain.dim) throw DomainError("conductivity axis out of range");
  if (!domain.contains(point)) throw DomainError("conductivity query outside the domain");
  const ScalarField& f = c.along(axis, medium);
  return ConductivitySample{f.value(point), f.derivative(axis, point)};
}

double ionic_current(const IonicModel& m, double v, std::span<const double> w) {
  if (w.size() != m.gates.size()) throw DomainError("gating vector length mismatch");
  double r = v * (v - m.a) * (1.0 - v);
  for (std::size_t k = 0; k < w.size(); ++k) r -= m.gates[k].coupling * w[k];
  return r;
}

double ionic_current(const IonicModel& m, double v, double w) {
  return ionic_current(m, v, std::span<const double>(&w, 1));
}

double gating_rate(const IonicModel& m, double v, double w, std::size_t gate) {
  if (gate >= m.gates.size()) throw DomainError("gate index out of range");
  return m.gates[gate].c1 * v - m.gates[gate].c2 * w;
}

double stimulus_value(const StimulusField& s, int dim, const Point& p, double t) {
  return std::visit(
      [&](const auto& f) -> double {
        using T = std::decay_t<decltype(f)>;
        if constexpr (std::is_same_v<T, stimulus::Zero>) {
          return 0.0;
        } else if constexpr (std::is_same_v<T, stimulus::Constant>) {
          return f.amplitude;
        } else {
          if (t < f.t_start || t > f.t_end) return 0.0;
          for (int a = 0; a < dim; ++a) {
            if (p[a] < f.lo[a] || p[a] > f.hi[a]) return 0.0;
          }
          return f.amplitude;
        }
      },
      s);
}

double initial_value(const InitialField& f, const Domain& d, const Point& p) {
  return std::visit(
      [&](const auto& g) -> double {
        using T = std::decay_t<decltype(g)>;
        if constexpr (std::is_same_v<T, initial::Constant>) {
          return g.value;
        } else {
          double prod = 1.0;
          for (int a = 0; a < d.dim; ++a) {
            const double s = std::numbers::pi * g.modes[a] / (d.hi[a] - d.lo[a]);
            prod *= std::cos(s * (p[a] - d.lo[a]));
          }
          return g.base + g.amplitude * prod;
        }
      },
      f);
}

double initial_derivative(const InitialField& f, const Domain& d, int axis, int order,
                          const Point& p) {
  if (order != 1 && order != 2) throw DomainError("initial derivative order must be 1 or 2");
  return std::visit(
      [&](const auto& g) -> double {
        using T = std::decay_t<decltype(g)>;
        if constexpr (std::is_same_v<T, initial::Constant>) {
          return 0.0;
        } else {
          double prod = g.amplitude;
          for (int a = 0; a < d.dim; ++a) {
            const double s = std::numbers::pi * g.modes[a] / (d.hi[a] - d.lo[a]);
            const double arg = s * (p[a] - d.lo[a]);
            if (a != axis) {
              prod *= std::cos(arg);
            } else if (order == 1) {
              prod *= -s * std::sin(arg);
            } else {
              prod *= -s * s * std::cos(arg);
            }
          }
          return prod;
        }
      },
      f);
}

void BidomainProblem::validate() const {
  domain.validate();
  if (!(cm > 0.0)) throw DomainError("membrane capacitance must be positive");
  if (!(t_final >= 0.0)) throw DomainError("final time must be non-negative");
  if (ionic.gates.empty()) throw DomainError("at least one gating component is required");
  if (w0.size() != ionic.gates.size()) {
    throw DomainError("one initial field per gating component is required");
  }
  // Sample the conductivities on a coarse probe lattice; negative values are rejected.
  const int per_axis = domain.dim == 3 ? 9 : 33;
  std::array<int, 3> idx{0, 0, 0};
  const int total = static_cast<int>(std::pow(per_axis, domain.dim));
  for (int flat = 0; flat < total; ++flat) {
    int rem = flat;
    Point p{0.0, 0.0, 0.0};
    for (int a = domain.dim - 1; a >= 0; --a) {
      idx[a] = rem % per_axis;
      rem /= per_axis;
      p[a] = domain.lo[a] + (domain.hi[a] - domain.lo[a]) * idx[a] / (per_axis - 1);
    }
    for (int a = 0; a < domain.dim; ++a) {
      for (Medium m : {Medium::intra, Medium::extra}) {
        if (!(conductivity.along(a, m).value(p) >= 0.0)) {
          throw DomainError("conductivity is negative somewhere in the domain");
        }
      }
    }
  }
}

BidomainProblem example_closure(int dim, double t_final) {
  BidomainProblem p;
  p.domain.dim = dim;
  p.t_final = t_final;
  p.validate();
  return p;
}

ConductivityField example3_conductivity() {
  ConductivityField c;
  c.intra_l = ScalarField::constant(1.2e-3);
  c.extra_l = ScalarField::constant(1.2e-3);
  c.intra_t = ScalarField::constant(2.5562e-4);
  c.extra_t = ScalarField::constant(2.5562e-4);
  return c;
}

}  // namespace haarsim
