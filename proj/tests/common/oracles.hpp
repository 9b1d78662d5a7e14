#pragma once

// Reference implementations used only by tests. None of them goes through the
// tensor machinery of the library: basis values come straight from the closed
// forms and the finite-difference solver is a separate discretization.

#include "haarsim/bidomain_model.hpp"
#include "haarsim/collocation_stepper.hpp"
#include "haarsim/haar_basis.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <functional>
#include <vector>

namespace oracle {

using haarsim::BidomainProblem;
using haarsim::HaarBasis;
using haarsim::Medium;
using haarsim::Point;

// Independent description of wavelet i on [a,b]: breakpoints of the +1 and -1 halves.
struct Support {
  double lo, mid, hi;
  bool scaling;
};

inline Support support_of(int i, double a, double b) {
  if (i == 1) return {a, b, b, true};
  int m = 1;
  while (2 * m <= i - 1) m *= 2;
  const int k = i - m - 1;
  const double w = (b - a) / m;
  return {a + k * w, a + (k + 0.5) * w, a + (k + 1) * w, false};
}

inline double oracle_haar(const Support& s, double t) {
  if (s.scaling) return 1.0;
  if (t >= s.lo && t < s.mid) return 1.0;
  if (t >= s.mid && t < s.hi) return -1.0;
  return 0.0;
}

inline double simpson(const std::function<double(double)>& f, double lo, double hi, int panels) {
  if (hi <= lo) return 0.0;
  if (panels % 2) ++panels;
  const double h = (hi - lo) / panels;
  double s = f(lo) + f(hi);
  for (int q = 1; q < panels; ++q) s += (q % 2 ? 4.0 : 2.0) * f(lo + q * h);
  return s * h / 3.0;
}

// alpha-fold integral from a via Cauchy's repeated-integration formula,
// Simpson on each interval where h_i is constant.
inline double oracle_integral(int alpha, int i, double x, double a, double b) {
  const Support s = support_of(i, a, b);
  double fact = 1.0;
  for (int q = 2; q < alpha; ++q) fact *= q;
  auto kernel = [&](double t) { return std::pow(x - t, alpha - 1) / fact; };
  std::vector<double> cuts{a, s.lo, s.mid, s.hi, x};
  double total = 0.0;
  for (std::size_t c = 0; c + 1 < cuts.size(); ++c) {
    const double lo = std::max(a, cuts[c]);
    const double hi = std::min(x, cuts[c + 1]);
    if (hi <= lo) continue;
    const double sign = oracle_haar(s, 0.5 * (lo + hi));
    if (sign == 0.0) continue;
    total += sign * simpson(kernel, lo, hi, 10000);
  }
  return total;
}

/// Neumann basis element q (0-based) on one axis, derivative `order` at x.
inline double neumann_basis(int q, int order, double x, const HaarBasis& b) {
  if (q == 0) return order == 0 ? 1.0 : 0.0;
  return haarsim::eval_integral(2 - order, q + 1, x, b);
}

/// Dense block matrix over [alpha; beta] assembled entry by entry.
inline Eigen::MatrixXd dense_system(const BidomainProblem& p, const std::vector<int>& levels,
                                    double dt) {
  const int d = p.domain.dim;
  std::vector<HaarBasis> bases;
  std::vector<std::vector<double>> ys;
  int n = 1;
  for (int a = 0; a < d; ++a) {
    bases.emplace_back(p.domain.lo[a], p.domain.hi[a], levels[a]);
    ys.push_back(haarsim::collocation_grid(bases.back()).y);
    n *= bases.back().size();
  }
  auto split = [&](int flat) {
    std::vector<int> idx(d);
    for (int a = d - 1; a >= 0; --a) {
      idx[a] = flat % bases[a].size();
      flat /= bases[a].size();
    }
    return idx;
  };

  Eigen::MatrixXd k = Eigen::MatrixXd::Zero(2 * n, 2 * n);
  for (int pt = 0; pt < n; ++pt) {
    const auto pi = split(pt);
    Point x{0.0, 0.0, 0.0};
    for (int a = 0; a < d; ++a) x[a] = ys[a][pi[a]];
    std::vector<double> si(d), sid(d), se(d), sed(d);
    for (int a = 0; a < d; ++a) {
      const auto ci = haarsim::conductivity_at(p.conductivity, p.domain, a, Medium::intra, x);
      const auto ce = haarsim::conductivity_at(p.conductivity, p.domain, a, Medium::extra, x);
      si[a] = ci.value;
      sid[a] = ci.derivative;
      se[a] = ce.value;
      sed[a] = ce.derivative;
    }
    for (int q = 0; q < n; ++q) {
      const auto qi = split(q);
      double value = 1.0;
      std::vector<double> d1(d, 1.0), d2(d, 1.0);
      for (int a = 0; a < d; ++a) {
        const double b0 = neumann_basis(qi[a], 0, x[a], bases[a]);
        value *= b0;
        for (int c = 0; c < d; ++c) {
          d1[c] *= c == a ? neumann_basis(qi[a], 1, x[a], bases[a]) : b0;
          d2[c] *= c == a ? neumann_basis(qi[a], 2, x[a], bases[a]) : b0;
        }
      }
      double div_i = 0.0, div_e = 0.0;
      for (int a = 0; a < d; ++a) {
        div_i += si[a] * d2[a] + sid[a] * d1[a];
        div_e += se[a] * d2[a] + sed[a] * d1[a];
      }
      k(pt, q) = p.cm * value;
      k(n + pt, q) = dt * div_i;
      k(pt, n + q) = div_e;
      k(n + pt, n + q) = div_i + div_e;
    }
    // The constant u_e mode is replaced by g = sum_a (x_a - A_a)^2 / 2.
    double ge = 0.0, gi = 0.0;
    for (int a = 0; a < d; ++a) {
      const double r = x[a] - p.domain.lo[a];
      ge += se[a] + sed[a] * r;
      gi += si[a] + sid[a] * r;
    }
    k(pt, n) = ge;
    k(n + pt, n) = gi + ge;
  }
  return k;
}

/// Finite-volume solver for the 1D system with the same semi-implicit time
/// discretization: w from explicit Euler, then (v, u_e) implicitly with the
/// reaction at the old v. u_e carries zero mean via a Lagrange multiplier.
struct FdResult {
  std::vector<double> x;
  Eigen::VectorXd v, ue, w;
};

inline FdResult fd_solve_1d(const BidomainProblem& p, int cells, double dt, std::size_t steps) {
  const double lo = p.domain.lo[0], hi = p.domain.hi[0];
  const double h = (hi - lo) / cells;
  const int n = cells;
  FdResult r;
  r.x.resize(n);
  for (int i = 0; i < n; ++i) r.x[i] = lo + (i + 0.5) * h;

  auto sigma = [&](Medium m, double x) {
    return p.conductivity.along(0, m).value({x, 0.0, 0.0});
  };
  // div(s grad u) with zero flux through both ends.
  auto divergence = [&](Medium m) {
    Eigen::MatrixXd a = Eigen::MatrixXd::Zero(n, n);
    for (int i = 0; i < n; ++i) {
      if (i > 0) {
        const double s = sigma(m, lo + i * h) / (h * h);
        a(i, i - 1) += s;
        a(i, i) -= s;
      }
      if (i + 1 < n) {
        const double s = sigma(m, lo + (i + 1) * h) / (h * h);
        a(i, i + 1) += s;
        a(i, i) -= s;
      }
    }
    return a;
  };
  const Eigen::MatrixXd di = divergence(Medium::intra);
  const Eigen::MatrixXd de = divergence(Medium::extra);

  Eigen::MatrixXd sys = Eigen::MatrixXd::Zero(2 * n + 1, 2 * n + 1);
  sys.topLeftCorner(n, n) = p.cm / dt * Eigen::MatrixXd::Identity(n, n);
  sys.block(0, n, n, n) = de;
  sys.block(n, 0, n, n) = di;
  sys.block(n, n, n, n) = di + de;
  sys.block(n, 2 * n, n, 1).setOnes();
  sys.block(2 * n, n, 1, n).setOnes();
  const Eigen::PartialPivLU<Eigen::MatrixXd> lu(sys);

  r.v.resize(n);
  r.w.resize(n);
  for (int i = 0; i < n; ++i) {
    const Point x{r.x[i], 0.0, 0.0};
    r.v[i] = haarsim::initial_value(p.v0, p.domain, x);
    r.w[i] = haarsim::initial_value(p.w0[0], p.domain, x);
  }
  r.ue = Eigen::VectorXd::Zero(n);
  for (std::size_t s = 0; s < steps; ++s) {
    const double t1 = static_cast<double>(s + 1) * dt;
    Eigen::VectorXd w1(n), rhs(2 * n + 1);
    for (int i = 0; i < n; ++i) w1[i] = r.w[i] + dt * haarsim::gating_rate(p.ionic, r.v[i], r.w[i]);
    for (int i = 0; i < n; ++i) {
      const Point x{r.x[i], 0.0, 0.0};
      const double i1 = haarsim::stimulus_value(p.stimulus.intra, 1, x, t1);
      const double i2 = haarsim::stimulus_value(p.stimulus.extra, 1, x, t1);
      rhs[i] = p.cm / dt * r.v[i] + haarsim::ionic_current(p.ionic, r.v[i], w1[i]) + i2;
      rhs[n + i] = -(i1 - i2);
    }
    rhs[2 * n] = 0.0;
    const Eigen::VectorXd sol = lu.solve(rhs);
    r.v = sol.head(n);
    r.ue = sol.segment(n, n);
    r.w = w1;
  }
  return r;
}

}  // namespace oracle
