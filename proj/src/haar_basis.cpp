#include "haarsim/haar_basis.hpp"

#include "haarsim/errors.hpp"

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include <cmath>
#include <string>

namespace haarsim {

namespace {

double factorial(int n) {
  double r = 1.0;
  for (int q = 2; q <= n; ++q) r *= q;
  return r;
}

void check_index(int i, const HaarBasis& basis) {
  if (i < 1 || i > basis.size()) {
    throw DomainError("wavelet index " + std::to_string(i) + " outside 1.." +
                      std::to_string(basis.size()));
  }
}

void check_point(double x, const HaarBasis& basis) {
  if (!(x >= basis.a() && x <= basis.b())) {
    throw DomainError("point " + std::to_string(x) + " outside [" + std::to_string(basis.a()) +
                      ", " + std::to_string(basis.b()) + "]");
  }
}

}  // namespace

HaarBasis::HaarBasis(double a, double b, int level) : a_(a), b_(b), level_(level) {
  if (!(b > a) || !std::isfinite(a) || !std::isfinite(b)) {
    throw DomainError("Haar basis needs a finite interval with B > A");
  }
  if (level < 0 || level > 20) throw DomainError("resolution level must be in 0..20");
  m_max_ = 1 << level;
  dx_ = (b - a) / (2.0 * m_max_);
}

WaveletIndex wavelet_index(int i, const HaarBasis& basis) {
  check_index(i, basis);
  WaveletIndex w;
  w.i = i;
  if (i == 1) {
    w.zeta = basis.m_max();
    w.beta1 = basis.a();
    w.beta2 = basis.b();
    w.beta3 = basis.b();
    return w;
  }
  w.scaling = false;
  int j = 0;
  while ((2 << j) <= i - 1) ++j;
  w.j = j;
  w.m = 1 << j;
  w.k = i - w.m - 1;
  w.zeta = static_cast<double>(basis.m_max()) / w.m;
  const double step = w.zeta * basis.dx();
  w.beta1 = basis.a() + 2.0 * w.k * step;
  w.beta2 = basis.a() + (2.0 * w.k + 1.0) * step;
  w.beta3 = basis.a() + 2.0 * (w.k + 1) * step;
  return w;
}

double eval_haar(int i, double x, const HaarBasis& basis) {
  check_point(x, basis);
  const WaveletIndex w = wavelet_index(i, basis);
  if (w.scaling) return 1.0;
  if (x >= w.beta1 && x < w.beta2) return 1.0;
  if (x >= w.beta2 && x < w.beta3) return -1.0;
  return 0.0;
}

double eval_integral(int alpha, int i, double x, const HaarBasis& basis) {
  if (alpha < 0) throw DomainError("integration order must be non-negative");
  if (alpha == 0) return eval_haar(i, x, basis);
  check_point(x, basis);
  const WaveletIndex w = wavelet_index(i, basis);
  const double scale = 1.0 / factorial(alpha);
  if (w.scaling) return std::pow(x - basis.a(), alpha) * scale;
  if (x < w.beta1) return 0.0;
  double r = std::pow(x - w.beta1, alpha);
  if (x >= w.beta2) r -= 2.0 * std::pow(x - w.beta2, alpha);
  if (x >= w.beta3) r += std::pow(x - w.beta3, alpha);
  return r * scale;
}

CollocationGrid collocation_grid(const HaarBasis& basis) {
  const int n = basis.size();
  CollocationGrid g;
  g.x.resize(n + 1);
  g.y.resize(n);
  for (int k = 0; k <= n; ++k) g.x[k] = basis.a() + k * basis.dx();
  g.x[n] = basis.b();
  for (int k = 1; k <= n; ++k) g.y[k - 1] = 0.5 * (g.x[k - 1] + g.x[k]);
  return g;
}

OperatorMatrices assemble_matrices(const HaarBasis& basis) {
  const int n = basis.size();
  const auto grid = collocation_grid(basis);
  OperatorMatrices mats{Eigen::MatrixXd(n, n), Eigen::MatrixXd(n, n), Eigen::MatrixXd(n, n)};
  for (int i = 1; i <= n; ++i) {
    for (int k = 0; k < n; ++k) {
      const double y = grid.y[k];
      mats.H(i - 1, k) = eval_haar(i, y, basis);
      mats.P1(i - 1, k) = eval_integral(1, i, y, basis);
      mats.P2(i - 1, k) = eval_integral(2, i, y, basis);
    }
  }
  return mats;
}

double wavelet_norm_squared(int i, const HaarBasis& basis) {
  return basis.length() / wavelet_index(i, basis).m;
}

HaarCoefficients project(const std::function<double(double)>& f, const HaarBasis& basis,
                         double tol) {
  using Quadrature = boost::math::quadrature::gauss_kronrod<double, 31>;
  auto piece = [&](double lo, double hi) {
    double err = 0.0;
    double l1 = 0.0;
    const double value = Quadrature::integrate(f, lo, hi, 20, tol, &err, &l1);
    if (!std::isfinite(value) || err > 10.0 * tol * std::max(l1, hi - lo)) {
      throw NumericalError("Haar projection quadrature did not converge on [" +
                               std::to_string(lo) + ", " + std::to_string(hi) +
                               "], error estimate " + std::to_string(err),
                           err);
    }
    return value;
  };

  HaarCoefficients out{std::vector<double>(basis.size()), basis};
  for (int i = 1; i <= basis.size(); ++i) {
    const WaveletIndex w = wavelet_index(i, basis);
    const double inner = w.scaling ? piece(basis.a(), basis.b())
                                   : piece(w.beta1, w.beta2) - piece(w.beta2, w.beta3);
    out.coeffs[i - 1] = inner / wavelet_norm_squared(i, basis);
  }
  return out;
}

double reconstruct(const HaarCoefficients& c, double x) {
  check_point(x, c.basis);
  double s = 0.0;
  for (int i = 1; i <= c.basis.size(); ++i) s += c.coeffs[i - 1] * eval_haar(i, x, c.basis);
  return s;
}

}  // namespace haarsim
