#pragma once

#include <Eigen/Dense>

#include <functional>
#include <vector>

namespace haarsim {

/// Haar family on [A,B] at maximum resolution level J: M = 2^J, 2M wavelets,
/// 2M uniform subintervals of width dx = (B-A)/(2M).
class HaarBasis {
 public:
  HaarBasis(double a, double b, int level);

  double a() const { return a_; }
  double b() const { return b_; }
  int level() const { return level_; }
  int m_max() const { return m_max_; }
  int size() const { return 2 * m_max_; }
  double dx() const { return dx_; }
  double length() const { return b_ - a_; }

  bool operator==(const HaarBasis&) const = default;

 private:
  double a_;
  double b_;
  int level_;
  int m_max_;
  double dx_;
};

/// Dilation/translation decomposition of wavelet number i (1-based).
/// For i = 1 (the scaling function) `scaling` is set, j = k = 0, m = 1,
/// beta1 = A and beta2 = beta3 = B.
struct WaveletIndex {
  int i = 1;
  int j = 0;
  int k = 0;
  int m = 1;
  double zeta = 1.0;
  double beta1 = 0.0;
  double beta2 = 0.0;
  double beta3 = 0.0;
  bool scaling = true;
};

WaveletIndex wavelet_index(int i, const HaarBasis& basis);

/// h_i(x). The scaling function is closed at B so endpoint queries are defined.
double eval_haar(int i, double x, const HaarBasis& basis);

/// alpha-fold iterated integral p_{alpha,i}(x) from A, in closed form.
/// alpha = 0 is h_i itself.
double eval_integral(int alpha, int i, double x, const HaarBasis& basis);

struct CollocationGrid {
  std::vector<double> x;  ///< 2M+1 grid points
  std::vector<double> y;  ///< 2M collocation midpoints
};

CollocationGrid collocation_grid(const HaarBasis& basis);

/// H(i,k) = h_i(y_k), P1(i,k) = p_{1,i}(y_k), P2(i,k) = p_{2,i}(y_k); rows are wavelets.
struct OperatorMatrices {
  Eigen::MatrixXd H;
  Eigen::MatrixXd P1;
  Eigen::MatrixXd P2;
};

OperatorMatrices assemble_matrices(const HaarBasis& basis);

/// Truncated Haar series: f ~ sum_i coeffs[i-1] h_i.
struct HaarCoefficients {
  std::vector<double> coeffs;
  HaarBasis basis;
};

/// Squared L2 norm of h_i on [A,B]: (B-A)/m.
double wavelet_norm_squared(int i, const HaarBasis& basis);

/// Orthogonal projection onto the first 2M wavelets. Each coefficient is
/// <f,h_i>/<h_i,h_i>, integrated piecewise over the constancy intervals of h_i
/// with adaptive Gauss-Kronrod to relative tolerance `tol`.
/// Throws NumericalError if a piece does not converge.
HaarCoefficients project(const std::function<double(double)>& f, const HaarBasis& basis,
                         double tol = 1e-12);

double reconstruct(const HaarCoefficients& c, double x);

}  // namespace haarsim
