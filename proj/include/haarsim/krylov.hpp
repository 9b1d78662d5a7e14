#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <memory>
#include <vector>

namespace haarsim {

/// Square linear map on R^dim.
class LinearOperator {
 public:
  virtual ~LinearOperator() = default;
  virtual std::size_t dim() const = 0;
  /// y = A x; y is resized by the callee.
  virtual void apply(const Eigen::VectorXd& x, Eigen::VectorXd& y) const = 0;

  Eigen::VectorXd operator()(const Eigen::VectorXd& x) const {
    Eigen::VectorXd y;
    apply(x, y);
    return y;
  }
};

using OperatorPtr = std::shared_ptr<const LinearOperator>;

class DenseOperator final : public LinearOperator {
 public:
  explicit DenseOperator(Eigen::MatrixXd a);
  std::size_t dim() const override { return static_cast<std::size_t>(a_.rows()); }
  void apply(const Eigen::VectorXd& x, Eigen::VectorXd& y) const override;
  const Eigen::MatrixXd& matrix() const { return a_; }

 private:
  Eigen::MatrixXd a_;
};

/// (F_0 (x) F_1 (x) ... ) x by axis-by-axis contraction. Vectors are laid out
/// row-major over the axes (axis 0 slowest). Factors may be rectangular.
Eigen::VectorXd kron_apply(const std::vector<const Eigen::MatrixXd*>& factors,
                           const Eigen::VectorXd& x);
Eigen::VectorXd kron_apply(const std::vector<Eigen::MatrixXd>& factors, const Eigen::VectorXd& x);

/// Explicit Kronecker product; only for small oracles and tests.
Eigen::MatrixXd kron_dense(const std::vector<Eigen::MatrixXd>& factors);

/// y = sum_t diag(s_t) (F_t0 (x) F_t1 ...) x  +  sum_c u_c x[col_c].
/// Factor matrices are shared between terms; an empty scaling means all ones.
class KroneckerSumOperator final : public LinearOperator {
 public:
  using Factor = std::shared_ptr<const Eigen::MatrixXd>;

  explicit KroneckerSumOperator(std::size_t dim) : dim_(dim) {}

  void add_term(std::vector<Factor> factors, Eigen::VectorXd scaling = {}, double coeff = 1.0);
  /// Rank-one column contribution u * e_col^T.
  void add_column(std::size_t col, Eigen::VectorXd u);

  std::size_t dim() const override { return dim_; }
  void apply(const Eigen::VectorXd& x, Eigen::VectorXd& y) const override;
  std::size_t term_count() const { return terms_.size(); }

 private:
  struct Term {
    std::vector<Factor> factors;
    Eigen::VectorXd scaling;
    double coeff;
  };
  struct Column {
    std::size_t col;
    Eigen::VectorXd u;
  };
  std::size_t dim_;
  std::vector<Term> terms_;
  std::vector<Column> columns_;
};

/// [[A, B], [C, D]] over a split of the unknowns into two halves of sizes
/// A.dim() and D.dim(). Null blocks are zero.
class BlockOperator2x2 final : public LinearOperator {
 public:
  BlockOperator2x2(OperatorPtr a, OperatorPtr b, OperatorPtr c, OperatorPtr d,
                   std::size_t n0, std::size_t n1);
  std::size_t dim() const override { return n0_ + n1_; }
  void apply(const Eigen::VectorXd& x, Eigen::VectorXd& y) const override;

 private:
  OperatorPtr a_, b_, c_, d_;
  std::size_t n0_, n1_;
};

/// Materialize an operator column by column (tests and small systems only).
Eigen::MatrixXd to_dense(const LinearOperator& op);

struct GmresConfig {
  double tol = 1e-10;
  int restart = 50;
  int max_iters = 500;
  bool warm_start = true;

  void validate() const;
  bool operator==(const GmresConfig&) const = default;
};

struct SolveStats {
  int iterations = 0;
  double final_relative_residual = 0.0;
  bool converged = false;
};

struct SolveResult {
  Eigen::VectorXd x;
  SolveStats stats;
};

/// Restarted GMRES (modified Gram-Schmidt Arnoldi, Givens least squares).
/// Convergence means ||b - A x|| / max(||b||, 1) <= tol, measured on the true
/// residual. `precond`, when given, is applied on the right (A M y = b, x = M y).
/// A zero right-hand side returns x = 0 without iterating.
SolveResult gmres_solve(const LinearOperator& op, const Eigen::VectorXd& b,
                        const Eigen::VectorXd& x0, const GmresConfig& cfg,
                        const LinearOperator* precond = nullptr);

}  // namespace haarsim
