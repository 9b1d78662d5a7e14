#include "haarsim/krylov.hpp"

#include "haarsim/errors.hpp"

#include <cmath>
#include <string>

namespace haarsim {

namespace {

using RowMajor = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

void check_size(std::size_t got, std::size_t want, const char* what) {
  if (got != want) {
    throw DomainError(std::string(what) + ": size " + std::to_string(got) + ", expected " +
                      std::to_string(want));
  }
}

}  // namespace

DenseOperator::DenseOperator(Eigen::MatrixXd a) : a_(std::move(a)) {
  if (a_.rows() != a_.cols()) throw DomainError("dense operator must be square");
}

void DenseOperator::apply(const Eigen::VectorXd& x, Eigen::VectorXd& y) const {
  check_size(static_cast<std::size_t>(x.size()), dim(), "dense apply");
  y.noalias() = a_ * x;
}

Eigen::VectorXd kron_apply(const std::vector<const Eigen::MatrixXd*>& factors,
                           const Eigen::VectorXd& x) {
  if (factors.empty()) throw DomainError("kron_apply needs at least one factor");
  std::vector<Eigen::Index> shape;
  Eigen::Index total = 1;
  for (const auto* f : factors) {
    shape.push_back(f->cols());
    total *= f->cols();
  }
  check_size(static_cast<std::size_t>(x.size()), static_cast<std::size_t>(total), "kron_apply");

  Eigen::VectorXd cur = x;
  Eigen::VectorXd next;
  for (std::size_t a = 0; a < factors.size(); ++a) {
    const Eigen::MatrixXd& f = *factors[a];
    Eigen::Index pre = 1;
    Eigen::Index post = 1;
    for (std::size_t b = 0; b < a; ++b) pre *= shape[b];
    for (std::size_t b = a + 1; b < shape.size(); ++b) post *= shape[b];
    const Eigen::Index in = shape[a];
    const Eigen::Index out = f.rows();
    next.resize(pre * out * post);
    for (Eigen::Index p = 0; p < pre; ++p) {
      Eigen::Map<const RowMajor> xs(cur.data() + p * in * post, in, post);
      Eigen::Map<RowMajor> ys(next.data() + p * out * post, out, post);
      ys.noalias() = f * xs;
    }
    shape[a] = out;
    cur.swap(next);
  }
  return cur;
}

Eigen::VectorXd kron_apply(const std::vector<Eigen::MatrixXd>& factors, const Eigen::VectorXd& x) {
  std::vector<const Eigen::MatrixXd*> ptrs;
  for (const auto& f : factors) ptrs.push_back(&f);
  return kron_apply(ptrs, x);
}

Eigen::MatrixXd kron_dense(const std::vector<Eigen::MatrixXd>& factors) {
  if (factors.empty()) throw DomainError("kron_dense needs at least one factor");
  Eigen::MatrixXd acc = factors.front();
  for (std::size_t t = 1; t < factors.size(); ++t) {
    const Eigen::MatrixXd& f = factors[t];
    Eigen::MatrixXd next(acc.rows() * f.rows(), acc.cols() * f.cols());
    for (Eigen::Index i = 0; i < acc.rows(); ++i)
      for (Eigen::Index j = 0; j < acc.cols(); ++j)
        next.block(i * f.rows(), j * f.cols(), f.rows(), f.cols()) = acc(i, j) * f;
    acc.swap(next);
  }
  return acc;
}

void KroneckerSumOperator::add_term(std::vector<Factor> factors, Eigen::VectorXd scaling,
                                    double coeff) {
  std::size_t rows = 1;
  std::size_t cols = 1;
  for (const auto& f : factors) {
    rows *= static_cast<std::size_t>(f->rows());
    cols *= static_cast<std::size_t>(f->cols());
  }
  check_size(rows, dim_, "kronecker term rows");
  check_size(cols, dim_, "kronecker term cols");
  if (scaling.size() != 0) check_size(static_cast<std::size_t>(scaling.size()), dim_, "scaling");
  terms_.push_back(Term{std::move(factors), std::move(scaling), coeff});
}

void KroneckerSumOperator::add_column(std::size_t col, Eigen::VectorXd u) {
  if (col >= dim_) throw DomainError("column index out of range");
  check_size(static_cast<std::size_t>(u.size()), dim_, "column vector");
  columns_.push_back(Column{col, std::move(u)});
}

void KroneckerSumOperator::apply(const Eigen::VectorXd& x, Eigen::VectorXd& y) const {
  check_size(static_cast<std::size_t>(x.size()), dim_, "kronecker apply");
  y = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(dim_));
  std::vector<const Eigen::MatrixXd*> ptrs;
  for (const auto& t : terms_) {
    ptrs.clear();
    for (const auto& f : t.factors) ptrs.push_back(f.get());
    Eigen::VectorXd z = kron_apply(ptrs, x);
    if (t.scaling.size() != 0) {
      y.array() += t.coeff * t.scaling.array() * z.array();
    } else {
      y += t.coeff * z;
    }
  }
  for (const auto& c : columns_) y += x[static_cast<Eigen::Index>(c.col)] * c.u;
}

BlockOperator2x2::BlockOperator2x2(OperatorPtr a, OperatorPtr b, OperatorPtr c, OperatorPtr d,
                                   std::size_t n0, std::size_t n1)
    : a_(std::move(a)), b_(std::move(b)), c_(std::move(c)), d_(std::move(d)), n0_(n0), n1_(n1) {
  if (a_) check_size(a_->dim(), n0_, "block (0,0)");
  if (d_) check_size(d_->dim(), n1_, "block (1,1)");
  if ((b_ || c_) && n0_ != n1_) {
    throw DomainError("off-diagonal blocks require equal block sizes");
  }
  if (b_) check_size(b_->dim(), n0_, "block (0,1)");
  if (c_) check_size(c_->dim(), n0_, "block (1,0)");
}

void BlockOperator2x2::apply(const Eigen::VectorXd& x, Eigen::VectorXd& y) const {
  check_size(static_cast<std::size_t>(x.size()), dim(), "block apply");
  const auto n0 = static_cast<Eigen::Index>(n0_);
  const auto n1 = static_cast<Eigen::Index>(n1_);
  const Eigen::VectorXd x0 = x.head(n0);
  const Eigen::VectorXd x1 = x.tail(n1);
  y = Eigen::VectorXd::Zero(n0 + n1);
  Eigen::VectorXd t;
  if (a_) { a_->apply(x0, t); y.head(n0) += t; }
  if (b_) { b_->apply(x1, t); y.head(n0) += t; }
  if (c_) { c_->apply(x0, t); y.tail(n1) += t; }
  if (d_) { d_->apply(x1, t); y.tail(n1) += t; }
}

Eigen::MatrixXd to_dense(const LinearOperator& op) {
  const auto n = static_cast<Eigen::Index>(op.dim());
  Eigen::MatrixXd m(n, n);
  Eigen::VectorXd e = Eigen::VectorXd::Zero(n);
  Eigen::VectorXd col;
  for (Eigen::Index j = 0; j < n; ++j) {
    e[j] = 1.0;
    op.apply(e, col);
    m.col(j) = col;
    e[j] = 0.0;
  }
  return m;
}

void GmresConfig::validate() const {
  if (!(tol > 0.0)) throw DomainError("GMRES tolerance must be positive");
  if (restart < 1) throw DomainError("GMRES restart must be at least 1");
  if (max_iters < 1) throw DomainError("GMRES max_iters must be at least 1");
}

SolveResult gmres_solve(const LinearOperator& op, const Eigen::VectorXd& b,
                        const Eigen::VectorXd& x0, const GmresConfig& cfg,
                        const LinearOperator* precond) {
  cfg.validate();
  const auto n = static_cast<Eigen::Index>(op.dim());
  check_size(static_cast<std::size_t>(b.size()), op.dim(), "gmres rhs");
  if (precond) check_size(precond->dim(), op.dim(), "gmres preconditioner");

  SolveResult out;
  const double bnorm = b.norm();
  if (bnorm == 0.0) {
    out.x = Eigen::VectorXd::Zero(n);
    out.stats = SolveStats{0, 0.0, true};
    return out;
  }
  const double scale = std::max(bnorm, 1.0);

  Eigen::VectorXd x;
  if (x0.size() == 0) {
    x = Eigen::VectorXd::Zero(n);
  } else {
    check_size(static_cast<std::size_t>(x0.size()), op.dim(), "gmres initial guess");
    x = x0;
  }

  Eigen::VectorXd r = b - op(x);
  double rel = r.norm() / scale;
  int iters = 0;
  const int m = cfg.restart;

  Eigen::MatrixXd v(n, m + 1);
  Eigen::MatrixXd h = Eigen::MatrixXd::Zero(m + 1, m);
  Eigen::VectorXd cs(m), sn(m), g(m + 1);
  Eigen::VectorXd w, z;

  while (rel > cfg.tol && iters < cfg.max_iters) {
    const double beta = r.norm();
    v.col(0) = r / beta;
    g.setZero();
    g[0] = beta;
    h.setZero();
    int k = 0;
    bool breakdown = false;
    for (int j = 0; j < m && iters < cfg.max_iters; ++j) {
      if (precond) {
        precond->apply(v.col(j), z);
        op.apply(z, w);
      } else {
        op.apply(v.col(j), w);
      }
      const double wnorm0 = w.norm();
      for (int i = 0; i <= j; ++i) {
        h(i, j) = w.dot(v.col(i));
        w -= h(i, j) * v.col(i);
      }
      h(j + 1, j) = w.norm();
      ++iters;

      for (int i = 0; i < j; ++i) {
        const double t = cs[i] * h(i, j) + sn[i] * h(i + 1, j);
        h(i + 1, j) = -sn[i] * h(i, j) + cs[i] * h(i + 1, j);
        h(i, j) = t;
      }
      const double den = std::hypot(h(j, j), h(j + 1, j));
      cs[j] = den == 0.0 ? 1.0 : h(j, j) / den;
      sn[j] = den == 0.0 ? 0.0 : h(j + 1, j) / den;
      const double sub = h(j + 1, j);
      h(j, j) = cs[j] * h(j, j) + sn[j] * sub;
      h(j + 1, j) = 0.0;
      g[j + 1] = -sn[j] * g[j];
      g[j] = cs[j] * g[j];
      k = j + 1;

      if (sub <= 1e-14 * std::max(wnorm0, 1e-300)) {
        breakdown = true;
        break;
      }
      v.col(j + 1) = w / sub;
      if (std::abs(g[j + 1]) / scale <= cfg.tol) break;
    }

    // Back substitution on the rotated Hessenberg factor; singular diagonal
    // entries (exact breakdown on a singular operator) contribute nothing.
    Eigen::VectorXd y = Eigen::VectorXd::Zero(k);
    for (int i = k - 1; i >= 0; --i) {
      double s = g[i];
      for (int q = i + 1; q < k; ++q) s -= h(i, q) * y[q];
      y[i] = h(i, i) != 0.0 ? s / h(i, i) : 0.0;
    }
    Eigen::VectorXd update = v.leftCols(k) * y;
    if (precond) {
      precond->apply(update, z);
      x += z;
    } else {
      x += update;
    }
    r = b - op(x);
    rel = r.norm() / scale;
    if (breakdown) break;
  }

  out.x = std::move(x);
  out.stats = SolveStats{iters, rel, rel <= cfg.tol};
  return out;
}

}  // namespace haarsim
