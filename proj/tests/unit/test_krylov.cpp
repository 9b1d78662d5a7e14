#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "haarsim/errors.hpp"
#include "haarsim/krylov.hpp"

#include <random>

using namespace haarsim;

namespace {

Eigen::MatrixXd random_matrix(std::mt19937& rng, int rows, int cols) {
  std::normal_distribution<double> n(0.0, 1.0);
  Eigen::MatrixXd m(rows, cols);
  for (int i = 0; i < rows; ++i)
    for (int j = 0; j < cols; ++j) m(i, j) = n(rng);
  return m;
}

Eigen::VectorXd random_vector(std::mt19937& rng, int n) { return random_matrix(rng, n, 1).col(0); }

Eigen::MatrixXd random_spd(std::mt19937& rng, int n) {
  const Eigen::MatrixXd a = random_matrix(rng, n, n);
  return a * a.transpose() + n * Eigen::MatrixXd::Identity(n, n);
}

// Textbook Kronecker product, written out entry by entry.
Eigen::MatrixXd kron2(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  Eigen::MatrixXd k(a.rows() * b.rows(), a.cols() * b.cols());
  for (int i = 0; i < a.rows(); ++i)
    for (int j = 0; j < a.cols(); ++j)
      for (int p = 0; p < b.rows(); ++p)
        for (int q = 0; q < b.cols(); ++q) k(i * b.rows() + p, j * b.cols() + q) = a(i, j) * b(p, q);
  return k;
}

}  // namespace

TEST_CASE("GMRES solves small known systems") {
  GmresConfig cfg;
  Eigen::MatrixXd a(2, 2);
  a << 4, 1, 2, 3;
  Eigen::VectorXd b(2);
  b << 1, 2;
  const auto r = gmres_solve(DenseOperator(a), b, Eigen::VectorXd::Zero(2), cfg);
  CHECK(r.stats.converged);
  CHECK(r.x[0] == doctest::Approx(0.1));
  CHECK(r.x[1] == doctest::Approx(0.6));
  CHECK(r.stats.iterations <= 2);

  const auto id = gmres_solve(DenseOperator(Eigen::MatrixXd::Identity(5, 5)), Eigen::VectorXd::Ones(5),
                              Eigen::VectorXd::Zero(5), cfg);
  CHECK(id.stats.iterations == 1);
  CHECK((id.x - Eigen::VectorXd::Ones(5)).norm() <= 1e-14);
}

TEST_CASE("zero right-hand side returns zero without iterating") {
  const auto r = gmres_solve(DenseOperator(Eigen::MatrixXd::Identity(3, 3)), Eigen::VectorXd::Zero(3),
                             Eigen::VectorXd::Ones(3), GmresConfig{});
  CHECK(r.stats.iterations == 0);
  CHECK(r.stats.converged);
  CHECK(r.x.norm() == 0.0);
}

TEST_CASE("SPD systems terminate within their dimension") {
  std::mt19937 rng(11);
  for (int trial = 0; trial < 10; ++trial) {
    const int n = 20 + 18 * trial;
    const Eigen::MatrixXd a = random_spd(rng, n);
    const Eigen::VectorXd b = random_vector(rng, n);
    GmresConfig cfg;
    cfg.restart = n;
    cfg.max_iters = 2 * n;
    const auto r = gmres_solve(DenseOperator(a), b, Eigen::VectorXd::Zero(n), cfg);
    CHECK(r.stats.converged);
    CHECK(r.stats.iterations <= n);
    CHECK((b - a * r.x).norm() / std::max(b.norm(), 1.0) <= 1e-10);
  }
}

TEST_CASE("solution is invariant under scaling of the system") {
  std::mt19937 rng(5);
  const int n = 40;
  const Eigen::MatrixXd a = random_matrix(rng, n, n) + 10.0 * Eigen::MatrixXd::Identity(n, n);
  const Eigen::VectorXd b = random_vector(rng, n);
  GmresConfig cfg;
  cfg.tol = 1e-13;
  const auto x1 = gmres_solve(DenseOperator(a), b, Eigen::VectorXd::Zero(n), cfg).x;
  for (double c : {1e-3, 7.5, 1e4}) {
    const auto x2 = gmres_solve(DenseOperator(c * a), c * b, Eigen::VectorXd::Zero(n), cfg).x;
    CHECK((x1 - x2).norm() / x1.norm() <= 1e-9);
  }
}

TEST_CASE("solution is linear in the right-hand side") {
  std::mt19937 rng(6);
  const int n = 30;
  const Eigen::MatrixXd a = random_matrix(rng, n, n) + 8.0 * Eigen::MatrixXd::Identity(n, n);
  const Eigen::VectorXd b1 = random_vector(rng, n), b2 = random_vector(rng, n);
  GmresConfig cfg;
  cfg.tol = 1e-13;
  DenseOperator op(a);
  const Eigen::VectorXd z = Eigen::VectorXd::Zero(n);
  const Eigen::VectorXd x = gmres_solve(op, 2.0 * b1 - 3.0 * b2, z, cfg).x;
  const Eigen::VectorXd y = 2.0 * gmres_solve(op, b1, z, cfg).x - 3.0 * gmres_solve(op, b2, z, cfg).x;
  CHECK((x - y).norm() / x.norm() <= 1e-10);
}

TEST_CASE("restarts still converge on a nonsymmetric system") {
  std::mt19937 rng(8);
  const int n = 60;
  const Eigen::MatrixXd a = random_matrix(rng, n, n) / std::sqrt(double(n)) + 3.0 * Eigen::MatrixXd::Identity(n, n);
  const Eigen::VectorXd b = random_vector(rng, n);
  GmresConfig cfg;
  cfg.restart = 5;
  cfg.max_iters = 400;
  const auto r = gmres_solve(DenseOperator(a), b, Eigen::VectorXd::Zero(n), cfg);
  CHECK(r.stats.converged);
  CHECK((b - a * r.x).norm() / b.norm() <= 1e-10);
}

TEST_CASE("non-convergence is reported, not thrown") {
  std::mt19937 rng(9);
  const int n = 50;
  const Eigen::MatrixXd a = random_matrix(rng, n, n);
  GmresConfig cfg;
  cfg.restart = 2;
  cfg.max_iters = 3;
  const auto r = gmres_solve(DenseOperator(a), random_vector(rng, n), Eigen::VectorXd::Zero(n), cfg);
  CHECK_FALSE(r.stats.converged);
  CHECK(r.stats.iterations == 3);
  CHECK(r.stats.final_relative_residual > 1e-10);
}

TEST_CASE("warm start from the exact solution needs no iterations") {
  std::mt19937 rng(10);
  const int n = 12;
  const Eigen::MatrixXd a = random_spd(rng, n);
  const Eigen::VectorXd x = random_vector(rng, n);
  const auto r = gmres_solve(DenseOperator(a), a * x, x, GmresConfig{});
  CHECK(r.stats.iterations == 0);
  CHECK(r.stats.converged);
}

TEST_CASE("right preconditioning with the exact inverse takes one iteration") {
  std::mt19937 rng(12);
  const int n = 25;
  const Eigen::MatrixXd a = random_matrix(rng, n, n) + 5.0 * Eigen::MatrixXd::Identity(n, n);
  const Eigen::VectorXd b = random_vector(rng, n);
  const DenseOperator inv(a.inverse());
  const auto r = gmres_solve(DenseOperator(a), b, Eigen::VectorXd::Zero(n), GmresConfig{}, &inv);
  CHECK(r.stats.iterations == 1);
  CHECK((a * r.x - b).norm() / b.norm() <= 1e-10);
}

TEST_CASE("invalid GMRES settings") {
  GmresConfig cfg;
  cfg.tol = 0.0;
  CHECK_THROWS_AS(cfg.validate(), DomainError);
  cfg = GmresConfig{};
  cfg.restart = 0;
  CHECK_THROWS_AS(cfg.validate(), DomainError);
  cfg = GmresConfig{};
  cfg.max_iters = 0;
  CHECK_THROWS_AS(cfg.validate(), DomainError);
  CHECK_THROWS_AS(DenseOperator(Eigen::MatrixXd::Zero(2, 3)), DomainError);
}

TEST_CASE("Kronecker apply matches explicit products") {
  std::mt19937 rng(13);
  std::uniform_int_distribution<int> size(1, 4);
  for (int trial = 0; trial < 30; ++trial) {
    const int axes = 1 + trial % 3;
    std::vector<Eigen::MatrixXd> f;
    int cols = 1;
    for (int a = 0; a < axes; ++a) {
      f.push_back(random_matrix(rng, size(rng), size(rng)));
      cols *= static_cast<int>(f.back().cols());
    }
    Eigen::MatrixXd k = f[0];
    for (int a = 1; a < axes; ++a) k = kron2(k, f[a]);
    const Eigen::VectorXd x = random_vector(rng, cols);
    const Eigen::VectorXd want = k * x;
    CHECK((kron_apply(f, x) - want).lpNorm<Eigen::Infinity>() <= 1e-12 * std::max(1.0, want.norm()));
    CHECK((kron_dense(f) - k).lpNorm<Eigen::Infinity>() <= 1e-14);
  }
  CHECK_THROWS_AS(kron_apply(std::vector<Eigen::MatrixXd>{}, Eigen::VectorXd::Ones(1)), DomainError);
}

TEST_CASE("Kronecker sum operator with scalings and columns") {
  std::mt19937 rng(14);
  auto share = [](Eigen::MatrixXd m) { return std::make_shared<const Eigen::MatrixXd>(std::move(m)); };
  const auto a = share(random_matrix(rng, 3, 3));
  const auto b = share(random_matrix(rng, 4, 4));
  const auto c = share(random_matrix(rng, 4, 4));
  const Eigen::VectorXd s = random_vector(rng, 12);
  const Eigen::VectorXd u = random_vector(rng, 12);
  KroneckerSumOperator op(12);
  op.add_term({a, b});
  op.add_term({a, c}, s, -2.5);
  op.add_column(7, u);
  CHECK(op.term_count() == 2);

  Eigen::MatrixXd dense = kron2(*a, *b) - 2.5 * s.asDiagonal() * kron2(*a, *c);
  dense.col(7) += u;
  CHECK((to_dense(op) - dense).lpNorm<Eigen::Infinity>() <= 1e-12);
  CHECK_THROWS_AS(op.add_column(12, u), DomainError);
}

TEST_CASE("2x2 block operator") {
  std::mt19937 rng(15);
  const Eigen::MatrixXd a = random_matrix(rng, 3, 3), b = random_matrix(rng, 3, 3),
                        d = random_matrix(rng, 3, 3);
  const BlockOperator2x2 op(std::make_shared<DenseOperator>(a), std::make_shared<DenseOperator>(b), nullptr,
                            std::make_shared<DenseOperator>(d), 3, 3);
  Eigen::MatrixXd want = Eigen::MatrixXd::Zero(6, 6);
  want.topLeftCorner(3, 3) = a;
  want.topRightCorner(3, 3) = b;
  want.bottomRightCorner(3, 3) = d;
  CHECK((to_dense(op) - want).lpNorm<Eigen::Infinity>() == 0.0);
}
