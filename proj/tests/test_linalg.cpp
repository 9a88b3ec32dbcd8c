#include <doctest.h>

#include <fstream>
#include <random>
#include <string>
#include <vector>

#include "nlmc/error.hpp"
#include "nlmc/linalg.hpp"
#include "support.hpp"

using namespace nlmc;
using namespace nlmc::linalg;

namespace {

Matrix random_dense(std::mt19937& rng, Index rows, Index cols, double density) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::uniform_real_distribution<double> keep(0.0, 1.0);
  Matrix m = Matrix::Zero(rows, cols);
  for (Index i = 0; i < rows; ++i) {
    for (Index j = 0; j < cols; ++j) {
      if (keep(rng) < density) m(i, j) = u(rng);
    }
  }
  return m;
}

SparseMatrix sparse_of(const Matrix& m, bool symmetric = false) {
  return SparseMatrix(m.sparseView(), symmetric);
}

/// Graph Laplacian of a path plus a positive diagonal shift.
SparseMatrix shifted_laplacian(Index n, double shift) {
  std::vector<Triplet> t;
  for (Index i = 0; i < n; ++i) {
    t.emplace_back(i, i, shift);
    if (i + 1 < n) {
      t.emplace_back(i, i, 1.0);
      t.emplace_back(i + 1, i + 1, 1.0);
      t.emplace_back(i, i + 1, -1.0);
      t.emplace_back(i + 1, i, -1.0);
    }
  }
  return SparseMatrix::from_triplets(n, n, t, true);
}

}  // namespace

TEST_CASE("SPD solves") {
  const Vector b = Vector::LinSpaced(5, 1.0, 5.0);
  const auto id = solve_spd(SparseMatrix::identity(5), b);
  CHECK((id.x - b).cwiseAbs().maxCoeff() == 0.0);

  Matrix two(2, 2);
  two << 2.0, 1.0, 1.0, 2.0;
  Vector rhs(2);
  rhs << 3.0, 3.0;
  const auto r = solve_spd(sparse_of(two, true), rhs);
  CHECK(r.x[0] == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(r.x[1] == doctest::Approx(1.0).epsilon(1e-15));

  std::mt19937 rng(7);
  const Matrix g = random_dense(rng, 50, 50, 0.1);
  const Matrix spd = g * g.transpose() + 50.0 * Matrix::Identity(50, 50);
  const Vector x_true = Vector::LinSpaced(50, -1.0, 1.0);
  const Vector b50 = spd * x_true;
  SolveReport report;
  const Vector x = SpdSolver(sparse_of(spd, true)).solve(b50, &report);
  CHECK((spd * x - b50).norm() <= 1e-10 * b50.norm());
  CHECK(report.relative_residual <= 1e-14);

  // A large sparse system goes through the sparse factorization.
  const auto big = shifted_laplacian(3000, 1e-3);
  const SpdSolver solver(big);
  CHECK_FALSE(solver.uses_dense());
  const Vector ones = Vector::Ones(3000);
  const Vector y = solver.solve(big * ones);
  CHECK((y - ones).cwiseAbs().maxCoeff() <= 1e-8);

  Matrix indefinite(2, 2);
  indefinite << 1.0, 2.0, 2.0, 1.0;
  CHECK_THROWS_AS(SpdSolver(sparse_of(indefinite, true)), SolverError);
  Matrix skew(2, 2);
  skew << 2.0, 1.0, 0.0, 2.0;
  CHECK_THROWS_AS(SpdSolver(sparse_of(skew)), SolverError);
  CHECK_THROWS_AS(SpdSolver(SparseMatrix::identity(3)).solve(Vector::Ones(4)), SolverError);
  // Singular Laplacian without shift.
  CHECK_THROWS_AS(SpdSolver(shifted_laplacian(3000, 0.0)), SolverError);
}

TEST_CASE("saddle point solves") {
  {
    SaddleSystem sys{SparseMatrix::identity(1), SparseMatrix::identity(1), {"only"}, 0.0};
    Matrix g(1, 1);
    g << 1.0;
    const auto sol = solve_saddle(sys, g);
    CHECK(sol.primal(0, 0) == doctest::Approx(1.0));
    CHECK(sol.multipliers(0, 0) == doctest::Approx(-1.0));
    CHECK(sol.constraint_residual <= 1e-15);
  }

  // Dense KKT oracle on a random problem with several targets.
  std::mt19937 rng(11);
  const Index n = 40;
  const Index m = 5;
  const auto k = shifted_laplacian(n, 0.0);
  Matrix b = Matrix::Zero(m, n);
  for (Index r = 0; r < m; ++r) {
    for (Index j = 8 * r; j < 8 * (r + 1); ++j) b(r, j) = 1.0 / 8.0;
  }
  const Matrix targets = random_dense(rng, m, 3, 1.0);
  SaddleSystem sys{k, sparse_of(b), {}, 0.0};
  const SaddleSolver solver(sys);
  const auto sol = solver.solve(targets);

  Matrix kkt = Matrix::Zero(n + m, n + m);
  kkt.topLeftCorner(n, n) = k.dense();
  kkt.topRightCorner(n, m) = b.transpose();
  kkt.bottomLeftCorner(m, n) = b;
  Matrix rhs = Matrix::Zero(n + m, 3);
  rhs.bottomRows(m) = targets;
  const Matrix oracle = kkt.fullPivLu().solve(rhs);
  CHECK((sol.primal - oracle.topRows(n)).cwiseAbs().maxCoeff() <= 1e-10);
  CHECK((sol.multipliers - oracle.bottomRows(m)).cwiseAbs().maxCoeff() <= 1e-10);
  CHECK(sol.constraint_residual <= 1e-12);
  CHECK(sol.flow_residual <= 1e-12);
  CHECK_THROWS_AS(solver.solve(Matrix::Zero(m + 1, 1)), SolverError);

  // A duplicated constraint row is reported by label.
  Matrix dup = Matrix::Zero(3, n);
  dup.row(0) = b.row(0);
  dup.row(1) = b.row(1);
  dup.row(2) = 2.0 * b.row(0);
  const std::vector<std::string> labels{"first", "second", "third"};
  try {
    SaddleSolver bad({k, sparse_of(dup), labels, 0.0});
    FAIL("expected a rank error");
  } catch (const SolverError& e) {
    CHECK(std::string(e.what()).find("third") != std::string::npos);
  }
  Matrix empty_row = Matrix::Zero(2, n);
  empty_row(0, 0) = 1.0;
  CHECK_THROWS_AS(check_constraint_rank(sparse_of(empty_row), labels), SolverError);
  CHECK_NOTHROW(check_constraint_rank(sparse_of(b), {}));
}

TEST_CASE("triple product") {
  std::mt19937 rng(3);
  const Matrix g = random_dense(rng, 20, 20, 0.3);
  const Matrix a = g + g.transpose();
  const auto sa = sparse_of(a, true);

  const auto same = triple_product(SparseMatrix::identity(20), sa);
  CHECK((same.dense() - a).cwiseAbs().maxCoeff() <= 1e-15);

  const Matrix ones = Matrix::Ones(1, 20);
  const auto total = triple_product(sparse_of(ones), sa);
  CHECK(total.rows() == 1);
  CHECK(total.coeff(0, 0) == doctest::Approx(a.sum()).epsilon(1e-13));

  const Matrix r = random_dense(rng, 10, 20, 0.4);
  const auto p = triple_product(sparse_of(r), sa);
  const Matrix oracle = r * a * r.transpose();
  CHECK((p.dense() - oracle).cwiseAbs().maxCoeff() <= 1e-12 * std::max(1.0, oracle.cwiseAbs().maxCoeff()));
  CHECK(p.asymmetry() == 0.0);
  CHECK(p.symmetric());

  CHECK_THROWS_AS(triple_product(sparse_of(Matrix::Ones(2, 3)), sa), InputError);
}

TEST_CASE("sparse helpers") {
  Matrix a(3, 3);
  a << 4.0, -1.0, 0.0, -1.0, 4.0, -2.0, 0.0, -2.0, 5.0;
  const auto sa = sparse_of(a, true);
  CHECK(sa.max_abs() == 5.0);
  CHECK(sa.asymmetry() == 0.0);
  CHECK(sa.max_row_sum() == doctest::Approx(3.0));
  CHECK(sa.norm_inf() == doctest::Approx(7.0));

  const std::vector<int> idx{2, 0};
  const auto sub = principal_submatrix(sa, idx);
  Matrix expected(2, 2);
  expected << 5.0, 0.0, 0.0, 4.0;
  CHECK((sub.dense() - expected).cwiseAbs().maxCoeff() == 0.0);
  CHECK_THROWS_AS(principal_submatrix(sa, std::vector<int>{3}), InputError);

  const auto c = combine(2.0, sa, -1.0, SparseMatrix::identity(3));
  CHECK(c.coeff(1, 1) == 7.0);
  CHECK(c.symmetric());
  CHECK_THROWS_AS(combine(1.0, sa, 1.0, SparseMatrix::identity(2)), InputError);

  // Duplicates sum in order.
  const std::vector<Triplet> t{{0, 0, 1.0}, {0, 0, 2.5}, {1, 0, -1.0}};
  const auto s = SparseMatrix::from_triplets(2, 2, t);
  CHECK(s.coeff(0, 0) == 3.5);
  CHECK(s.transpose().coeff(0, 1) == -1.0);
  CHECK(SparseMatrix::diagonal(Vector::Constant(3, 2.0)).coeff(2, 2) == 2.0);
}

TEST_CASE("difference form of an operator") {
  std::mt19937 rng(9);
  std::uniform_real_distribution<double> u(-3.0, 3.0);
  const Index n = 200;
  const auto lap = shifted_laplacian(n, 0.0);
  const DifferenceOperator op(lap);
  CHECK(op.size() == n);
  CHECK(op.excess().cwiseAbs().maxCoeff() == 0.0);
  Vector x(n);
  for (Index i = 0; i < n; ++i) x[i] = u(rng);
  CHECK((op.apply(x) - lap * x).cwiseAbs().maxCoeff() <= 1e-13);
  CHECK(op.apply(Vector::Constant(n, 5.0)).cwiseAbs().maxCoeff() == 0.0);

  // A genuine row excess is kept.
  const auto shifted = shifted_laplacian(n, 0.5);
  const DifferenceOperator kept(shifted);
  CHECK(kept.excess().minCoeff() == doctest::Approx(0.5));
  CHECK((kept.apply(x) - shifted * x).cwiseAbs().maxCoeff() <= 1e-13);

  // Large couplings between nearly equal values: the total stays exact.
  std::vector<Triplet> t;
  for (Index i = 0; i + 1 < n; ++i) {
    const double w = i % 7 == 0 ? 5.4e4 : 1e-6 * (1.0 + i);
    t.emplace_back(i, i, w);
    t.emplace_back(i + 1, i + 1, w);
    t.emplace_back(i, i + 1, -w);
    t.emplace_back(i + 1, i, -w);
  }
  const auto stiff = SparseMatrix::from_triplets(n, n, t, true);
  const Vector y = DifferenceOperator(stiff).apply(x);
  CHECK(std::abs(y.sum()) <= 1e-14 * y.cwiseAbs().sum());

  CHECK_THROWS_AS(DifferenceOperator(sparse_of(Matrix::Ones(2, 3))), InputError);
  CHECK_THROWS_AS(op.apply(Vector::Ones(3)), InputError);
}

TEST_CASE("coordinate file round trip") {
  const auto dir = test_support::scratch_dir("linalg_io");
  std::mt19937 rng(5);
  const Matrix m = random_dense(rng, 7, 9, 0.4) * 1e-7;
  const auto sm = sparse_of(m);
  write_coordinate(dir / "m.txt", sm);
  const auto back = read_coordinate(dir / "m.txt");
  CHECK(back.rows() == 7);
  CHECK(back.cols() == 9);
  CHECK((back.dense() - m).cwiseAbs().maxCoeff() == 0.0);

  const Vector v = Vector::LinSpaced(6, -1.0 / 3.0, 2.0 / 7.0);
  write_vector(dir / "v.txt", v);
  CHECK((read_vector(dir / "v.txt") - v).cwiseAbs().maxCoeff() == 0.0);

  CHECK_THROWS_AS(read_coordinate(dir / "absent.txt"), InputError);
  {
    std::ofstream bad(dir / "bad.txt");
    bad << "# 2 2\n0 zero 1\n";
  }
  CHECK_THROWS_AS(read_coordinate(dir / "bad.txt"), InputError);
}
