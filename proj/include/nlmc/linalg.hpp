#pragma once

#include <filesystem>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Sparse>

namespace nlmc::linalg {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using Triplet = Eigen::Triplet<double>;
using EigenSparse = Eigen::SparseMatrix<double>;
using Index = Eigen::Index;

/// Compressed sparse matrix with a symmetry flag. The flag is only set by
/// constructors that produce exactly symmetric storage.
class SparseMatrix {
 public:
  SparseMatrix() = default;
  explicit SparseMatrix(EigenSparse m, bool symmetric = false);

  /// Duplicate entries are summed in input order, so assembly is deterministic.
  static SparseMatrix from_triplets(Index rows, Index cols, std::span<const Triplet> entries,
                                    bool symmetric = false);
  static SparseMatrix identity(Index n);
  static SparseMatrix diagonal(const Vector& d);

  Index rows() const { return m_.rows(); }
  Index cols() const { return m_.cols(); }
  Index nonzeros() const { return m_.nonZeros(); }
  bool symmetric() const { return symmetric_; }
  const EigenSparse& eigen() const { return m_; }

  double coeff(Index i, Index j) const { return m_.coeff(i, j); }
  double max_abs() const;
  /// max |A_ij − A_ji|.
  double asymmetry() const;
  /// max_i |Σ_j A_ij|.
  double max_row_sum() const;
  /// Infinity norm (max absolute row sum).
  double norm_inf() const;

  Vector operator*(const Vector& x) const { return m_ * x; }
  SparseMatrix transpose() const;
  Matrix dense() const { return Matrix(m_); }

 private:
  EigenSparse m_;
  bool symmetric_ = false;
};

/// alpha·A + beta·B; symmetric when both inputs are.
SparseMatrix combine(double alpha, const SparseMatrix& a, double beta, const SparseMatrix& b);

/// R·A·Rᵀ. For symmetric A the result is symmetrized so that it is exactly
/// symmetric in floating point.
SparseMatrix triple_product(const SparseMatrix& r, const SparseMatrix& a);

/// A restricted to the rows and columns in `indices` (in that order). With a
/// zero-Dirichlet exterior this is the eliminated operator.
SparseMatrix principal_submatrix(const SparseMatrix& a, std::span<const int> indices);

/// A square operator applied as couplings to neighbour differences,
/// y_i = Σ_{j≠i} a_ij (x_j − x_i) + e_i x_i, where e_i = Σ_j a_ij is the
/// row excess. An excess below 1e-12 of the row's absolute sum is treated as
/// round-off and dropped. For a symmetric operator every coupling enters two
/// rows with exactly opposite signs, so Σ_i y_i has no cancellation error
/// proportional to |A|·|x|.
class DifferenceOperator {
 public:
  explicit DifferenceOperator(const SparseMatrix& a);

  Vector apply(const Vector& x) const;
  const Vector& excess() const { return excess_; }
  Index size() const { return a_.rows(); }

 private:
  SparseMatrix a_;
  Vector excess_;
};

// ---------------------------------------------------------------------------
// Direct solvers
// ---------------------------------------------------------------------------

struct SolveReport {
  double residual = 0.0;           ///< ‖Ax − b‖₂
  double relative_residual = 0.0;  ///< residual / (‖b‖₂ + ‖A‖∞‖x‖₂)
};

/// Cholesky factorization of a symmetric positive definite matrix, reusable
/// across right-hand sides. Small dense-ish matrices go to a dense factor.
/// Throws SolverError when the matrix is not positive definite.
class SpdSolver {
 public:
  explicit SpdSolver(const SparseMatrix& a);
  ~SpdSolver();
  SpdSolver(SpdSolver&&) noexcept;
  SpdSolver& operator=(SpdSolver&&) noexcept;

  Vector solve(const Vector& b, SolveReport* report = nullptr) const;
  bool uses_dense() const { return dense_; }

 private:
  struct Impl;
  SparseMatrix a_;
  bool dense_ = false;
  std::unique_ptr<Impl> impl_;
};

struct SpdResult {
  Vector x;
  SolveReport report;
};

SpdResult solve_spd(const SparseMatrix& a, const Vector& b);

/// [K Bᵀ; B −εI] [x; μ] = [0; g]: K is the eliminated flow operator, B the
/// constraint rows, ε the optional multiplier regularization (0 by default).
struct SaddleSystem {
  SparseMatrix flow;
  SparseMatrix constraints;
  std::vector<std::string> labels;
  double regularization = 0.0;
};

struct SaddleSolution {
  Matrix primal;       ///< n × k
  Matrix multipliers;  ///< m × k
  /// max over columns of ‖Kx + Bᵀμ‖₂ / (‖K‖∞‖x‖₂ + ‖Bᵀμ‖₂)
  double flow_residual = 0.0;
  /// max |Bx − g| over all rows and columns.
  double constraint_residual = 0.0;
};

/// Throws SolverError naming the first constraint row that is (numerically)
/// a combination of earlier rows.
void check_constraint_rank(const SparseMatrix& constraints, std::span<const std::string> labels);

/// Factorizes the KKT matrix once (sparse LU with partial pivoting) and
/// solves any number of constraint targets with iterative refinement.
class SaddleSolver {
 public:
  explicit SaddleSolver(SaddleSystem system);
  ~SaddleSolver();
  SaddleSolver(SaddleSolver&&) noexcept;
  SaddleSolver& operator=(SaddleSolver&&) noexcept;

  /// `targets` is m × k, one column per solve.
  SaddleSolution solve(const Matrix& targets) const;

 private:
  struct Impl;
  SaddleSystem system_;
  std::unique_ptr<Impl> impl_;
};

SaddleSolution solve_saddle(const SaddleSystem& system, const Matrix& targets);

// ---------------------------------------------------------------------------
// Coordinate text format: "# rows cols" header, then "row col value" lines
// (0-based) with 17 significant digits.
// ---------------------------------------------------------------------------

void write_coordinate(const std::filesystem::path& path, const SparseMatrix& a);
SparseMatrix read_coordinate(const std::filesystem::path& path, bool symmetric = false);
void write_vector(const std::filesystem::path& path, const Vector& v);
Vector read_vector(const std::filesystem::path& path);

}  // namespace nlmc::linalg
