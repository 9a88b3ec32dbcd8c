#include "nlmc/error.hpp"
#include "nlmc/linalg.hpp"

#include <Eigen/SparseCholesky>
#include <Eigen/SparseLU>

#include <fmt/format.h>

namespace nlmc::linalg {

namespace {

constexpr Index kDenseLimit = 4000;
constexpr double kDenseFill = 0.05;

}  // namespace

// ---------------------------------------------------------------------------
// SPD
// ---------------------------------------------------------------------------

struct SpdSolver::Impl {
  Eigen::LLT<Matrix> dense;
  Eigen::SimplicialLLT<EigenSparse> sparse;
};

SpdSolver::SpdSolver(const SparseMatrix& a) : a_(a), impl_(std::make_unique<Impl>()) {
  if (a.rows() != a.cols()) {
    throw SolverError(fmt::format("SPD solve needs a square matrix, got {}x{}", a.rows(), a.cols()));
  }
  const Index n = a.rows();
  const double fill = n > 0 ? static_cast<double>(a.nonzeros()) / (static_cast<double>(n) * n) : 1.0;
  dense_ = n <= 64 || (n <= kDenseLimit && fill > kDenseFill);
  const double tol = 1e-12 * a.max_abs();
  if (dense_) {
    const Matrix d = a.dense();
    if (n > 0 && (d - d.transpose()).cwiseAbs().maxCoeff() > tol) {
      throw SolverError("SPD solve given a non-symmetric matrix");
    }
    impl_->dense.compute(d);
    if (impl_->dense.info() != Eigen::Success) {
      throw SolverError("Cholesky factorization failed: matrix is not positive definite");
    }
  } else {
    if (a.asymmetry() > tol) throw SolverError("SPD solve given a non-symmetric matrix");
    impl_->sparse.compute(a.eigen());
    if (impl_->sparse.info() != Eigen::Success) {
      throw SolverError("sparse Cholesky factorization failed: matrix is not positive definite");
    }
  }
}

SpdSolver::~SpdSolver() = default;
SpdSolver::SpdSolver(SpdSolver&&) noexcept = default;
SpdSolver& SpdSolver::operator=(SpdSolver&&) noexcept = default;

Vector SpdSolver::solve(const Vector& b, SolveReport* report) const {
  if (b.size() != a_.rows()) {
    throw SolverError(fmt::format("right-hand side has size {} for a {}x{} matrix", b.size(), a_.rows(), a_.cols()));
  }
  auto apply = [&](const Vector& rhs) { return dense_ ? Vector(impl_->dense.solve(rhs)) : Vector(impl_->sparse.solve(rhs)); };
  Vector x = apply(b);
  if (report) {
    report->residual = (a_ * x - b).norm();
    const double scale = b.norm() + a_.norm_inf() * x.norm();
    report->relative_residual = scale > 0.0 ? report->residual / scale : 0.0;
  }
  return x;
}

SpdResult solve_spd(const SparseMatrix& a, const Vector& b) {
  SpdSolver solver(a);
  SpdResult out;
  out.x = solver.solve(b, &out.report);
  return out;
}

// ---------------------------------------------------------------------------
// Saddle point
// ---------------------------------------------------------------------------

void check_constraint_rank(const SparseMatrix& constraints, std::span<const std::string> labels) {
  const Index m = constraints.rows();
  const Matrix gram = Matrix(constraints.eigen() * EigenSparse(constraints.eigen().transpose()));
  Matrix l = Matrix::Zero(m, m);
  auto label = [&](Index r) {
    return r < static_cast<Index>(labels.size()) ? labels[r] : fmt::format("row {}", r);
  };
  for (Index r = 0; r < m; ++r) {
    for (Index c = 0; c < r; ++c) {
      double v = gram(r, c);
      for (Index k = 0; k < c; ++k) v -= l(r, k) * l(c, k);
      l(r, c) = v / l(c, c);
    }
    double d = gram(r, r);
    for (Index k = 0; k < r; ++k) d -= l(r, k) * l(r, k);
    if (!(gram(r, r) > 0.0) || d <= 1e-10 * gram(r, r)) {
      throw SolverError(fmt::format("rank-deficient constraints: {} is empty or depends on earlier constraints",
                                    label(r)));
    }
    l(r, r) = std::sqrt(d);
  }
}

struct SaddleSolver::Impl {
  EigenSparse kkt;
  Eigen::SparseLU<EigenSparse, Eigen::COLAMDOrdering<int>> lu;
};

SaddleSolver::SaddleSolver(SaddleSystem system) : system_(std::move(system)), impl_(std::make_unique<Impl>()) {
  const Index n = system_.flow.rows();
  const Index m = system_.constraints.rows();
  if (system_.flow.cols() != n || system_.constraints.cols() != n) {
    throw SolverError(fmt::format("saddle blocks do not conform: flow {}x{}, constraints {}x{}", n,
                                  system_.flow.cols(), m, system_.constraints.cols()));
  }
  check_constraint_rank(system_.constraints, system_.labels);

  std::vector<Triplet> t;
  t.reserve(static_cast<std::size_t>(system_.flow.nonzeros() + 2 * system_.constraints.nonzeros() + m));
  const EigenSparse& k = system_.flow.eigen();
  for (Index c = 0; c < k.outerSize(); ++c) {
    for (EigenSparse::InnerIterator it(k, c); it; ++it) t.emplace_back(it.row(), it.col(), it.value());
  }
  const EigenSparse& b = system_.constraints.eigen();
  for (Index c = 0; c < b.outerSize(); ++c) {
    for (EigenSparse::InnerIterator it(b, c); it; ++it) {
      t.emplace_back(n + it.row(), it.col(), it.value());
      t.emplace_back(it.col(), n + it.row(), it.value());
    }
  }
  if (system_.regularization != 0.0) {
    for (Index r = 0; r < m; ++r) t.emplace_back(n + r, n + r, -system_.regularization);
  }
  impl_->kkt.resize(n + m, n + m);
  impl_->kkt.setFromTriplets(t.begin(), t.end());
  impl_->kkt.makeCompressed();
  impl_->lu.analyzePattern(impl_->kkt);
  impl_->lu.factorize(impl_->kkt);
  if (impl_->lu.info() != Eigen::Success) {
    throw SolverError(fmt::format("saddle-point factorization failed: {}", impl_->lu.lastErrorMessage()));
  }
}

SaddleSolver::~SaddleSolver() = default;
SaddleSolver::SaddleSolver(SaddleSolver&&) noexcept = default;
SaddleSolver& SaddleSolver::operator=(SaddleSolver&&) noexcept = default;

SaddleSolution SaddleSolver::solve(const Matrix& targets) const {
  const Index n = system_.flow.rows();
  const Index m = system_.constraints.rows();
  if (targets.rows() != m) {
    throw SolverError(fmt::format("{} constraint targets given for {} constraints", targets.rows(), m));
  }
  Matrix rhs = Matrix::Zero(n + m, targets.cols());
  rhs.bottomRows(m) = targets;
  Matrix x = impl_->lu.solve(rhs);
  for (int pass = 0; pass < 3; ++pass) {
    const Matrix r = rhs - impl_->kkt * x;
    if (r.cwiseAbs().maxCoeff() <= 1e-15 * std::max(1.0, rhs.cwiseAbs().maxCoeff())) break;
    x += impl_->lu.solve(r);
  }

  SaddleSolution out;
  out.primal = x.topRows(n);
  out.multipliers = x.bottomRows(m);
  const double k_norm = system_.flow.norm_inf();
  const EigenSparse& b = system_.constraints.eigen();
  for (Index c = 0; c < targets.cols(); ++c) {
    const Vector psi = out.primal.col(c);
    const Vector btmu = b.transpose() * out.multipliers.col(c);
    const double flow = (system_.flow * psi + btmu).norm();
    const double scale = k_norm * psi.norm() + btmu.norm();
    out.flow_residual = std::max(out.flow_residual, scale > 0.0 ? flow / scale : flow);
    const Vector cons = b * psi - targets.col(c);
    if (m > 0) out.constraint_residual = std::max(out.constraint_residual, cons.cwiseAbs().maxCoeff());
  }
  return out;
}

SaddleSolution solve_saddle(const SaddleSystem& system, const Matrix& targets) {
  return SaddleSolver(system).solve(targets);
}

}  // namespace nlmc::linalg
