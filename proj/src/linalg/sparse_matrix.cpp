#include "nlmc/error.hpp"
#include "nlmc/linalg.hpp"

#include <fstream>
#include <sstream>

#include <fmt/format.h>
#include <fmt/os.h>

namespace nlmc::linalg {

SparseMatrix::SparseMatrix(EigenSparse m, bool symmetric) : m_(std::move(m)), symmetric_(symmetric) {
  m_.makeCompressed();
}

SparseMatrix SparseMatrix::from_triplets(Index rows, Index cols, std::span<const Triplet> entries,
                                         bool symmetric) {
  EigenSparse m(rows, cols);
  m.setFromTriplets(entries.begin(), entries.end());
  return SparseMatrix(std::move(m), symmetric);
}

SparseMatrix SparseMatrix::identity(Index n) {
  EigenSparse m(n, n);
  m.setIdentity();
  return SparseMatrix(std::move(m), true);
}

SparseMatrix SparseMatrix::diagonal(const Vector& d) {
  std::vector<Triplet> t;
  t.reserve(d.size());
  for (Index i = 0; i < d.size(); ++i) t.emplace_back(i, i, d[i]);
  return from_triplets(d.size(), d.size(), t, true);
}

double SparseMatrix::max_abs() const {
  double v = 0.0;
  for (Index k = 0; k < m_.outerSize(); ++k) {
    for (EigenSparse::InnerIterator it(m_, k); it; ++it) v = std::max(v, std::abs(it.value()));
  }
  return v;
}

double SparseMatrix::asymmetry() const {
  if (rows() != cols()) return std::numeric_limits<double>::infinity();
  const EigenSparse diff = m_ - EigenSparse(m_.transpose());
  double v = 0.0;
  for (Index k = 0; k < diff.outerSize(); ++k) {
    for (EigenSparse::InnerIterator it(diff, k); it; ++it) v = std::max(v, std::abs(it.value()));
  }
  return v;
}

double SparseMatrix::max_row_sum() const {
  const Vector sums = m_ * Vector::Ones(cols());
  return sums.size() ? sums.cwiseAbs().maxCoeff() : 0.0;
}

double SparseMatrix::norm_inf() const {
  Vector sums = Vector::Zero(rows());
  for (Index k = 0; k < m_.outerSize(); ++k) {
    for (EigenSparse::InnerIterator it(m_, k); it; ++it) sums[it.row()] += std::abs(it.value());
  }
  return sums.size() ? sums.maxCoeff() : 0.0;
}

SparseMatrix SparseMatrix::transpose() const { return SparseMatrix(EigenSparse(m_.transpose()), symmetric_); }

SparseMatrix combine(double alpha, const SparseMatrix& a, double beta, const SparseMatrix& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw InputError(fmt::format("cannot combine {}x{} and {}x{} matrices", a.rows(), a.cols(), b.rows(), b.cols()));
  }
  return SparseMatrix(EigenSparse(alpha * a.eigen() + beta * b.eigen()), a.symmetric() && b.symmetric());
}

SparseMatrix triple_product(const SparseMatrix& r, const SparseMatrix& a) {
  if (r.cols() != a.rows() || a.rows() != a.cols()) {
    throw InputError(fmt::format("triple product needs R (k×n) and square A (n×n); got R {}x{}, A {}x{}", r.rows(),
                                 r.cols(), a.rows(), a.cols()));
  }
  const EigenSparse ra = r.eigen() * a.eigen();
  EigenSparse p = ra * EigenSparse(r.eigen().transpose());
  if (!a.symmetric()) return SparseMatrix(std::move(p), false);
  EigenSparse sym = 0.5 * (p + EigenSparse(p.transpose()));
  return SparseMatrix(std::move(sym), true);
}

SparseMatrix principal_submatrix(const SparseMatrix& a, std::span<const int> indices) {
  const Index n = static_cast<Index>(indices.size());
  std::vector<int> local(static_cast<std::size_t>(a.rows()), -1);
  for (Index k = 0; k < n; ++k) {
    if (indices[k] < 0 || indices[k] >= a.rows()) {
      throw InputError(fmt::format("submatrix index {} out of range", indices[k]));
    }
    local[indices[k]] = static_cast<int>(k);
  }
  std::vector<Triplet> t;
  t.reserve(static_cast<std::size_t>(n) * 8);
  const EigenSparse& m = a.eigen();
  for (Index jl = 0; jl < n; ++jl) {
    for (EigenSparse::InnerIterator it(m, indices[jl]); it; ++it) {
      const int il = local[it.row()];
      if (il >= 0) t.emplace_back(il, jl, it.value());
    }
  }
  return SparseMatrix::from_triplets(n, n, t, a.symmetric());
}

void write_coordinate(const std::filesystem::path& path, const SparseMatrix& a) {
  const Eigen::SparseMatrix<double, Eigen::RowMajor> m = a.eigen();
  auto out = fmt::output_file(path.string());
  out.print("# {} {}\n", m.rows(), m.cols());
  for (Index i = 0; i < m.outerSize(); ++i) {
    for (Eigen::SparseMatrix<double, Eigen::RowMajor>::InnerIterator it(m, i); it; ++it) {
      out.print("{} {} {:.17g}\n", it.row(), it.col(), it.value());
    }
  }
}

SparseMatrix read_coordinate(const std::filesystem::path& path, bool symmetric) {
  std::ifstream in(path);
  if (!in) throw InputError(fmt::format("cannot open matrix file '{}'", path.string()));
  std::string line;
  Index rows = -1;
  Index cols = -1;
  std::vector<Triplet> t;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::istringstream fields(line);
    if (line[0] == '#') {
      char hash;
      fields >> hash >> rows >> cols;
      continue;
    }
    Index i = 0;
    Index j = 0;
    double v = 0.0;
    if (!(fields >> i >> j >> v) || i < 0 || j < 0 || i >= rows || j >= cols) {
      throw InputError(fmt::format("{}:{}: malformed matrix entry", path.string(), line_no));
    }
    t.emplace_back(i, j, v);
  }
  if (rows < 0 || cols < 0) throw InputError(fmt::format("{}: missing '# rows cols' header", path.string()));
  return SparseMatrix::from_triplets(rows, cols, t, symmetric);
}

void write_vector(const std::filesystem::path& path, const Vector& v) {
  auto out = fmt::output_file(path.string());
  out.print("# {}\n", v.size());
  for (Index i = 0; i < v.size(); ++i) out.print("{} {:.17g}\n", i, v[i]);
}

Vector read_vector(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InputError(fmt::format("cannot open vector file '{}'", path.string()));
  std::string line;
  Vector v;
  Index n = -1;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::istringstream fields(line);
    if (line[0] == '#') {
      char hash;
      fields >> hash >> n;
      v = Vector::Zero(std::max<Index>(n, 0));
      continue;
    }
    Index i = 0;
    double value = 0.0;
    if (!(fields >> i >> value) || i < 0 || i >= n) {
      throw InputError(fmt::format("{}:{}: malformed vector entry", path.string(), line_no));
    }
    v[i] = value;
  }
  if (n < 0) throw InputError(fmt::format("{}: missing '# size' header", path.string()));
  return v;
}

DifferenceOperator::DifferenceOperator(const SparseMatrix& a) : a_(a), excess_(Vector::Zero(a.rows())) {
  if (a.rows() != a.cols()) {
    throw InputError(fmt::format("difference form needs a square operator, got {}x{}", a.rows(), a.cols()));
  }
  Vector magnitude = Vector::Zero(a.rows());
  const auto& m = a.eigen();
  for (Index k = 0; k < m.outerSize(); ++k) {
    for (EigenSparse::InnerIterator it(m, k); it; ++it) {
      excess_[it.row()] += it.value();
      magnitude[it.row()] += std::abs(it.value());
    }
  }
  for (Index i = 0; i < excess_.size(); ++i) {
    if (std::abs(excess_[i]) <= 1e-12 * magnitude[i]) excess_[i] = 0.0;
  }
}

Vector DifferenceOperator::apply(const Vector& x) const {
  if (x.size() != a_.cols()) {
    throw InputError(fmt::format("vector of size {} for a {}x{} operator", x.size(), a_.rows(), a_.cols()));
  }
  Vector y = excess_.cwiseProduct(x);
  const auto& m = a_.eigen();
  for (Index k = 0; k < m.outerSize(); ++k) {
    for (EigenSparse::InnerIterator it(m, k); it; ++it) {
      if (it.row() != it.col()) y[it.row()] += it.value() * (x[it.col()] - x[it.row()]);
    }
  }
  return y;
}

}  // namespace nlmc::linalg
