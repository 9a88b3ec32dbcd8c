#include "nlmc/error.hpp"
#include "nlmc/upscaling.hpp"

#include <algorithm>
#include <atomic>
#include <exception>
#include <thread>

#include <fmt/format.h>
#include <fmt/os.h>

namespace nlmc::upscaling {

using linalg::Matrix;
using linalg::Triplet;

namespace {

int num_matrix_cells(const FineProblem& problem) { return static_cast<int>(problem.system.num_matrix()); }

std::vector<BasisTarget> targets_of(const FineProblem& problem, int center) {
  std::vector<BasisTarget> out{{BasisKind::matrix, -1}};
  for (int f : problem.grid.fragments_in(center)) out.push_back({BasisKind::fracture, f});
  return out;
}

std::vector<BasisFunction> solve_targets(const FineProblem& problem, const Oversample& over,
                                         std::span<const BasisTarget> targets, double regularization) {
  const auto dofs = over.global_dofs(num_matrix_cells(problem));
  const auto n = static_cast<Index>(dofs.size());
  const ConstraintSet constraints = build_constraints(problem, over);

  linalg::SaddleSystem saddle;
  saddle.flow = linalg::principal_submatrix(problem.system.stiffness, dofs);
  saddle.constraints = constraints.mean_operator(n);
  saddle.labels = constraints.labels();
  saddle.regularization = regularization;
  const linalg::SaddleSolver solver(saddle);

  Matrix g(static_cast<Index>(constraints.rows.size()), static_cast<Index>(targets.size()));
  for (std::size_t c = 0; c < targets.size(); ++c) g.col(static_cast<Index>(c)) = constraints.mean_target(targets[c]);
  const auto solution = solver.solve(g);

  const auto& b = saddle.constraints;
  std::vector<BasisFunction> out;
  out.reserve(targets.size());
  for (std::size_t c = 0; c < targets.size(); ++c) {
    BasisFunction basis;
    basis.kind = targets[c].kind;
    basis.owner = over.center;
    basis.fragment = targets[c].fragment;
    basis.network = basis.kind == BasisKind::fracture ? problem.grid.fragments()[basis.fragment].network : -1;
    basis.dofs = dofs;
    basis.values = solution.primal.col(static_cast<Index>(c));
    const Vector misfit = b * basis.values - g.col(static_cast<Index>(c));
    basis.constraint_residual = misfit.size() > 0 ? misfit.cwiseAbs().maxCoeff() : 0.0;
    basis.flow_residual = solution.flow_residual;
    out.push_back(std::move(basis));
  }
  return out;
}

}  // namespace

BasisFunction solve_basis(const FineProblem& problem, const Oversample& over, const ConstraintSet& constraints,
                          const BasisTarget& target, double regularization) {
  const auto dofs = over.global_dofs(num_matrix_cells(problem));
  const auto n = static_cast<Index>(dofs.size());

  linalg::SaddleSystem saddle;
  saddle.flow = linalg::principal_submatrix(problem.system.stiffness, dofs);
  saddle.constraints = constraints.mean_operator(n);
  saddle.labels = constraints.labels();
  saddle.regularization = regularization;
  const Vector g = constraints.mean_target(target);
  const auto solution = linalg::solve_saddle(saddle, Matrix(g));

  BasisFunction basis;
  basis.kind = target.kind;
  basis.owner = over.center;
  basis.fragment = target.fragment;
  basis.network = target.kind == BasisKind::fracture ? problem.grid.fragments()[target.fragment].network : -1;
  basis.dofs = dofs;
  basis.values = solution.primal.col(0);
  basis.constraint_residual = solution.constraint_residual;
  basis.flow_residual = solution.flow_residual;
  return basis;
}

std::vector<BasisFunction> solve_cell_bases(const FineProblem& problem, const Oversample& over,
                                            double regularization) {
  const auto targets = targets_of(problem, over.center);
  return solve_targets(problem, over, targets, regularization);
}

std::filesystem::path write_basis(const std::filesystem::path& dir, const BasisFunction& basis) {
  const auto path = dir / fmt::format("basis_{}_{}_{}.txt", basis.owner,
                                      basis.kind == BasisKind::matrix ? "matrix" : "fracture",
                                      basis.kind == BasisKind::matrix ? 0 : basis.network);
  auto out = fmt::output_file(path.string());
  out.print("# {} {}\n", basis.dofs.size(), basis.owner);
  for (std::size_t k = 0; k < basis.dofs.size(); ++k) {
    out.print("{} {:.17g}\n", basis.dofs[k], basis.values[static_cast<Index>(k)]);
  }
  return path;
}

SparseMatrix ProjectionMatrix::block(BasisKind row_kind, BasisKind col_kind) const {
  const Index row0 = row_kind == BasisKind::matrix ? 0 : num_coarse_cells;
  const Index nrows = row_kind == BasisKind::matrix ? num_coarse_cells : r.rows() - num_coarse_cells;
  const Index col0 = col_kind == BasisKind::matrix ? 0 : num_fine_matrix;
  const Index ncols = col_kind == BasisKind::matrix ? num_fine_matrix : r.cols() - num_fine_matrix;
  return SparseMatrix(linalg::EigenSparse(r.eigen().block(row0, col0, nrows, ncols)));
}

std::vector<Index> fine_dof_owners(const CoarseGrid& grid, Index num_fine_matrix, Index num_fine_fracture) {
  std::vector<Index> owners(static_cast<std::size_t>(num_fine_matrix + num_fine_fracture));
  for (Index k = 0; k < num_fine_matrix; ++k) owners[k] = grid.cell_of_fine(static_cast<int>(k));
  for (Index k = 0; k < num_fine_fracture; ++k) {
    const int f = grid.fragment_of_piece(static_cast<int>(k));
    owners[num_fine_matrix + k] = f >= 0 ? grid.num_cells() + f : grid.cell_of_piece(static_cast<int>(k));
  }
  return owners;
}

ProjectionMatrix assemble_projection(std::span<const BasisFunction> bases, const CoarseGrid& grid,
                                     Index num_fine_matrix, Index num_fine_fracture) {
  const Index nc = grid.num_cells();
  const auto fragments = grid.fragments();
  const Index rows = nc + static_cast<Index>(fragments.size());

  ProjectionMatrix p;
  p.num_coarse_cells = nc;
  p.num_fine_matrix = num_fine_matrix;
  p.dofs.resize(static_cast<std::size_t>(rows));
  for (Index i = 0; i < nc; ++i) p.dofs[i] = {static_cast<int>(i), BasisKind::matrix, -1, -1};
  for (std::size_t f = 0; f < fragments.size(); ++f) {
    p.dofs[nc + f] = {fragments[f].cell, BasisKind::fracture, fragments[f].network, static_cast<int>(f)};
  }

  std::vector<const BasisFunction*> by_row(static_cast<std::size_t>(rows), nullptr);
  for (const auto& basis : bases) {
    const Index row = basis.kind == BasisKind::matrix ? basis.owner : nc + basis.fragment;
    if (basis.kind == BasisKind::fracture &&
        (basis.fragment < 0 || basis.fragment >= static_cast<int>(fragments.size()) ||
         fragments[basis.fragment].cell != basis.owner)) {
      throw InputError(fmt::format("fracture basis of coarse cell {} names unknown fragment {}", basis.owner,
                                   basis.fragment));
    }
    if (row < 0 || row >= rows) throw InputError(fmt::format("basis owner {} outside the coarse grid", basis.owner));
    if (by_row[row]) {
      throw InputError(fmt::format("duplicate basis for coarse cell {} network {}", basis.owner, basis.network));
    }
    by_row[row] = &basis;
  }

  std::vector<Triplet> t;
  for (Index row = 0; row < rows; ++row) {
    const auto* basis = by_row[row];
    if (!basis) {
      const auto& dof = p.dofs[row];
      throw InputError(dof.kind == BasisKind::matrix
                           ? fmt::format("missing matrix basis for coarse cell {}", dof.cell)
                           : fmt::format("missing fracture basis for coarse cell {} network {}", dof.cell,
                                         dof.network));
    }
    for (std::size_t k = 0; k < basis->dofs.size(); ++k) {
      const double v = basis->values[static_cast<Index>(k)];
      if (v != 0.0) t.emplace_back(row, basis->dofs[k], v);
    }
  }
  p.r = SparseMatrix::from_triplets(rows, num_fine_matrix + num_fine_fracture, t);
  return p;
}

void apply_partition_of_unity(ProjectionMatrix& projection, const CoarseGrid& grid) {
  const auto& r = projection.r.eigen();
  const Index n = r.cols();
  const auto owners = fine_dof_owners(grid, projection.num_fine_matrix, n - projection.num_fine_matrix);
  const Vector column_sums = r.transpose() * Vector::Ones(r.rows());
  std::vector<Triplet> t;
  t.reserve(static_cast<std::size_t>(r.nonZeros() + n));
  for (Index c = 0; c < r.outerSize(); ++c) {
    for (linalg::EigenSparse::InnerIterator it(r, c); it; ++it) t.emplace_back(it.row(), it.col(), it.value());
  }
  for (Index k = 0; k < n; ++k) {
    const double d = 1.0 - column_sums[k];
    if (d != 0.0) t.emplace_back(owners[k], k, d);
  }
  projection.r = SparseMatrix::from_triplets(r.rows(), n, t);
}

BasisBuild build_projection(const FineProblem& problem, const BasisOptions& options) {
  const auto& grid = problem.grid;
  const int nc = grid.num_cells();
  std::vector<std::vector<BasisFunction>> per_cell(static_cast<std::size_t>(nc));
  std::vector<std::exception_ptr> errors(static_cast<std::size_t>(nc));

  auto work = [&](int i) {
    try {
      const auto over = geometry::oversample(grid, i, options.layers);
      per_cell[i] = solve_cell_bases(problem, over, options.regularization);
    } catch (const SolverError& e) {
      errors[i] = std::make_exception_ptr(
          SolverError(fmt::format("basis solve for coarse cell {} (layers {}): {}", i, options.layers, e.what())));
    } catch (...) {
      errors[i] = std::current_exception();
    }
  };

  const int threads = std::clamp(options.threads, 1, std::max(1, nc));
  if (threads == 1) {
    for (int i = 0; i < nc; ++i) work(i);
  } else {
    std::atomic<int> next{0};
    std::vector<std::jthread> pool;
    for (int w = 0; w < threads; ++w) {
      pool.emplace_back([&] {
        for (int i = next++; i < nc; i = next++) work(i);
      });
    }
  }
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }

  BasisBuild build;
  for (auto& cell : per_cell) {
    for (auto& basis : cell) {
      build.max_constraint_residual = std::max(build.max_constraint_residual, basis.constraint_residual);
      build.max_flow_residual = std::max(build.max_flow_residual, basis.flow_residual);
      build.bases.push_back(std::move(basis));
    }
  }
  build.projection =
      assemble_projection(build.bases, grid, problem.system.num_matrix(), problem.system.num_fracture());
  if (options.partition_of_unity) apply_partition_of_unity(build.projection, grid);
  return build;
}

namespace {

struct RowCheck {
  double constraint = 0.0;
  Index outside = 0;
};

RowCheck check_rows(const FineProblem& problem, const ProjectionMatrix& projection, int layers) {
  const linalg::EigenSparse rt = projection.r.eigen().transpose();
  const int nm = num_matrix_cells(problem);
  RowCheck out;
  for (Index row = 0; row < rt.outerSize(); ++row) {
    const auto& dof = projection.dofs[row];
    const auto over = geometry::oversample(problem.grid, dof.cell, layers);
    const ConstraintSet constraints = build_constraints(problem, over);
    Vector local = Vector::Zero(static_cast<Index>(over.num_local_dofs()));
    for (linalg::EigenSparse::InnerIterator it(rt, row); it; ++it) {
      const auto k = static_cast<int>(it.row());
      const auto l = k < nm ? over.local_of_cell(k) : over.local_of_piece(k - nm);
      if (l) {
        local[*l] = it.value();
      } else if (it.value() != 0.0) {
        ++out.outside;
      }
    }
    const Vector g = constraints.mean_target({dof.kind, dof.fragment});
    const Vector misfit = constraints.mean_operator(local.size()) * local - g;
    if (misfit.size() > 0) out.constraint = std::max(out.constraint, misfit.cwiseAbs().maxCoeff());
  }
  return out;
}

}  // namespace

double verify_constraints(const FineProblem& problem, const ProjectionMatrix& projection, int layers) {
  return check_rows(problem, projection, layers).constraint;
}

Index count_support_violations(const FineProblem& problem, const ProjectionMatrix& projection, int layers) {
  return check_rows(problem, projection, layers).outside;
}

}  // namespace nlmc::upscaling
