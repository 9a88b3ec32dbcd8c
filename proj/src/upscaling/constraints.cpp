#include "nlmc/error.hpp"
#include "nlmc/upscaling.hpp"

#include <fmt/format.h>

namespace nlmc::upscaling {

std::optional<int> ConstraintSet::row_of_cell(int coarse_cell) const {
  for (std::size_t r = 0; r < rows.size(); ++r) {
    if (rows[r].continuum == BasisKind::matrix && rows[r].coarse_cell == coarse_cell) return static_cast<int>(r);
  }
  return std::nullopt;
}

std::optional<int> ConstraintSet::row_of_fragment(int fragment) const {
  for (std::size_t r = 0; r < rows.size(); ++r) {
    if (rows[r].continuum == BasisKind::fracture && rows[r].fragment == fragment) return static_cast<int>(r);
  }
  return std::nullopt;
}

std::vector<std::string> ConstraintSet::labels() const {
  std::vector<std::string> out;
  out.reserve(rows.size());
  for (const auto& row : rows) {
    if (row.continuum == BasisKind::matrix) {
      out.push_back(fmt::format("matrix mean constraint on coarse cell {} (basis centre {})", row.coarse_cell, center));
    } else {
      out.push_back(fmt::format("fracture mean constraint on fragment {} in coarse cell {} (basis centre {})",
                                row.fragment, row.coarse_cell, center));
    }
  }
  return out;
}

SparseMatrix ConstraintSet::mean_operator(Index num_local_dofs) const {
  std::vector<linalg::Triplet> t;
  for (std::size_t r = 0; r < rows.size(); ++r) {
    const auto& row = rows[r];
    for (const auto& [dof, w] : row.weights) t.emplace_back(static_cast<Index>(r), dof, w / row.measure);
  }
  return SparseMatrix::from_triplets(static_cast<Index>(rows.size()), num_local_dofs, t);
}

Vector ConstraintSet::mean_target(const BasisTarget& target) const {
  Vector g = Vector::Zero(static_cast<Index>(rows.size()));
  const auto r = target.kind == BasisKind::matrix ? row_of_cell(center) : row_of_fragment(target.fragment);
  if (!r) {
    throw InputError(target.kind == BasisKind::matrix
                         ? fmt::format("coarse cell {} is not in its own oversampled region", center)
                         : fmt::format("fragment {} is not constrained in the region of coarse cell {}",
                                       target.fragment, center));
  }
  g[*r] = 1.0;
  return g;
}

ConstraintSet build_constraints(const FineProblem& problem, const Oversample& over) {
  const auto& grid = problem.grid;
  ConstraintSet set;
  set.center = over.center;
  for (int j : over.coarse_cells) {
    ConstraintRow row;
    row.continuum = BasisKind::matrix;
    row.coarse_cell = j;
    for (int c : grid.fine_cells(j)) {
      const auto local = over.local_of_cell(c);
      if (!local) throw GeometryError(fmt::format("fine cell {} of coarse cell {} missing from region", c, j));
      const double area = problem.mesh.cell_area(c);
      row.weights.emplace_back(*local, area);
      row.measure += area;
    }
    set.rows.push_back(std::move(row));
  }
  for (int f : over.fragments) {
    const auto& fragment = grid.fragments()[f];
    ConstraintRow row;
    row.continuum = BasisKind::fracture;
    row.coarse_cell = fragment.cell;
    row.fragment = f;
    for (int k : fragment.pieces) {
      const auto local = over.local_of_piece(k);
      if (!local) throw GeometryError(fmt::format("piece {} of fragment {} missing from region", k, f));
      const double length = problem.fracture_mesh.pieces[k].length;
      row.weights.emplace_back(*local, length);
      row.measure += length;
    }
    set.rows.push_back(std::move(row));
  }
  return set;
}

ConstraintSet build_constraints(const FineProblem& problem, const Oversample& over, const BasisTarget& target) {
  ConstraintSet set = build_constraints(problem, over);
  const Vector mean = set.mean_target(target);
  set.target.resize(mean.size());
  for (std::size_t r = 0; r < set.rows.size(); ++r) set.target[r] = mean[r] * set.rows[r].measure;
  return set;
}

}  // namespace nlmc::upscaling
