#include "nlmc/error.hpp"
#include "nlmc/sim.hpp"

#include <cmath>

#include <fmt/format.h>

namespace nlmc::sim {

Vector cell_average(const geometry::FineMesh& mesh, const geometry::CoarseGrid& grid,
                    const Vector& matrix_values) {
  if (matrix_values.size() != static_cast<Index>(mesh.num_cells())) {
    throw InputError(fmt::format("{} matrix values for {} cells", matrix_values.size(), mesh.num_cells()));
  }
  Vector out(grid.num_cells());
  for (int i = 0; i < grid.num_cells(); ++i) {
    double integral = 0.0;
    double area = 0.0;
    for (int c : grid.fine_cells(i)) {
      integral += mesh.cell_area(c) * matrix_values[c];
      area += mesh.cell_area(c);
    }
    if (!(area > 0.0)) throw GeometryError(fmt::format("coarse cell {} contains no fine cells", i));
    out[i] = integral / area;
  }
  return out;
}

Vector fragment_average(const geometry::FractureMesh& fracture_mesh, const geometry::CoarseGrid& grid,
                        const Vector& fracture_values) {
  if (fracture_values.size() != static_cast<Index>(fracture_mesh.size())) {
    throw InputError(fmt::format("{} fracture values for {} pieces", fracture_values.size(), fracture_mesh.size()));
  }
  const auto fragments = grid.fragments();
  Vector out(static_cast<Index>(fragments.size()));
  for (std::size_t f = 0; f < fragments.size(); ++f) {
    double integral = 0.0;
    for (int k : fragments[f].pieces) integral += fracture_mesh.pieces[k].length * fracture_values[k];
    out[static_cast<Index>(f)] = integral / fragments[f].measure;
  }
  return out;
}

double relative_error(const Vector& reference, const Vector& approx) {
  if (reference.size() != approx.size()) {
    throw InputError(fmt::format("cannot compare {} reference values with {} values", reference.size(),
                                 approx.size()));
  }
  const double denominator = reference.squaredNorm();
  if (!(denominator > 0.0)) throw InputError("relative error undefined for an all-zero reference");
  return std::sqrt((reference - approx).squaredNorm() / denominator);
}

double total_storage(const SparseMatrix& mass, const Vector& state) {
  return (mass * state).sum();
}

ErrorPair compare_states(const geometry::FineMesh& mesh, const geometry::FractureMesh& fracture_mesh,
                         const geometry::CoarseGrid& grid, const Vector& fine_state, const Vector& coarse_state) {
  const auto nm = static_cast<Index>(mesh.num_cells());
  const auto nf = static_cast<Index>(fracture_mesh.size());
  const Index nc = grid.num_cells();
  const auto nfrag = static_cast<Index>(grid.fragments().size());
  if (fine_state.size() != nm + nf || coarse_state.size() != nc + nfrag) {
    throw InputError(fmt::format("state sizes {} (fine) and {} (coarse) do not match the discretization",
                                 fine_state.size(), coarse_state.size()));
  }
  ErrorPair out;
  out.matrix = relative_error(cell_average(mesh, grid, fine_state.head(nm)), coarse_state.head(nc));
  if (nfrag > 0) {
    const Vector reference = fragment_average(fracture_mesh, grid, fine_state.tail(nf));
    if (reference.squaredNorm() > 0.0) out.fracture = relative_error(reference, coarse_state.tail(nfrag));
  }
  return out;
}

}  // namespace nlmc::sim
