#include "nlmc/error.hpp"
#include "nlmc/upscaling.hpp"

#include <fmt/format.h>

namespace nlmc::upscaling {

CoarseModel build_coarse_model(const ProjectionMatrix& projection, const fvm::BlockSystem& system,
                               const CoarseGrid& grid, const fvm::MaterialParams& params, MassMode mass_mode,
                               RhsMode rhs_mode) {
  if (projection.r.cols() != system.size()) {
    throw InputError(fmt::format("projection has {} columns for {} fine unknowns", projection.r.cols(),
                                 system.size()));
  }
  CoarseModel model;
  model.mass_mode = mass_mode;
  model.rhs_mode = rhs_mode;
  model.dofs = projection.dofs;
  model.stiffness = linalg::triple_product(projection.r, system.stiffness);

  const Index n = projection.rows();
  if (mass_mode == MassMode::galerkin) {
    model.mass = linalg::triple_product(projection.r, SparseMatrix::diagonal(system.storage()));
  } else {
    Vector d(n);
    for (Index row = 0; row < n; ++row) {
      const auto& dof = projection.dofs[row];
      if (dof.kind == BasisKind::matrix) {
        double storage = 0.0;
        for (int c : grid.fine_cells(dof.cell)) storage += system.matrix_storage[c];
        d[row] = storage;
      } else {
        d[row] = params.fracture_storage * grid.fragments()[dof.fragment].measure;
      }
    }
    model.mass = SparseMatrix::diagonal(d);
  }

  const Vector f = system.rhs();
  if (rhs_mode == RhsMode::galerkin) {
    model.rhs = projection.r * f;
  } else {
    const auto owners = fine_dof_owners(grid, system.num_matrix(), system.num_fracture());
    model.rhs = Vector::Zero(n);
    for (Index k = 0; k < f.size(); ++k) model.rhs[owners[k]] += f[k];
  }
  return model;
}

}  // namespace nlmc::upscaling
