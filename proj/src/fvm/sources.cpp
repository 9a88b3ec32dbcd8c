#include "nlmc/fvm.hpp"

namespace nlmc::fvm {

namespace {

template <typename Visit>
void for_each_target(const SourceRegion& source, const FineMesh& mesh, const FractureMesh& fracture_mesh,
                     Visit&& visit) {
  if (source.target == Continuum::matrix) {
    for (std::size_t i = 0; i < mesh.num_cells(); ++i) {
      if (source.region.contains(mesh.cell_centroid(static_cast<int>(i)))) {
        visit(static_cast<linalg::Index>(i), mesh.cell_area(static_cast<int>(i)));
      }
    }
  } else {
    for (std::size_t k = 0; k < fracture_mesh.size(); ++k) {
      const auto& piece = fracture_mesh.pieces[k];
      if (source.region.contains(piece.geometry.midpoint())) visit(static_cast<linalg::Index>(k), piece.length);
    }
  }
}

}  // namespace

double region_measure(const SourceRegion& source, const FineMesh& mesh, const FractureMesh& fracture_mesh) {
  double total = 0.0;
  for_each_target(source, mesh, fracture_mesh, [&](linalg::Index, double measure) { total += measure; });
  return total;
}

SourcedSystem apply_sources(BlockSystem system, const SourceSpec& sources, const FineMesh& mesh,
                            const FractureMesh& fracture_mesh) {
  SourcedSystem out;
  for (std::size_t r = 0; r < sources.size(); ++r) {
    const auto& source = sources[r];
    Vector& rhs = source.target == Continuum::matrix ? system.matrix_rhs : system.fracture_rhs;
    bool hit = false;
    for_each_target(source, mesh, fracture_mesh, [&](linalg::Index k, double measure) {
      rhs[k] += source.rate * measure;
      hit = true;
    });
    if (!hit) out.empty_regions.push_back(static_cast<int>(r));
  }
  out.system = std::move(system);
  return out;
}

}  // namespace nlmc::fvm
