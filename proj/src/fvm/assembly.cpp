#include "nlmc/error.hpp"
#include "nlmc/fvm.hpp"

#include <algorithm>
#include <unordered_set>

#include <fmt/format.h>

namespace nlmc::fvm {

using linalg::Triplet;

MaterialParams MaterialParams::uniform(double matrix_storage, double fracture_storage, double matrix_mobility,
                                       double fracture_mobility, double transfer, std::size_t num_cells,
                                       std::size_t num_segments) {
  MaterialParams p;
  p.matrix_storage = matrix_storage;
  p.fracture_storage = fracture_storage;
  p.matrix_mobility.assign(num_cells, matrix_mobility);
  p.fracture_mobility.assign(num_segments, fracture_mobility);
  p.transfer.assign(num_segments, transfer);
  return p;
}

void MaterialParams::validate(std::size_t num_cells, std::size_t num_segments) const {
  if (!(matrix_storage >= 0.0) || !(fracture_storage >= 0.0)) {
    throw InputError("storage coefficients must be nonnegative");
  }
  if (matrix_mobility.size() != num_cells) {
    throw InputError(fmt::format("{} matrix mobilities for {} cells", matrix_mobility.size(), num_cells));
  }
  if (fracture_mobility.size() != num_segments || transfer.size() != num_segments) {
    throw InputError(fmt::format("fracture coefficients sized {}/{} for {} segments", fracture_mobility.size(),
                                 transfer.size(), num_segments));
  }
  for (double b : matrix_mobility) {
    if (!(b > 0.0)) throw InputError("matrix mobility must be positive");
  }
  for (double b : fracture_mobility) {
    if (!(b > 0.0)) throw InputError("fracture mobility must be positive");
  }
  for (double s : transfer) {
    if (!(s >= 0.0)) throw InputError("transfer coefficient must be nonnegative");
  }
}

double sigma_from_perms(double k_m, double k_f) {
  if (!(k_m > 0.0) || !(k_f > 0.0)) {
    throw InputError(fmt::format("permeabilities must be positive, got k_m={} k_f={}", k_m, k_f));
  }
  return 2.0 / (1.0 / k_m + 1.0 / k_f);
}

double transmissibility(const FineMesh& mesh, int facet, std::span<const double> matrix_mobility) {
  const auto& f = mesh.facets()[facet];
  if (f.is_boundary()) throw InputError(fmt::format("facet {} is a boundary facet", facet));
  const auto mid = mesh.facet_midpoint(facet);
  const auto cl = mesh.cell_centroid(f.left);
  const auto cr = mesh.cell_centroid(f.right);
  const double d = geometry::distance(cl, cr);
  if (d <= 1e-14 * mesh.diameter()) {
    throw GeometryError(fmt::format("cells {} and {} have coincident centroids", f.left, f.right));
  }
  const double bl = matrix_mobility[f.left];
  const double br = matrix_mobility[f.right];
  const double dl = geometry::distance(cl, mid);
  const double dr = geometry::distance(cr, mid);
  const double mobility = bl == br ? bl : (dl + dr) / (dl / bl + dr / br);
  return mobility * mesh.facet_length(facet) / d;
}

double fracture_transmissibility(const geometry::FracturePiece& l, const geometry::FracturePiece& n,
                                 double fracture_mobility) {
  const double d = geometry::distance(l.geometry.midpoint(), n.geometry.midpoint());
  if (!(d > 0.0)) throw GeometryError("fracture pieces have coincident midpoints");
  return fracture_mobility / d;
}

namespace {

void add_pair(std::vector<Triplet>& t, int i, int j, double w) {
  t.emplace_back(i, i, w);
  t.emplace_back(j, j, w);
  t.emplace_back(i, j, -w);
  t.emplace_back(j, i, -w);
}

BlockSystem assemble_common(const FineMesh& mesh, const FractureGeometry& fractures,
                            const FractureMesh& fracture_mesh, const MaterialParams& params,
                            const std::unordered_set<int>& excluded_facets) {
  params.validate(mesh.num_cells(), fractures.segments.size());
  const auto nm = static_cast<linalg::Index>(mesh.num_cells());
  const auto nf = static_cast<linalg::Index>(fracture_mesh.size());

  std::vector<Triplet> t;
  t.reserve(mesh.num_facets() * 4);
  for (std::size_t f = 0; f < mesh.num_facets(); ++f) {
    const auto& facet = mesh.facets()[f];
    if (facet.is_boundary() || excluded_facets.contains(static_cast<int>(f))) continue;
    add_pair(t, facet.left, facet.right, transmissibility(mesh, static_cast<int>(f), params.matrix_mobility));
  }

  BlockSystem sys;
  sys.matrix_flow = SparseMatrix::from_triplets(nm, nm, t, true);

  t.clear();
  for (const auto& [l, n] : fracture_mesh.connections) {
    const auto& pl = fracture_mesh.pieces[l];
    const auto& pn = fracture_mesh.pieces[n];
    const double bl = params.fracture_mobility[pl.segment];
    const double bn = params.fracture_mobility[pn.segment];
    const double mobility = bl == bn ? bl : 2.0 / (1.0 / bl + 1.0 / bn);
    add_pair(t, l, n, fracture_transmissibility(pl, pn, mobility));
  }
  sys.fracture_flow = SparseMatrix::from_triplets(nf, nf, t, true);

  t.clear();
  for (linalg::Index k = 0; k < nf; ++k) {
    const auto& piece = fracture_mesh.pieces[k];
    for (int cell : piece.cells) {
      if (cell != geometry::kBoundary) t.emplace_back(cell, k, params.transfer[piece.segment]);
    }
  }
  sys.transfer = SparseMatrix::from_triplets(nm, nf, t, false);

  sys.matrix_storage.resize(nm);
  for (linalg::Index i = 0; i < nm; ++i) sys.matrix_storage[i] = params.matrix_storage * mesh.cell_area(i);
  sys.fracture_storage.resize(nf);
  for (linalg::Index k = 0; k < nf; ++k) {
    sys.fracture_storage[k] = params.fracture_storage * fracture_mesh.pieces[k].length;
  }
  sys.matrix_rhs = Vector::Zero(nm);
  sys.fracture_rhs = Vector::Zero(nf);
  sys.finalize();
  return sys;
}

}  // namespace

Vector BlockSystem::storage() const {
  Vector m(size());
  m << matrix_storage, fracture_storage;
  return m;
}

Vector BlockSystem::rhs() const {
  Vector f(size());
  f << matrix_rhs, fracture_rhs;
  return f;
}

void BlockSystem::finalize() {
  const auto nm = num_matrix();
  const Vector row_sums = transfer.eigen() * Vector::Ones(transfer.cols());
  const Vector col_sums = transfer.eigen().transpose() * Vector::Ones(transfer.rows());

  std::vector<Triplet> t;
  t.reserve(static_cast<std::size_t>(matrix_flow.nonzeros() + fracture_flow.nonzeros() +
                                     2 * transfer.nonzeros() + size()));
  const auto& am = matrix_flow.eigen();
  for (linalg::Index c = 0; c < am.outerSize(); ++c) {
    for (linalg::EigenSparse::InnerIterator it(am, c); it; ++it) t.emplace_back(it.row(), it.col(), it.value());
  }
  const auto& af = fracture_flow.eigen();
  for (linalg::Index c = 0; c < af.outerSize(); ++c) {
    for (linalg::EigenSparse::InnerIterator it(af, c); it; ++it) {
      t.emplace_back(nm + it.row(), nm + it.col(), it.value());
    }
  }
  const auto& q = transfer.eigen();
  for (linalg::Index c = 0; c < q.outerSize(); ++c) {
    for (linalg::EigenSparse::InnerIterator it(q, c); it; ++it) {
      t.emplace_back(it.row(), nm + it.col(), -it.value());
      t.emplace_back(nm + it.col(), it.row(), -it.value());
    }
  }
  for (linalg::Index i = 0; i < nm; ++i) {
    if (row_sums[i] != 0.0) t.emplace_back(i, i, row_sums[i]);
  }
  for (linalg::Index k = 0; k < num_fracture(); ++k) {
    if (col_sums[k] != 0.0) t.emplace_back(nm + k, nm + k, col_sums[k]);
  }
  stiffness = SparseMatrix::from_triplets(size(), size(), t, true);
}

BlockSystem assemble_dfm(const FineMesh& mesh, const FractureGeometry& fractures,
                         const FractureMesh& fracture_mesh, const MaterialParams& params) {
  if (fractures.mode != geometry::FractureMode::dfm) throw InputError("DFM assembly needs DFM-mode fractures");
  if (fracture_mesh.segment_facets.size() != fractures.segments.size()) {
    throw GeometryError("DFM assembly needs every fracture segment matched to a mesh facet");
  }
  const std::unordered_set<int> excluded(fracture_mesh.segment_facets.begin(), fracture_mesh.segment_facets.end());
  return assemble_common(mesh, fractures, fracture_mesh, params, excluded);
}

BlockSystem assemble_efm(const FineMesh& mesh, const FractureGeometry& fractures,
                         const FractureMesh& fracture_mesh, const MaterialParams& params) {
  if (fractures.mode != geometry::FractureMode::efm) throw InputError("EFM assembly needs EFM-mode fractures");
  double total = 0.0;
  for (const auto& s : fractures.segments) total += s.length();
  if (total > 0.0 && fracture_mesh.pieces.empty()) {
    throw GeometryError("EFM assembly given fractures but an empty clip table");
  }
  return assemble_common(mesh, fractures, fracture_mesh, params, {});
}

BlockSystem assemble(const FineMesh& mesh, const FractureGeometry& fractures, const FractureMesh& fracture_mesh,
                     const MaterialParams& params) {
  return fractures.mode == geometry::FractureMode::dfm ? assemble_dfm(mesh, fractures, fracture_mesh, params)
                                                       : assemble_efm(mesh, fractures, fracture_mesh, params);
}

}  // namespace nlmc::fvm
