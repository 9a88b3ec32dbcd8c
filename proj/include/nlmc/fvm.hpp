#pragma once

#include <span>
#include <vector>

#include "nlmc/geometry.hpp"
#include "nlmc/linalg.hpp"

namespace nlmc::fvm {

using geometry::FineMesh;
using geometry::FractureGeometry;
using geometry::FractureMesh;
using linalg::SparseMatrix;
using linalg::Vector;

/// Discrete coefficients of the coupled matrix–fracture pressure equations.
/// Mobilities and transfer coefficients may vary per fine cell / per
/// fracture segment; `uniform` covers the constant-coefficient case.
struct MaterialParams {
  double matrix_storage = 1.0;           ///< c_m
  double fracture_storage = 1.0;         ///< c_f
  std::vector<double> matrix_mobility;   ///< k_m/μ per fine cell
  std::vector<double> fracture_mobility; ///< b·k_f/μ per fracture segment
  std::vector<double> transfer;          ///< σ per fracture segment

  static MaterialParams uniform(double matrix_storage, double fracture_storage, double matrix_mobility,
                                double fracture_mobility, double transfer, std::size_t num_cells,
                                std::size_t num_segments);

  /// Throws InputError on sign or size violations.
  void validate(std::size_t num_cells, std::size_t num_segments) const;
};

/// Harmonic mean 2/(1/k_m + 1/k_f).
double sigma_from_perms(double k_m, double k_f);

/// TPFA transmissibility of an interior facet, with distance-weighted
/// harmonic averaging of the two cell mobilities.
double transmissibility(const FineMesh& mesh, int facet, std::span<const double> matrix_mobility);

/// b_f / distance between the two piece midpoints.
double fracture_transmissibility(const geometry::FracturePiece& l, const geometry::FracturePiece& n,
                                 double fracture_mobility);

enum class Continuum { matrix, fracture };

struct SourceRegion {
  geometry::Rect region;
  Continuum target = Continuum::fracture;
  double rate = 0.0;

  bool operator==(const SourceRegion&) const = default;
};

using SourceSpec = std::vector<SourceRegion>;

/// Fine block system M (p − p̌)/τ + A p = F with matrix unknowns first.
/// Storage excludes the 1/τ factor.
struct BlockSystem {
  SparseMatrix matrix_flow;    ///< TPFA operator on matrix cells
  SparseMatrix fracture_flow;  ///< TPFA operator on fracture pieces
  SparseMatrix transfer;       ///< cells × pieces, σ per incidence
  Vector matrix_storage;       ///< a_m |ς_i|
  Vector fracture_storage;     ///< a_f |ι_l|
  Vector matrix_rhs;
  Vector fracture_rhs;

  /// [A_m + diag(Q·1), −Q; −Qᵀ, A_f + diag(Qᵀ·1)], built by `finalize`.
  SparseMatrix stiffness;

  linalg::Index num_matrix() const { return matrix_storage.size(); }
  linalg::Index num_fracture() const { return fracture_storage.size(); }
  linalg::Index size() const { return num_matrix() + num_fracture(); }

  Vector storage() const;
  Vector rhs() const;
  void finalize();
};

BlockSystem assemble_dfm(const FineMesh& mesh, const FractureGeometry& fractures,
                         const FractureMesh& fracture_mesh, const MaterialParams& params);
BlockSystem assemble_efm(const FineMesh& mesh, const FractureGeometry& fractures,
                         const FractureMesh& fracture_mesh, const MaterialParams& params);
/// Dispatches on the fracture mode.
BlockSystem assemble(const FineMesh& mesh, const FractureGeometry& fractures, const FractureMesh& fracture_mesh,
                     const MaterialParams& params);

struct SourcedSystem {
  BlockSystem system;
  /// Indices of regions that contained no target entity.
  std::vector<int> empty_regions;
};

SourcedSystem apply_sources(BlockSystem system, const SourceSpec& sources, const FineMesh& mesh,
                            const FractureMesh& fracture_mesh);

/// Total measure (area or length) of the target entities inside a region.
double region_measure(const SourceRegion& source, const FineMesh& mesh, const FractureMesh& fracture_mesh);

}  // namespace nlmc::fvm
