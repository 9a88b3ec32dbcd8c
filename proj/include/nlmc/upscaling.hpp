#pragma once

#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "nlmc/fvm.hpp"
#include "nlmc/geometry.hpp"
#include "nlmc/linalg.hpp"

namespace nlmc::upscaling {

using geometry::CoarseGrid;
using geometry::Oversample;
using linalg::Index;
using linalg::SparseMatrix;
using linalg::Vector;

/// Read-only view of everything the basis construction needs.
struct FineProblem {
  const geometry::FineMesh& mesh;
  const geometry::FractureGeometry& fractures;
  const geometry::FractureMesh& fracture_mesh;
  const CoarseGrid& grid;
  const fvm::BlockSystem& system;
};

enum class BasisKind { matrix, fracture };

/// Which basis of the oversampled region's centre cell to build. Fracture
/// bases name the fragment (a fragment of the centre cell).
struct BasisTarget {
  BasisKind kind = BasisKind::matrix;
  int fragment = -1;
};

/// One mean-value constraint: ∫ over a coarse cell (matrix continuum) or
/// over a fragment (fracture continuum). Weights are fine measures, so they
/// sum to `measure`.
struct ConstraintRow {
  BasisKind continuum = BasisKind::matrix;
  int coarse_cell = 0;
  int fragment = -1;
  double measure = 0.0;
  std::vector<std::pair<int, double>> weights;  ///< (local dof, fine measure)
};

struct ConstraintSet {
  int center = 0;
  std::vector<ConstraintRow> rows;
  /// Integral targets δ·measure for the requested basis (empty if none).
  Vector target;

  std::optional<int> row_of_cell(int coarse_cell) const;
  std::optional<int> row_of_fragment(int fragment) const;
  std::vector<std::string> labels() const;
  /// Rows divided by their measures: B ψ then gives mean values.
  SparseMatrix mean_operator(Index num_local_dofs) const;
  /// Mean-value target (0/1 pattern) for a basis.
  Vector mean_target(const BasisTarget& target) const;
};

ConstraintSet build_constraints(const FineProblem& problem, const Oversample& over);
ConstraintSet build_constraints(const FineProblem& problem, const Oversample& over, const BasisTarget& target);

struct BasisFunction {
  BasisKind kind = BasisKind::matrix;
  int owner = 0;     ///< coarse cell i
  int network = -1;  ///< fracture network l (fracture kind)
  int fragment = -1;
  /// Global block dofs of K_i^+ (matrix cells, then pieces offset by N_m).
  std::vector<int> dofs;
  Vector values;
  double constraint_residual = 0.0;  ///< max |mean − target| over all rows
  double flow_residual = 0.0;
};

/// Writes `basis_<cell>_<kind>_<network>.txt` ("global_dof value" lines) into `dir`.
std::filesystem::path write_basis(const std::filesystem::path& dir, const BasisFunction& basis);

struct BasisOptions {
  int layers = 1;
  bool partition_of_unity = true;
  int threads = 1;
  double regularization = 0.0;
};

/// Single constrained energy-minimizing solve on K_i^+ with zero Dirichlet
/// exterior.
BasisFunction solve_basis(const FineProblem& problem, const Oversample& over, const ConstraintSet& constraints,
                          const BasisTarget& target, double regularization = 0.0);

/// All 1 + L_i bases of the centre cell sharing one factorization.
std::vector<BasisFunction> solve_cell_bases(const FineProblem& problem, const Oversample& over,
                                            double regularization = 0.0);

struct CoarseDof {
  int cell = 0;
  BasisKind kind = BasisKind::matrix;
  int network = -1;
  int fragment = -1;
};

/// Rows: matrix bases by coarse cell, then fracture bases by (cell, network).
/// Columns: fine matrix cells, then fine fracture pieces.
struct ProjectionMatrix {
  SparseMatrix r;
  std::vector<CoarseDof> dofs;
  Index num_coarse_cells = 0;
  Index num_fine_matrix = 0;

  Index rows() const { return r.rows(); }
  SparseMatrix block(BasisKind row_kind, BasisKind col_kind) const;
};

ProjectionMatrix assemble_projection(std::span<const BasisFunction> bases, const CoarseGrid& grid,
                                     Index num_fine_matrix, Index num_fine_fracture);

/// Adds d = 1 − Rᵀ1 to the basis owning each fine dof so that Rᵀ1 = 1.
/// Mean-value constraints and supports are unchanged.
void apply_partition_of_unity(ProjectionMatrix& projection, const CoarseGrid& grid);

struct BasisBuild {
  ProjectionMatrix projection;
  std::vector<BasisFunction> bases;  ///< before any partition-of-unity correction
  double max_constraint_residual = 0.0;
  double max_flow_residual = 0.0;
};

BasisBuild build_projection(const FineProblem& problem, const BasisOptions& options);

/// Recomputes every constraint of every row of R on its own K_i^+ and
/// returns the largest mean-value deviation.
double verify_constraints(const FineProblem& problem, const ProjectionMatrix& projection, int layers);

/// Largest support violation: number of nonzeros of R outside their rows' K_i^+.
Index count_support_violations(const FineProblem& problem, const ProjectionMatrix& projection, int layers);

enum class MassMode { galerkin, diagonal };
enum class RhsMode { galerkin, direct };

struct CoarseModel {
  SparseMatrix stiffness;
  SparseMatrix mass;
  Vector rhs;
  MassMode mass_mode = MassMode::galerkin;
  RhsMode rhs_mode = RhsMode::galerkin;
  std::vector<CoarseDof> dofs;

  Index size() const { return rhs.size(); }
};

CoarseModel build_coarse_model(const ProjectionMatrix& projection, const fvm::BlockSystem& system,
                               const CoarseGrid& grid, const fvm::MaterialParams& params, MassMode mass_mode,
                               RhsMode rhs_mode = RhsMode::galerkin);

/// Coarse owner row of each fine dof (matrix cell → its coarse cell row,
/// piece → its fragment row, or its cell row for sliver pieces).
std::vector<Index> fine_dof_owners(const CoarseGrid& grid, Index num_fine_matrix, Index num_fine_fracture);

}  // namespace nlmc::upscaling
