#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "nlmc/fvm.hpp"
#include "nlmc/geometry.hpp"
#include "nlmc/linalg.hpp"
#include "nlmc/upscaling.hpp"

namespace nlmc::sim {

using linalg::Index;
using linalg::SparseMatrix;
using linalg::Vector;

struct TimeSpec {
  double t_max = 0.1;
  int n_steps = 20;
  double initial = 1.0;  ///< uniform initial pressure p₀

  double tau() const { return t_max / n_steps; }
  /// Throws InputError unless n_steps ≥ 1 and τ > 0.
  void validate() const;
};

/// M (p − p̌)/τ + A p = F for either the fine block system or a coarse model.
struct LinearModel {
  SparseMatrix mass;
  SparseMatrix stiffness;
  Vector rhs;

  Index size() const { return rhs.size(); }

  static LinearModel fine(const fvm::BlockSystem& system);
  static LinearModel coarse(const upscaling::CoarseModel& model);
};

/// One implicit Euler step: solves (M/τ + A) p = M p̌/τ + F for the
/// increment p − p̌, with A applied in difference form and one refinement
/// pass, so that Σ M(p − p̌) matches τ·ΣF to round-off in the increment.
Vector step_implicit(const SparseMatrix& mass, const SparseMatrix& stiffness, const Vector& rhs,
                     const Vector& previous, double tau);

/// Factors M/τ + A once and reuses it for every step.
class ImplicitEuler {
 public:
  ImplicitEuler(const LinearModel& model, double tau);

  Vector step(const Vector& previous) const;
  double tau() const { return tau_; }

 private:
  SparseMatrix mass_;
  linalg::DifferenceOperator stiffness_;
  Vector rhs_;
  double tau_;
  linalg::SpdSolver solver_;
};

struct Trajectory {
  std::vector<double> times;
  std::vector<Vector> states;

  std::size_t size() const { return states.size(); }
  const Vector& at(std::size_t step) const { return states.at(step); }
};

Trajectory run(const LinearModel& model, const TimeSpec& time, const Vector& initial);
/// Uniform initial state `time.initial`.
Trajectory run(const LinearModel& model, const TimeSpec& time);
Trajectory run(const ImplicitEuler& stepper, const TimeSpec& time, const Vector& initial);

// ---------------------------------------------------------------------------
// Averaging and error
// ---------------------------------------------------------------------------

/// Area-weighted mean of fine matrix values per coarse cell.
Vector cell_average(const geometry::FineMesh& mesh, const geometry::CoarseGrid& grid,
                    const Vector& matrix_values);

/// Length-weighted mean of fine fracture values per fragment.
Vector fragment_average(const geometry::FractureMesh& fracture_mesh, const geometry::CoarseGrid& grid,
                        const Vector& fracture_values);

/// sqrt(Σ(ref − approx)² / Σ ref²) as a fraction. Throws InputError for an
/// all-zero reference or mismatched sizes.
double relative_error(const Vector& reference, const Vector& approx);

/// 1ᵀ M p.
double total_storage(const SparseMatrix& mass, const Vector& state);

struct ErrorPair {
  double matrix = 0.0;    ///< fraction
  double fracture = 0.0;  ///< fraction, 0 when there are no fragments
};

/// Compares a fine state (matrix then fracture blocks) with a coarse state
/// whose rows follow the projection's coarse dof map.
ErrorPair compare_states(const geometry::FineMesh& mesh, const geometry::FractureMesh& fracture_mesh,
                         const geometry::CoarseGrid& grid, const Vector& fine_state, const Vector& coarse_state);

// ---------------------------------------------------------------------------
// Output
// ---------------------------------------------------------------------------

/// `step,time,dof_id,value` rows for the listed steps (all steps if empty).
void write_trajectory_csv(const std::filesystem::path& path, const Trajectory& trajectory,
                          std::span<const int> steps = {});

struct Snapshots {
  std::vector<int> steps;
  std::vector<double> times;
  std::vector<Vector> states;

  /// State stored for `step`; throws InputError if absent.
  const Vector& at_step(int step) const;
};

/// Reads a file written by write_trajectory_csv.
Snapshots read_trajectory_csv(const std::filesystem::path& path);

/// Legacy ASCII VTK unstructured grid: triangles carry matrix pressure,
/// fracture pieces become line cells carrying fracture pressure.
void write_vtk(const std::filesystem::path& path, const geometry::FineMesh& mesh,
               const geometry::FractureMesh& fracture_mesh, const Vector& matrix_values,
               const Vector& fracture_values, const std::string& title = "pressure");

}  // namespace nlmc::sim
