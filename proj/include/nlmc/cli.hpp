#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "nlmc/fvm.hpp"
#include "nlmc/geometry.hpp"
#include "nlmc/sim.hpp"
#include "nlmc/upscaling.hpp"

namespace nlmc::cli {

// ---------------------------------------------------------------------------
// Configuration
// ---------------------------------------------------------------------------

enum class GeometrySource { generate, file };
enum class PermField { uniform, lognormal, file };

struct GeometryConfig {
  GeometrySource source = GeometrySource::generate;
  std::string mesh_file;  ///< used when source = file
  geometry::Rect domain{0.0, 0.0, 1.0, 1.0};
  int nx = 100;
  int ny = 100;
  int fractures = 30;
  double length_min = 0.1;
  double length_max = 0.3;
  std::uint64_t seed = 1;
  /// Place the first fractures through the fracture source regions.
  bool anchors = true;
  PermField perm_field = PermField::uniform;
  std::string perm_file;
  std::uint64_t perm_seed = 1;
  double perm_log10_std = 1.0;
  double perm_correlation = 0.1;

  bool operator==(const GeometryConfig&) const = default;
};

struct ParamsConfig {
  double k_m = 1e-6;
  double k_f = 1.0;
  /// (segment group, k_f) pairs replacing k_f for that group.
  std::vector<std::pair<int, double>> k_f_overrides;
  double c_m = 1e-5;
  double c_f = 1e-6;
  double mu = 1.0;
  double thickness = 1.0;
  std::optional<double> sigma;  ///< replaces 2/(1/k_m + 1/k_f) when set
  double sigma_multiplier = 1.0;

  bool operator==(const ParamsConfig&) const = default;
};

struct CoarseConfig {
  int nx = 20;
  int ny = 20;
  std::vector<int> layers{1, 2, 3};
  upscaling::MassMode mass = upscaling::MassMode::galerkin;
  upscaling::RhsMode rhs = upscaling::RhsMode::galerkin;
  bool partition_of_unity = true;
  int threads = 1;

  bool operator==(const CoarseConfig&) const = default;
};

struct TimeConfig {
  double t_max = 0.1;
  int steps = 20;
  double p0 = 1.0;
  std::vector<int> snapshots{5, 10, 15, 20};

  sim::TimeSpec spec() const { return {t_max, steps, p0}; }
  bool operator==(const TimeConfig&) const = default;
};

struct SourcesConfig {
  fvm::SourceSpec regions;
  /// Rescale the last region so that the total injected rate is zero.
  bool balance = false;

  bool operator==(const SourcesConfig&) const = default;
};

struct OutputConfig {
  std::string dir = "out";
  bool vtk = true;
  bool csv = true;
  bool debug_dumps = false;

  bool operator==(const OutputConfig&) const = default;
};

struct ExperimentConfig {
  GeometryConfig geometry;
  geometry::FractureMode model = geometry::FractureMode::efm;
  ParamsConfig params;
  CoarseConfig coarse;
  TimeConfig time;
  SourcesConfig sources;
  OutputConfig output;
  /// Directory relative file names are resolved against; not serialized.
  std::filesystem::path base_dir;

  /// Throws InputError on any inconsistent or out-of-range setting.
  void validate() const;
  std::filesystem::path resolve(const std::string& file) const;

  bool operator==(const ExperimentConfig& o) const {
    return geometry == o.geometry && model == o.model && params == o.params && coarse == o.coarse &&
           time == o.time && sources == o.sources && output == o.output;
  }
};

ExperimentConfig parse_config(std::istream& in, const std::string& source);
ExperimentConfig parse_config_string(const std::string& text, const std::string& source = "<string>");
ExperimentConfig load_config(const std::filesystem::path& path);
std::string serialize_config(const ExperimentConfig& config);

/// "1,2,3" → {1,2,3}; throws InputError on malformed or empty lists.
std::vector<int> parse_int_list(const std::string& text, const std::string& what);

// ---------------------------------------------------------------------------
// Geometry generation
// ---------------------------------------------------------------------------

/// std::mt19937_64 with uniform and normal variates computed here rather
/// than by the standard distributions, whose output is implementation
/// defined. Generated geometries are then identical across toolchains.
class Random {
 public:
  explicit Random(std::uint64_t seed);
  double uniform();  ///< [0, 1)
  double uniform(double lo, double hi);
  double normal();
  int below(int n);  ///< uniform integer in [0, n)

 private:
  std::mt19937_64 engine_;
};

struct GeneratedFractures {
  std::vector<geometry::Segment> segments;
  std::vector<int> groups;  ///< generated fracture (or polyline) index per segment
};

/// Random straight fractures inside the domain: uniform midpoints and
/// orientations, lengths uniform in [length_min, length_max], rejection of
/// segments leaving the domain. `anchors` fix the first midpoints.
GeneratedFractures generate_embedded_fractures(const GeometryConfig& config,
                                               std::span<const geometry::Point> anchors = {});

/// Polylines along the facet lattice of a structured mesh (horizontal,
/// vertical and split-diagonal directions), emitted as one segment per
/// facet. Throws GeometryError when the request cannot be met.
GeneratedFractures generate_lattice_fractures(const GeometryConfig& config,
                                              std::span<const geometry::Point> anchors = {});

/// Log-normal field k·10^(std·g(x)) with g a unit-variance random Fourier
/// sum evaluated at cell centroids.
std::vector<double> generate_lognormal_field(const geometry::FineMesh& mesh, double mean, double log10_std,
                                             double correlation, std::uint64_t seed);

// ---------------------------------------------------------------------------
// Pipeline
// ---------------------------------------------------------------------------

/// Fine discretization with sources applied.
struct FineSetup {
  geometry::FineMesh mesh;
  geometry::FractureGeometry fractures;
  geometry::FractureMesh fracture_mesh;
  geometry::CoarseGrid grid;
  fvm::MaterialParams params;
  fvm::BlockSystem system;
  std::vector<int> empty_source_regions;

  upscaling::FineProblem problem() const { return {mesh, fractures, fracture_mesh, grid, system}; }
  linalg::Index dof_fine() const { return system.size(); }
};

/// Geometry as it would be written by `generate`.
geometry::MeshFile make_geometry(const ExperimentConfig& config);
std::vector<double> make_matrix_permeability(const ExperimentConfig& config, const geometry::FineMesh& mesh);
fvm::MaterialParams make_params(const ExperimentConfig& config, const geometry::FineMesh& mesh,
                                const geometry::FractureGeometry& fractures, std::span<const double> k_m_field);
FineSetup build_fine(const ExperimentConfig& config, const geometry::MeshFile& geometry,
                     std::span<const double> k_m_field);
FineSetup build_fine(const ExperimentConfig& config);

struct Timed {
  sim::Trajectory trajectory;
  double setup_seconds = 0.0;  ///< factorization
  double step_seconds = 0.0;   ///< all time steps
  double total() const { return setup_seconds + step_seconds; }
};

Timed solve_timed(const sim::LinearModel& model, const sim::TimeSpec& time);

struct CoarseBuild {
  int layers = 1;
  upscaling::BasisBuild basis;
  upscaling::CoarseModel model;
  double seconds = 0.0;
};

CoarseBuild upscale(const ExperimentConfig& config, const FineSetup& fine, int layers);

struct ReportRow {
  int layers = 0;
  int step = 0;
  double time = 0.0;
  double matrix_error_percent = 0.0;
  double fracture_error_percent = 0.0;
};

struct ReportTable {
  std::vector<ReportRow> rows;
  linalg::Index dof_fine = 0;
  linalg::Index fine_matrix = 0;
  linalg::Index fine_fracture = 0;
  std::vector<std::pair<int, linalg::Index>> dof_coarse;  ///< (layers, DOF_c)

  std::string to_text() const;
  std::string to_csv() const;
};

ReportTable make_report(const ExperimentConfig& config, const FineSetup& fine, const sim::Snapshots& fine_states,
                        std::span<const std::pair<int, sim::Snapshots>> coarse_states);

/// File-based stages. Every stage reads its inputs from and writes its
/// outputs into `out`; wall times go to separate `timing_*.txt` files.
void cmd_generate(const ExperimentConfig& config, const std::filesystem::path& out);
void cmd_solve_fine(const ExperimentConfig& config, const std::filesystem::path& out);
void cmd_upscale(const ExperimentConfig& config, const std::filesystem::path& out);
void cmd_solve_coarse(const ExperimentConfig& config, const std::filesystem::path& out);
void cmd_compare(const ExperimentConfig& config, const std::filesystem::path& out);
void cmd_report(const ExperimentConfig& config, const std::filesystem::path& out);

}  // namespace nlmc::cli
