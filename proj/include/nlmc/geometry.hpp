#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

namespace nlmc::geometry {

// ---------------------------------------------------------------------------
// Primitives
// ---------------------------------------------------------------------------

struct Point {
  double x = 0.0;
  double y = 0.0;

  bool operator==(const Point&) const = default;
};

inline Point operator+(Point a, Point b) { return {a.x + b.x, a.y + b.y}; }
inline Point operator-(Point a, Point b) { return {a.x - b.x, a.y - b.y}; }
inline Point operator*(double s, Point a) { return {s * a.x, s * a.y}; }
inline double dot(Point a, Point b) { return a.x * b.x + a.y * b.y; }
inline double cross(Point a, Point b) { return a.x * b.y - a.y * b.x; }
inline double norm(Point a) { return std::hypot(a.x, a.y); }
inline double distance(Point a, Point b) { return norm(a - b); }
inline Point lerp(Point a, Point b, double t) { return {a.x + t * (b.x - a.x), a.y + t * (b.y - a.y)}; }

/// Axis-aligned rectangle [x0,x1]×[y0,y1].
struct Rect {
  double x0 = 0.0;
  double y0 = 0.0;
  double x1 = 1.0;
  double y1 = 1.0;

  double width() const { return x1 - x0; }
  double height() const { return y1 - y0; }
  double area() const { return width() * height(); }
  double diameter() const { return std::hypot(width(), height()); }
  bool contains(Point p, double tol = 0.0) const {
    return p.x >= x0 - tol && p.x <= x1 + tol && p.y >= y0 - tol && p.y <= y1 + tol;
  }

  bool operator==(const Rect&) const = default;
};

struct Segment {
  Point a;
  Point b;

  double length() const { return distance(a, b); }
  Point midpoint() const { return 0.5 * (a + b); }

  bool operator==(const Segment&) const = default;
};

inline constexpr int kBoundary = -1;

/// Mesh edge. `right == kBoundary` marks an exterior facet.
struct Facet {
  std::array<int, 2> vertices{};
  int left = kBoundary;
  int right = kBoundary;

  bool is_boundary() const { return right == kBoundary; }
};

// ---------------------------------------------------------------------------
// Fine mesh
// ---------------------------------------------------------------------------

/// Conforming 2-D triangulation with facet adjacency and a bin index for
/// point location. Immutable after construction; the constructor validates
/// orientation, facet multiplicity and area consistency and throws
/// GeometryError naming the failed check.
class FineMesh {
 public:
  FineMesh() = default;
  FineMesh(std::vector<Point> vertices, std::vector<std::array<int, 3>> cells);

  std::size_t num_vertices() const { return vertices_.size(); }
  std::size_t num_cells() const { return cells_.size(); }
  std::size_t num_facets() const { return facets_.size(); }

  std::span<const Point> vertices() const { return vertices_; }
  std::span<const std::array<int, 3>> cells() const { return cells_; }
  std::span<const Facet> facets() const { return facets_; }

  double cell_area(int c) const { return areas_[c]; }
  Point cell_centroid(int c) const { return centroids_[c]; }
  const std::array<int, 3>& cell_facets(int c) const { return cell_facets_[c]; }
  std::array<Point, 3> cell_points(int c) const;

  double facet_length(int f) const;
  Point facet_midpoint(int f) const;

  Rect bounding_box() const { return bbox_; }
  double diameter() const { return bbox_.diameter(); }
  double total_area() const { return total_area_; }

  /// Lowest-index cell whose closure contains p (within a tolerance scaled
  /// by the mesh diameter).
  std::optional<int> locate(Point p) const;
  /// Cells whose bounding boxes overlap the box, sorted ascending.
  std::vector<int> cells_near(const Rect& box) const;
  std::optional<int> find_facet(int v0, int v1) const;
  std::optional<int> find_vertex(Point p, double tol) const;

  /// Point-in-closed-triangle test with absolute tolerance.
  bool cell_contains(int c, Point p, double tol) const;

 private:
  void build_topology();
  void build_index();
  std::pair<int, int> bin_of(Point p) const;

  std::vector<Point> vertices_;
  std::vector<std::array<int, 3>> cells_;
  std::vector<Facet> facets_;
  std::vector<std::array<int, 3>> cell_facets_;
  std::vector<double> areas_;
  std::vector<Point> centroids_;
  std::unordered_map<std::uint64_t, int> facet_lookup_;
  Rect bbox_;
  double total_area_ = 0.0;

  int bins_x_ = 0;
  int bins_y_ = 0;
  std::vector<std::vector<int>> bins_;
};

/// Rectangle split into nx×ny quads, each cut along its (x0,y0)–(x1,y1)
/// diagonal into two counter-clockwise triangles.
FineMesh generate_structured_mesh(int nx, int ny, const Rect& domain);

/// Vertex (i, j) of that structured mesh, bit-identical to its coordinates.
Point lattice_point(int nx, int ny, const Rect& domain, int i, int j);

// ---------------------------------------------------------------------------
// Fractures
// ---------------------------------------------------------------------------

enum class FractureMode { dfm, efm };

struct FractureGeometry {
  FractureMode mode = FractureMode::efm;
  std::vector<Segment> segments;
  /// Connected-component label per segment, 0..num_networks-1, numbered in
  /// order of first appearance.
  std::vector<int> network;
  /// User grouping carried from the mesh file (-1 when absent). Only used to
  /// assign per-group properties; never affects connectivity.
  std::vector<int> group;
  int num_networks = 0;

  double network_length(int l) const;
};

/// Representative intersection point of two closed segments, if any.
/// Collinear overlaps return the midpoint of the overlap.
std::optional<Point> segment_intersection(const Segment& s, const Segment& t, double tol);

/// All index pairs (i<j) of intersecting segments, sorted.
std::vector<std::pair<int, int>> intersecting_pairs(std::span<const Segment> segments, double tol);

/// Labels networks as connected components of the intersection graph.
FractureGeometry label_networks(std::vector<Segment> segments, FractureMode mode,
                                std::vector<int> groups = {});

/// Facet matched by each segment. Throws GeometryError for a segment that
/// does not coincide with a mesh facet.
std::vector<int> match_dfm_facets(const FineMesh& mesh, const FractureGeometry& fractures);

struct ClipPiece {
  int cell = kBoundary;
  Segment piece;
  double length = 0.0;
};

/// Splits a segment into maximal sub-segments each lying in one cell's
/// closure. Zero-length input yields an empty list.
std::vector<ClipPiece> clip_segment_to_cells(const Segment& segment, const FineMesh& mesh);

/// One fine fracture degree of freedom: a DFM fracture facet or an EFM
/// clipped piece.
struct FracturePiece {
  int segment = 0;
  Segment geometry;
  double length = 0.0;
  /// Incident matrix cells: both facet neighbours (DFM) or the host cell
  /// (EFM). Unused slots hold kBoundary.
  std::array<int, 2> cells{kBoundary, kBoundary};
};

struct FractureMesh {
  std::vector<FracturePiece> pieces;
  /// Unique piece pairs (a<b) exchanging flux, sorted.
  std::vector<std::array<int, 2>> connections;
  /// Facet per segment (DFM only).
  std::vector<int> segment_facets;

  std::size_t size() const { return pieces.size(); }
};

FractureMesh discretize_fractures(const FineMesh& mesh, const FractureGeometry& fractures);

// ---------------------------------------------------------------------------
// Coarse grid
// ---------------------------------------------------------------------------

/// Part of network `network` owned by coarse cell `cell`.
struct Fragment {
  int cell = 0;
  int network = 0;
  double measure = 0.0;
  std::vector<int> pieces;
};

class CoarseGrid {
 public:
  CoarseGrid() = default;
  CoarseGrid(const Rect& domain, int nx, int ny);

  const Rect& domain() const { return domain_; }
  int nx() const { return nx_; }
  int ny() const { return ny_; }
  int num_cells() const { return nx_ * ny_; }
  int index(int ix, int iy) const { return iy * nx_ + ix; }
  int ix(int i) const { return i % nx_; }
  int iy(int i) const { return i / nx_; }
  Rect rect(int i) const;
  double area(int i) const { return rect(i).area(); }

  /// Half-open cell lookup; the last row and column are closed.
  std::optional<int> cell_containing(Point p) const;

  int cell_of_fine(int fine_cell) const { return cell_of_fine_[fine_cell]; }
  int cell_of_piece(int piece) const { return cell_of_piece_[piece]; }
  std::span<const int> fine_cells(int i) const { return fine_cells_[i]; }
  std::span<const int> pieces(int i) const { return pieces_[i]; }

  std::span<const Fragment> fragments() const { return fragments_; }
  /// Fragment owning a piece, or -1 for pieces of discarded slivers.
  int fragment_of_piece(int piece) const { return fragment_of_piece_[piece]; }
  std::span<const int> fragments_in(int i) const { return fragments_in_[i]; }
  /// L_i: number of networks with a fragment in coarse cell i.
  int num_networks_in(int i) const { return static_cast<int>(fragments_in_[i].size()); }

  std::size_t num_coarse_dofs() const { return num_cells() + fragments_.size(); }

 private:
  friend CoarseGrid build_coarse_grid(const FineMesh&, const FractureGeometry&,
                                      const FractureMesh&, int, int);

  Rect domain_;
  int nx_ = 0;
  int ny_ = 0;
  std::vector<int> cell_of_fine_;
  std::vector<int> cell_of_piece_;
  std::vector<std::vector<int>> fine_cells_;
  std::vector<std::vector<int>> pieces_;
  std::vector<Fragment> fragments_;
  std::vector<int> fragment_of_piece_;
  std::vector<std::vector<int>> fragments_in_;
};

/// Relative (to the mesh diameter) threshold below which fragments are dropped.
inline constexpr double kFragmentSliver = 1e-12;

CoarseGrid build_coarse_grid(const FineMesh& mesh, const FractureGeometry& fractures,
                             const FractureMesh& fracture_mesh, int nx_c, int ny_c);

/// Coarse cell K_i enlarged by `layers` rings of neighbours (Chebyshev box).
/// All member lists are sorted ascending.
struct Oversample {
  int center = 0;
  int layers = 0;
  std::vector<int> coarse_cells;
  std::vector<int> fine_cells;
  std::vector<int> pieces;
  std::vector<int> fragments;

  std::size_t num_local_dofs() const { return fine_cells.size() + pieces.size(); }
  /// Local ordering: fine cells then pieces, mapped to global block indices
  /// (pieces offset by the number of matrix cells).
  std::vector<int> global_dofs(int num_matrix_cells) const;
  std::optional<int> local_of_cell(int fine_cell) const;
  std::optional<int> local_of_piece(int piece) const;
  bool contains_coarse(int i) const;
};

Oversample oversample(const CoarseGrid& grid, int i, int layers);

// ---------------------------------------------------------------------------
// Files
// ---------------------------------------------------------------------------

struct MeshFile {
  FineMesh mesh;
  std::vector<Segment> fractures;
  std::vector<int> hints;
};

MeshFile parse_mesh(std::istream& in, const std::string& source);
MeshFile read_mesh(const std::filesystem::path& path);
void write_mesh(const std::filesystem::path& path, const FineMesh& mesh,
                std::span<const Segment> fractures, std::span<const int> hints);

std::vector<double> read_cell_data(const std::filesystem::path& path, std::size_t expected);
void write_cell_data(const std::filesystem::path& path, std::span<const double> values);

}  // namespace nlmc::geometry
