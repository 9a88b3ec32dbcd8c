#include "nlmc/error.hpp"
#include "nlmc/geometry.hpp"

#include <algorithm>
#include <limits>

#include <fmt/format.h>

namespace nlmc::geometry {

namespace {

std::uint64_t edge_key(int a, int b) {
  auto lo = static_cast<std::uint64_t>(std::min(a, b));
  auto hi = static_cast<std::uint64_t>(std::max(a, b));
  return (lo << 32) | hi;
}

double signed_area(Point a, Point b, Point c) { return 0.5 * cross(b - a, c - a); }

}  // namespace

FineMesh::FineMesh(std::vector<Point> vertices, std::vector<std::array<int, 3>> cells)
    : vertices_(std::move(vertices)), cells_(std::move(cells)) {
  if (vertices_.empty() || cells_.empty()) {
    throw GeometryError("mesh check failed: mesh has no vertices or no cells");
  }
  const int nv = static_cast<int>(vertices_.size());
  for (std::size_t c = 0; c < cells_.size(); ++c) {
    for (int v : cells_[c]) {
      if (v < 0 || v >= nv) {
        throw GeometryError(fmt::format("vertex index check failed: cell {} references vertex {}", c, v));
      }
    }
  }

  bbox_ = {std::numeric_limits<double>::max(), std::numeric_limits<double>::max(),
           std::numeric_limits<double>::lowest(), std::numeric_limits<double>::lowest()};
  for (const auto& p : vertices_) {
    bbox_.x0 = std::min(bbox_.x0, p.x);
    bbox_.y0 = std::min(bbox_.y0, p.y);
    bbox_.x1 = std::max(bbox_.x1, p.x);
    bbox_.y1 = std::max(bbox_.y1, p.y);
  }

  const double area_floor = 1e-14 * bbox_.diameter() * bbox_.diameter();
  areas_.resize(cells_.size());
  centroids_.resize(cells_.size());
  for (std::size_t c = 0; c < cells_.size(); ++c) {
    const auto [a, b, d] = cell_points(static_cast<int>(c));
    areas_[c] = signed_area(a, b, d);
    if (!(areas_[c] > area_floor)) {
      throw GeometryError(fmt::format(
          "orientation check failed: cell {} has non-positive signed area {:.6g}", c, areas_[c]));
    }
    centroids_[c] = (1.0 / 3.0) * (a + b + d);
    total_area_ += areas_[c];
  }

  build_topology();
  build_index();
}

std::array<Point, 3> FineMesh::cell_points(int c) const {
  const auto& t = cells_[c];
  return {vertices_[t[0]], vertices_[t[1]], vertices_[t[2]]};
}

double FineMesh::facet_length(int f) const {
  const auto& v = facets_[f].vertices;
  return distance(vertices_[v[0]], vertices_[v[1]]);
}

Point FineMesh::facet_midpoint(int f) const {
  const auto& v = facets_[f].vertices;
  return 0.5 * (vertices_[v[0]] + vertices_[v[1]]);
}

void FineMesh::build_topology() {
  cell_facets_.resize(cells_.size());
  facet_lookup_.reserve(cells_.size() * 2);
  double boundary_area = 0.0;
  for (std::size_t c = 0; c < cells_.size(); ++c) {
    const auto& t = cells_[c];
    for (int k = 0; k < 3; ++k) {
      const int a = t[k];
      const int b = t[(k + 1) % 3];
      const auto key = edge_key(a, b);
      auto [it, inserted] = facet_lookup_.try_emplace(key, static_cast<int>(facets_.size()));
      if (inserted) {
        facets_.push_back({{a, b}, static_cast<int>(c), kBoundary});
      } else {
        Facet& f = facets_[it->second];
        if (!f.is_boundary()) {
          throw GeometryError(fmt::format(
              "facet multiplicity check failed: edge ({}, {}) has more than two incident cells", a, b));
        }
        if (f.vertices[0] != b || f.vertices[1] != a) {
          throw GeometryError(fmt::format(
              "facet multiplicity check failed: cells {} and {} overlap along edge ({}, {})", f.left,
              c, a, b));
        }
        f.right = static_cast<int>(c);
      }
      cell_facets_[c][k] = it->second;
    }
  }
  for (const auto& f : facets_) {
    if (f.is_boundary()) {
      boundary_area += 0.5 * cross(vertices_[f.vertices[0]], vertices_[f.vertices[1]]);
    }
  }
  if (std::abs(boundary_area - total_area_) > 1e-10 * std::abs(boundary_area)) {
    throw GeometryError(fmt::format(
        "area check failed: cell areas sum to {:.17g} but the boundary encloses {:.17g}", total_area_,
        boundary_area));
  }
}

void FineMesh::build_index() {
  const double n = static_cast<double>(cells_.size());
  const double w = std::max(bbox_.width(), 1e-300);
  const double h = std::max(bbox_.height(), 1e-300);
  const double target = std::max(1.0, n / 2.0);
  bins_x_ = std::max(1, static_cast<int>(std::lround(std::sqrt(target * w / h))));
  bins_y_ = std::max(1, static_cast<int>(std::lround(target / bins_x_)));
  bins_.assign(static_cast<std::size_t>(bins_x_) * bins_y_, {});
  for (std::size_t c = 0; c < cells_.size(); ++c) {
    const auto pts = cell_points(static_cast<int>(c));
    Point lo = pts[0];
    Point hi = pts[0];
    for (const auto& p : pts) {
      lo = {std::min(lo.x, p.x), std::min(lo.y, p.y)};
      hi = {std::max(hi.x, p.x), std::max(hi.y, p.y)};
    }
    const auto [bx0, by0] = bin_of(lo);
    const auto [bx1, by1] = bin_of(hi);
    for (int by = by0; by <= by1; ++by) {
      for (int bx = bx0; bx <= bx1; ++bx) {
        bins_[static_cast<std::size_t>(by) * bins_x_ + bx].push_back(static_cast<int>(c));
      }
    }
  }
}

std::pair<int, int> FineMesh::bin_of(Point p) const {
  const double fx = (p.x - bbox_.x0) / std::max(bbox_.width(), 1e-300) * bins_x_;
  const double fy = (p.y - bbox_.y0) / std::max(bbox_.height(), 1e-300) * bins_y_;
  const int bx = std::clamp(static_cast<int>(std::floor(fx)), 0, bins_x_ - 1);
  const int by = std::clamp(static_cast<int>(std::floor(fy)), 0, bins_y_ - 1);
  return {bx, by};
}

std::vector<int> FineMesh::cells_near(const Rect& box) const {
  const double pad = 1e-9 * diameter();
  const auto [bx0, by0] = bin_of({box.x0 - pad, box.y0 - pad});
  const auto [bx1, by1] = bin_of({box.x1 + pad, box.y1 + pad});
  std::vector<int> out;
  for (int by = by0; by <= by1; ++by) {
    for (int bx = bx0; bx <= bx1; ++bx) {
      const auto& bin = bins_[static_cast<std::size_t>(by) * bins_x_ + bx];
      out.insert(out.end(), bin.begin(), bin.end());
    }
  }
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

bool FineMesh::cell_contains(int c, Point p, double tol) const {
  const auto pts = cell_points(c);
  for (int k = 0; k < 3; ++k) {
    const Point a = pts[k];
    const Point b = pts[(k + 1) % 3];
    const Point e = b - a;
    if (cross(e, p - a) < -tol * norm(e)) return false;
  }
  return true;
}

std::optional<int> FineMesh::locate(Point p) const {
  const double tol = 1e-12 * diameter();
  if (!bbox_.contains(p, tol)) return std::nullopt;
  const auto [bx, by] = bin_of(p);
  const auto& bin = bins_[static_cast<std::size_t>(by) * bins_x_ + bx];
  std::optional<int> best;
  for (int c : bin) {
    if ((!best || c < *best) && cell_contains(c, p, tol)) best = c;
  }
  return best;
}

std::optional<int> FineMesh::find_facet(int v0, int v1) const {
  auto it = facet_lookup_.find(edge_key(v0, v1));
  if (it == facet_lookup_.end()) return std::nullopt;
  return it->second;
}

std::optional<int> FineMesh::find_vertex(Point p, double tol) const {
  std::optional<int> best;
  double best_d = tol;
  for (int c : cells_near({p.x - tol, p.y - tol, p.x + tol, p.y + tol})) {
    for (int v : cells_[c]) {
      const double d = distance(vertices_[v], p);
      if (d <= best_d && (!best || d < best_d || v < *best)) {
        best = v;
        best_d = d;
      }
    }
  }
  return best;
}

Point lattice_point(int nx, int ny, const Rect& domain, int i, int j) {
  const double x = i == nx ? domain.x1 : domain.x0 + i * (domain.width() / nx);
  const double y = j == ny ? domain.y1 : domain.y0 + j * (domain.height() / ny);
  return {x, y};
}

FineMesh generate_structured_mesh(int nx, int ny, const Rect& domain) {
  if (nx < 1 || ny < 1) {
    throw InputError(fmt::format("structured mesh needs positive counts, got {}x{}", nx, ny));
  }
  if (!(domain.width() > 0.0) || !(domain.height() > 0.0)) {
    throw InputError("structured mesh needs a rectangle with positive width and height");
  }
  std::vector<Point> vertices;
  vertices.reserve(static_cast<std::size_t>(nx + 1) * (ny + 1));
  for (int j = 0; j <= ny; ++j) {
    for (int i = 0; i <= nx; ++i) vertices.push_back(lattice_point(nx, ny, domain, i, j));
  }
  auto vid = [nx](int i, int j) { return j * (nx + 1) + i; };
  std::vector<std::array<int, 3>> cells;
  cells.reserve(static_cast<std::size_t>(2) * nx * ny);
  for (int j = 0; j < ny; ++j) {
    for (int i = 0; i < nx; ++i) {
      cells.push_back({vid(i, j), vid(i + 1, j), vid(i + 1, j + 1)});
      cells.push_back({vid(i, j), vid(i + 1, j + 1), vid(i, j + 1)});
    }
  }
  return FineMesh(std::move(vertices), std::move(cells));
}

}  // namespace nlmc::geometry
