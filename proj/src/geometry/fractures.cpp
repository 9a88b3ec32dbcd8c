#include "nlmc/error.hpp"
#include "nlmc/geometry.hpp"

#include <algorithm>
#include <limits>
#include <map>
#include <queue>

#include <fmt/format.h>

namespace nlmc::geometry {

namespace {

double point_segment_distance(Point p, const Segment& s, double* param = nullptr) {
  const Point d = s.b - s.a;
  const double len2 = dot(d, d);
  double u = len2 > 0.0 ? dot(p - s.a, d) / len2 : 0.0;
  u = std::clamp(u, 0.0, 1.0);
  if (param) *param = u;
  return distance(p, lerp(s.a, s.b, u));
}

double parameter_on(const Segment& s, Point p) {
  const Point d = s.b - s.a;
  const double len2 = dot(d, d);
  return len2 > 0.0 ? dot(p - s.a, d) / len2 : 0.0;
}

}  // namespace

double FractureGeometry::network_length(int l) const {
  double total = 0.0;
  for (std::size_t k = 0; k < segments.size(); ++k) {
    if (network[k] == l) total += segments[k].length();
  }
  return total;
}

std::optional<Point> segment_intersection(const Segment& s, const Segment& t, double tol) {
  // Shared endpoints and T-junctions first: they are the common case and the
  // parametric formula is ill-conditioned for them.
  for (Point p : {s.a, s.b}) {
    for (Point q : {t.a, t.b}) {
      if (distance(p, q) <= tol) return p;
    }
  }
  for (Point p : {t.a, t.b}) {
    if (point_segment_distance(p, s) <= tol) return p;
  }
  for (Point p : {s.a, s.b}) {
    if (point_segment_distance(p, t) <= tol) return p;
  }

  const Point d1 = s.b - s.a;
  const Point d2 = t.b - t.a;
  const double l1 = norm(d1);
  const double l2 = norm(d2);
  if (l1 == 0.0 || l2 == 0.0) return std::nullopt;
  const Point r = t.a - s.a;
  const double denom = cross(d1, d2);
  if (std::abs(denom) <= 1e-14 * l1 * l2) {
    // Parallel. Collinear overlaps always touch an endpoint of one segment,
    // which the checks above already caught.
    return std::nullopt;
  }
  const double u = cross(r, d2) / denom;
  const double v = cross(r, d1) / denom;
  if (u < 0.0 || u > 1.0 || v < 0.0 || v > 1.0) return std::nullopt;
  return lerp(s.a, s.b, u);
}

std::vector<std::pair<int, int>> intersecting_pairs(std::span<const Segment> segments, double tol) {
  std::vector<std::pair<int, int>> pairs;
  const std::size_t n = segments.size();
  if (n < 2) return pairs;

  Rect box{std::numeric_limits<double>::max(), std::numeric_limits<double>::max(),
           std::numeric_limits<double>::lowest(), std::numeric_limits<double>::lowest()};
  for (const auto& s : segments) {
    for (Point p : {s.a, s.b}) {
      box.x0 = std::min(box.x0, p.x);
      box.y0 = std::min(box.y0, p.y);
      box.x1 = std::max(box.x1, p.x);
      box.y1 = std::max(box.y1, p.y);
    }
  }
  const int bins = std::max(1, static_cast<int>(std::sqrt(static_cast<double>(n))));
  const double w = std::max(box.width(), tol) + 2 * tol;
  const double h = std::max(box.height(), tol) + 2 * tol;
  auto bin = [&](double v, double lo, double extent) {
    return std::clamp(static_cast<int>((v - lo + tol) / extent * bins), 0, bins - 1);
  };
  std::vector<std::vector<int>> grid(static_cast<std::size_t>(bins) * bins);
  for (std::size_t k = 0; k < n; ++k) {
    const auto& s = segments[k];
    const int bx0 = bin(std::min(s.a.x, s.b.x) - tol, box.x0, w);
    const int bx1 = bin(std::max(s.a.x, s.b.x) + tol, box.x0, w);
    const int by0 = bin(std::min(s.a.y, s.b.y) - tol, box.y0, h);
    const int by1 = bin(std::max(s.a.y, s.b.y) + tol, box.y0, h);
    for (int by = by0; by <= by1; ++by) {
      for (int bx = bx0; bx <= bx1; ++bx) {
        grid[static_cast<std::size_t>(by) * bins + bx].push_back(static_cast<int>(k));
      }
    }
  }
  for (const auto& cell : grid) {
    for (std::size_t a = 0; a < cell.size(); ++a) {
      for (std::size_t b = a + 1; b < cell.size(); ++b) {
        const int i = std::min(cell[a], cell[b]);
        const int j = std::max(cell[a], cell[b]);
        pairs.emplace_back(i, j);
      }
    }
  }
  std::sort(pairs.begin(), pairs.end());
  pairs.erase(std::unique(pairs.begin(), pairs.end()), pairs.end());
  std::erase_if(pairs, [&](const auto& p) {
    return !segment_intersection(segments[p.first], segments[p.second], tol).has_value();
  });
  return pairs;
}

namespace {

double segment_scale(std::span<const Segment> segments) {
  double lo_x = std::numeric_limits<double>::max();
  double lo_y = lo_x;
  double hi_x = std::numeric_limits<double>::lowest();
  double hi_y = hi_x;
  for (const auto& s : segments) {
    for (Point p : {s.a, s.b}) {
      lo_x = std::min(lo_x, p.x);
      lo_y = std::min(lo_y, p.y);
      hi_x = std::max(hi_x, p.x);
      hi_y = std::max(hi_y, p.y);
    }
  }
  return segments.empty() ? 1.0 : std::max(std::hypot(hi_x - lo_x, hi_y - lo_y), 1e-300);
}

}  // namespace

FractureGeometry label_networks(std::vector<Segment> segments, FractureMode mode,
                                std::vector<int> groups) {
  FractureGeometry out;
  out.mode = mode;
  out.segments = std::move(segments);
  const std::size_t n = out.segments.size();
  if (groups.empty()) groups.assign(n, -1);
  if (groups.size() != n) {
    throw InputError(fmt::format("{} fracture groups given for {} segments", groups.size(), n));
  }
  out.group = std::move(groups);
  out.network.assign(n, -1);

  const double tol = 1e-9 * segment_scale(out.segments);
  std::vector<std::vector<int>> adjacency(n);
  for (const auto& [i, j] : intersecting_pairs(out.segments, tol)) {
    adjacency[i].push_back(j);
    adjacency[j].push_back(i);
  }
  int label = 0;
  for (std::size_t start = 0; start < n; ++start) {
    if (out.network[start] >= 0) continue;
    std::queue<int> frontier;
    frontier.push(static_cast<int>(start));
    out.network[start] = label;
    while (!frontier.empty()) {
      const int k = frontier.front();
      frontier.pop();
      for (int m : adjacency[k]) {
        if (out.network[m] < 0) {
          out.network[m] = label;
          frontier.push(m);
        }
      }
    }
    ++label;
  }
  out.num_networks = label;
  return out;
}

std::vector<int> match_dfm_facets(const FineMesh& mesh, const FractureGeometry& fractures) {
  const double tol = 1e-9 * mesh.diameter();
  std::vector<int> facets(fractures.segments.size(), -1);
  std::map<int, int> owner;
  for (std::size_t k = 0; k < fractures.segments.size(); ++k) {
    const auto& s = fractures.segments[k];
    const auto va = mesh.find_vertex(s.a, tol);
    const auto vb = mesh.find_vertex(s.b, tol);
    std::optional<int> facet;
    if (va && vb) facet = mesh.find_facet(*va, *vb);
    if (!facet) {
      throw GeometryError(fmt::format(
          "DFM conformity check failed: fracture segment {} ({:.9g},{:.9g})-({:.9g},{:.9g}) does not "
          "match a mesh facet",
          k, s.a.x, s.a.y, s.b.x, s.b.y));
    }
    auto [it, inserted] = owner.emplace(*facet, static_cast<int>(k));
    if (!inserted) {
      throw GeometryError(fmt::format(
          "DFM conformity check failed: segments {} and {} both match facet {}", it->second, k, *facet));
    }
    facets[k] = *facet;
  }
  return facets;
}

FractureMesh discretize_fractures(const FineMesh& mesh, const FractureGeometry& fractures) {
  FractureMesh out;
  const std::size_t n = fractures.segments.size();
  // Parameter interval of each piece along its parent segment.
  std::vector<std::vector<std::pair<int, std::array<double, 2>>>> by_segment(n);

  if (fractures.mode == FractureMode::dfm) {
    out.segment_facets = match_dfm_facets(mesh, fractures);
    for (std::size_t k = 0; k < n; ++k) {
      const auto& facet = mesh.facets()[out.segment_facets[k]];
      FracturePiece piece;
      piece.segment = static_cast<int>(k);
      piece.geometry = fractures.segments[k];
      piece.length = fractures.segments[k].length();
      piece.cells = {facet.left, facet.right};
      by_segment[k].push_back({static_cast<int>(out.pieces.size()), {0.0, 1.0}});
      out.pieces.push_back(piece);
    }
  } else {
    for (std::size_t k = 0; k < n; ++k) {
      const auto& s = fractures.segments[k];
      for (const auto& clip : clip_segment_to_cells(s, mesh)) {
        FracturePiece piece;
        piece.segment = static_cast<int>(k);
        piece.geometry = clip.piece;
        piece.length = clip.length;
        piece.cells = {clip.cell, kBoundary};
        const std::array<double, 2> range{parameter_on(s, clip.piece.a), parameter_on(s, clip.piece.b)};
        const int id = static_cast<int>(out.pieces.size());
        if (!by_segment[k].empty()) out.connections.push_back({by_segment[k].back().first, id});
        by_segment[k].push_back({id, range});
        out.pieces.push_back(piece);
      }
    }
  }

  auto piece_at = [&](int seg, Point x) -> std::optional<int> {
    const double u = parameter_on(fractures.segments[seg], x);
    const double slack = 1e-9;
    for (const auto& [id, range] : by_segment[seg]) {
      if (u >= range[0] - slack && u <= range[1] + slack) return id;
    }
    return std::nullopt;
  };

  const double tol = 1e-9 * mesh.diameter();
  for (const auto& [i, j] : intersecting_pairs(fractures.segments, tol)) {
    const auto x = segment_intersection(fractures.segments[i], fractures.segments[j], tol);
    if (!x) continue;
    const auto pi = piece_at(i, *x);
    const auto pj = piece_at(j, *x);
    if (pi && pj && *pi != *pj) out.connections.push_back({std::min(*pi, *pj), std::max(*pi, *pj)});
  }
  for (auto& c : out.connections) {
    if (c[0] > c[1]) std::swap(c[0], c[1]);
  }
  std::sort(out.connections.begin(), out.connections.end());
  out.connections.erase(std::unique(out.connections.begin(), out.connections.end()), out.connections.end());
  return out;
}

}  // namespace nlmc::geometry
