#include "nlmc/error.hpp"
#include "nlmc/geometry.hpp"

#include <algorithm>

#include <fmt/format.h>

namespace nlmc::geometry {

std::vector<ClipPiece> clip_segment_to_cells(const Segment& segment, const FineMesh& mesh) {
  std::vector<ClipPiece> out;
  const double length = segment.length();
  if (length <= 1e-15 * mesh.diameter()) return out;

  for (Point end : {segment.a, segment.b}) {
    if (!mesh.locate(end)) {
      throw InputError(fmt::format("segment endpoint ({:.9g}, {:.9g}) lies outside the mesh", end.x, end.y));
    }
  }

  const Rect box{std::min(segment.a.x, segment.b.x), std::min(segment.a.y, segment.b.y),
                 std::max(segment.a.x, segment.b.x), std::max(segment.a.y, segment.b.y)};
  const std::vector<int> candidates = mesh.cells_near(box);

  // Breakpoints are the parameters where the segment crosses candidate edges.
  const Point d = segment.b - segment.a;
  std::vector<double> breaks{0.0, 1.0};
  for (int c : candidates) {
    const auto pts = mesh.cell_points(c);
    for (int k = 0; k < 3; ++k) {
      const Point p = pts[k];
      const Point e = pts[(k + 1) % 3] - p;
      const double denom = cross(d, e);
      const Point r = p - segment.a;
      if (std::abs(denom) > 1e-14 * length * norm(e)) {
        const double u = cross(r, e) / denom;
        const double v = cross(r, d) / denom;
        if (u > 0.0 && u < 1.0 && v >= -1e-12 && v <= 1.0 + 1e-12) breaks.push_back(u);
      } else if (std::abs(cross(d, r)) <= 1e-12 * length * length) {
        // Collinear edge: its endpoints split the segment.
        for (Point q : {p, pts[(k + 1) % 3]}) {
          const double u = dot(q - segment.a, d) / (length * length);
          if (u > 0.0 && u < 1.0) breaks.push_back(u);
        }
      }
    }
  }
  std::sort(breaks.begin(), breaks.end());
  breaks.erase(std::unique(breaks.begin(), breaks.end(),
                           [](double x, double y) { return std::abs(x - y) <= 1e-13; }),
               breaks.end());
  breaks.back() = 1.0;

  const double tol = 1e-12 * mesh.diameter();
  for (std::size_t k = 0; k + 1 < breaks.size(); ++k) {
    const double u0 = breaks[k];
    const double u1 = breaks[k + 1];
    const Point mid = lerp(segment.a, segment.b, 0.5 * (u0 + u1));
    int host = kBoundary;
    for (int c : candidates) {
      if (mesh.cell_contains(c, mid, tol)) {
        host = c;
        break;
      }
    }
    if (host == kBoundary) {
      throw InputError(fmt::format("segment ({:.9g},{:.9g})-({:.9g},{:.9g}) leaves the mesh domain",
                                   segment.a.x, segment.a.y, segment.b.x, segment.b.y));
    }
    if (!out.empty() && out.back().cell == host) {
      out.back().piece.b = lerp(segment.a, segment.b, u1);
      out.back().length += (u1 - u0) * length;
      continue;
    }
    out.push_back({host, {lerp(segment.a, segment.b, u0), lerp(segment.a, segment.b, u1)}, (u1 - u0) * length});
  }
  out.front().piece.a = segment.a;
  out.back().piece.b = segment.b;
  return out;
}

}  // namespace nlmc::geometry
