#include "nlmc/cli.hpp"
#include "nlmc/error.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <set>

#include <fmt/format.h>

namespace nlmc::cli {

using geometry::Point;
using geometry::Rect;
using geometry::Segment;

namespace {

constexpr int kMaxAttempts = 100000;

bool strictly_inside(const Rect& r, Point p) { return p.x > r.x0 && p.x < r.x1 && p.y > r.y0 && p.y < r.y1; }

}  // namespace

Random::Random(std::uint64_t seed) : engine_(seed) {}

double Random::uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

double Random::uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

double Random::normal() {
  const double u1 = 1.0 - uniform();
  const double u2 = uniform();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

int Random::below(int n) {
  if (n <= 0) throw InputError("random index range must be positive");
  return std::min(n - 1, static_cast<int>(uniform() * n));
}

GeneratedFractures generate_embedded_fractures(const GeometryConfig& config, std::span<const Point> anchors) {
  Random rng(config.seed);
  GeneratedFractures out;
  const Rect& d = config.domain;
  for (int k = 0; k < config.fractures; ++k) {
    bool placed = false;
    for (int attempt = 0; attempt < kMaxAttempts && !placed; ++attempt) {
      const double length = rng.uniform(config.length_min, config.length_max);
      const double angle = rng.uniform(0.0, std::numbers::pi);
      const Point mid = static_cast<std::size_t>(k) < anchors.size()
                            ? anchors[k]
                            : Point{rng.uniform(d.x0, d.x1), rng.uniform(d.y0, d.y1)};
      const Point half{0.5 * length * std::cos(angle), 0.5 * length * std::sin(angle)};
      const Segment s{mid - half, mid + half};
      if (strictly_inside(d, s.a) && strictly_inside(d, s.b)) {
        out.segments.push_back(s);
        out.groups.push_back(k);
        placed = true;
      }
    }
    if (!placed) {
      throw GeometryError(fmt::format("could not place fracture {} of length {}..{} inside the domain", k,
                                      config.length_min, config.length_max));
    }
  }
  return out;
}

GeneratedFractures generate_lattice_fractures(const GeometryConfig& config, std::span<const Point> anchors) {
  const int nx = config.nx;
  const int ny = config.ny;
  const Rect& d = config.domain;
  const double hx = d.width() / nx;
  const double hy = d.height() / ny;
  struct Direction {
    int di, dj;
    double step;
  };
  const Direction directions[3] = {{1, 0, hx}, {0, 1, hy}, {1, 1, std::hypot(hx, hy)}};
  if (config.fractures > 0 && config.length_max < std::min(hx, hy)) {
    throw GeometryError(fmt::format("fractures of length <= {} cannot follow facets of length >= {}",
                                    config.length_max, std::min(hx, hy)));
  }

  Random rng(config.seed);
  GeneratedFractures out;
  std::set<std::array<int, 4>> used;
  for (int k = 0; k < config.fractures; ++k) {
    bool placed = false;
    for (int attempt = 0; attempt < kMaxAttempts && !placed; ++attempt) {
      const auto& dir = directions[rng.below(3)];
      const double length = rng.uniform(config.length_min, config.length_max);
      const int steps = std::max(1, static_cast<int>(std::lround(length / dir.step)));
      int i0 = 0;
      int j0 = 0;
      if (static_cast<std::size_t>(k) < anchors.size()) {
        i0 = static_cast<int>(std::lround((anchors[k].x - d.x0) / hx));
        j0 = static_cast<int>(std::lround((anchors[k].y - d.y0) / hy));
      } else {
        i0 = rng.below(nx + 1);
        j0 = rng.below(ny + 1);
      }
      const int i1 = i0 + steps * dir.di;
      const int j1 = j0 + steps * dir.dj;
      if (i1 > nx || j1 > ny) continue;
      if (dir.dj == 0 && (j0 == 0 || j0 == ny)) continue;  // would lie on the boundary
      if (dir.di == 0 && (i0 == 0 || i0 == nx)) continue;
      std::vector<std::array<int, 4>> facets;
      bool clash = false;
      for (int n = 0; n < steps && !clash; ++n) {
        const std::array<int, 4> f{i0 + n * dir.di, j0 + n * dir.dj, i0 + (n + 1) * dir.di, j0 + (n + 1) * dir.dj};
        clash = used.contains(f);
        facets.push_back(f);
      }
      if (clash) continue;
      for (const auto& f : facets) {
        used.insert(f);
        out.segments.push_back({geometry::lattice_point(nx, ny, d, f[0], f[1]),
                                geometry::lattice_point(nx, ny, d, f[2], f[3])});
        out.groups.push_back(k);
      }
      placed = true;
    }
    if (!placed) {
      throw GeometryError(fmt::format("could not place lattice fracture {} without overlapping earlier ones", k));
    }
  }
  return out;
}

std::vector<double> generate_lognormal_field(const geometry::FineMesh& mesh, double mean, double log10_std,
                                             double correlation, std::uint64_t seed) {
  constexpr int kModes = 128;
  Random rng(seed);
  struct Mode {
    double kx, ky, phase;
  };
  std::vector<Mode> modes(kModes);
  for (auto& m : modes) {
    m.kx = rng.normal() / correlation;
    m.ky = rng.normal() / correlation;
    m.phase = rng.uniform(0.0, 2.0 * std::numbers::pi);
  }
  const double scale = std::sqrt(2.0 / kModes);
  std::vector<double> field(mesh.num_cells());
  for (std::size_t c = 0; c < field.size(); ++c) {
    const Point x = mesh.cell_centroid(static_cast<int>(c));
    double g = 0.0;
    for (const auto& m : modes) g += std::cos(m.kx * x.x + m.ky * x.y + m.phase);
    field[c] = mean * std::pow(10.0, log10_std * scale * g);
  }
  return field;
}

}  // namespace nlmc::cli
