#include <doctest.h>

#include <algorithm>
#include <functional>
#include <cmath>
#include <map>
#include <numeric>
#include <set>
#include <sstream>

#include "nlmc/error.hpp"
#include "nlmc/geometry.hpp"
#include "support.hpp"

using namespace nlmc;
using namespace nlmc::geometry;

namespace {

const Rect kUnit{0.0, 0.0, 1.0, 1.0};

// Brute-force closed-segment intersection via orientation signs.
bool oracle_intersects(const Segment& s, const Segment& t) {
  const double eps = 1e-12;
  auto orient = [](Point a, Point b, Point c) { return cross(b - a, c - a); };
  auto on_segment = [&](Point a, Point b, Point p) {
    return std::abs(orient(a, b, p)) <= eps && p.x >= std::min(a.x, b.x) - eps && p.x <= std::max(a.x, b.x) + eps &&
           p.y >= std::min(a.y, b.y) - eps && p.y <= std::max(a.y, b.y) + eps;
  };
  const double d1 = orient(t.a, t.b, s.a);
  const double d2 = orient(t.a, t.b, s.b);
  const double d3 = orient(s.a, s.b, t.a);
  const double d4 = orient(s.a, s.b, t.b);
  if (((d1 > eps && d2 < -eps) || (d1 < -eps && d2 > eps)) && ((d3 > eps && d4 < -eps) || (d3 < -eps && d4 > eps))) {
    return true;
  }
  return on_segment(t.a, t.b, s.a) || on_segment(t.a, t.b, s.b) || on_segment(s.a, s.b, t.a) ||
         on_segment(s.a, s.b, t.b);
}

int union_find_components(const std::vector<Segment>& segs, std::vector<int>& root_of) {
  std::vector<int> parent(segs.size());
  std::iota(parent.begin(), parent.end(), 0);
  std::function<int(int)> find = [&](int x) { return parent[x] == x ? x : parent[x] = find(parent[x]); };
  for (std::size_t i = 0; i < segs.size(); ++i) {
    for (std::size_t j = i + 1; j < segs.size(); ++j) {
      if (oracle_intersects(segs[i], segs[j])) parent[find(static_cast<int>(i))] = find(static_cast<int>(j));
    }
  }
  std::set<int> roots;
  root_of.resize(segs.size());
  for (std::size_t i = 0; i < segs.size(); ++i) roots.insert(root_of[i] = find(static_cast<int>(i)));
  return static_cast<int>(roots.size());
}

}  // namespace

TEST_CASE("structured mesh counts and areas") {
  const auto one = generate_structured_mesh(1, 1, kUnit);
  CHECK(one.num_cells() == 2);
  CHECK(one.total_area() == doctest::Approx(1.0).epsilon(1e-14));

  const auto ten = generate_structured_mesh(10, 10, kUnit);
  CHECK(ten.num_cells() == 200);
  const auto facets = ten.facets();
  const auto boundary = std::count_if(facets.begin(), facets.end(), [](const Facet& f) { return f.is_boundary(); });
  CHECK(facets.size() == 320);
  CHECK(boundary == 40);
  CHECK(facets.size() - boundary == 280);
  // Euler characteristic of a disc: V − E + F = 1 counting only inner faces.
  CHECK(static_cast<long>(ten.num_vertices()) - static_cast<long>(facets.size()) + static_cast<long>(ten.num_cells()) ==
        1);

  const auto wide = generate_structured_mesh(2, 1, {0.0, 0.0, 2.0, 1.0});
  REQUIRE(wide.num_cells() == 4);
  for (int c = 0; c < 4; ++c) CHECK(wide.cell_area(c) == doctest::Approx(0.5).epsilon(1e-14));

  CHECK_THROWS_AS(generate_structured_mesh(0, 3, kUnit), InputError);
  CHECK_THROWS_AS(generate_structured_mesh(2, 2, {0.0, 0.0, 0.0, 1.0}), InputError);
}

TEST_CASE("mesh invariants on generated meshes") {
  for (int n : {1, 3, 7, 16}) {
    const auto mesh = generate_structured_mesh(n, n + 1, {-1.0, 2.0, 1.5, 3.0});
    for (std::size_t c = 0; c < mesh.num_cells(); ++c) CHECK(mesh.cell_area(static_cast<int>(c)) > 0.0);
    std::map<int, int> incidence;
    for (const auto& f : mesh.facets()) {
      CHECK(f.left != f.right);
      ++incidence[f.left];
      if (!f.is_boundary()) ++incidence[f.right];
    }
    for (const auto& [cell, count] : incidence) CHECK(count == 3);
    CHECK(std::abs(mesh.total_area() - 2.5) <= 1e-10 * 2.5);
  }
}

TEST_CASE("mesh file parsing and validation") {
  const std::string square = "MESH2D\nVERTICES 4\n0 0\n1 0\n1 1\n0 1\nCELLS 2\n0 1 2\n0 2 3\n";
  std::istringstream in(square);
  const auto file = parse_mesh(in, "square");
  CHECK(file.mesh.num_cells() == 2);
  CHECK(file.mesh.total_area() == doctest::Approx(1.0));
  CHECK(file.fractures.empty());

  std::istringstream repeated("MESH2D\nVERTICES 4\n0 0\n1 0\n1 1\n0 1\nCELLS 3\n0 1 2\n0 2 3\n0 1 2\n");
  try {
    parse_mesh(repeated, "repeated");
    FAIL("repeated triangle accepted");
  } catch (const GeometryError& e) {
    CHECK(std::string(e.what()).find("facet multiplicity") != std::string::npos);
  }

  std::istringstream bad_count("MESH2D\nVERTICES 4\n0 0\n1 0\n1 1\nCELLS 1\n0 1 2\n");
  try {
    parse_mesh(bad_count, "short");
    FAIL("short vertex list accepted");
  } catch (const InputError& e) {
    CHECK(std::string(e.what()).find("short:") == 0);
  }

  std::istringstream clockwise("MESH2D\nVERTICES 3\n0 0\n1 0\n0 1\nCELLS 1\n0 2 1\n");
  CHECK_THROWS_AS(parse_mesh(clockwise, "cw"), GeometryError);
}

TEST_CASE("mesh round trip keeps connectivity and coordinates") {
  const auto dir = test_support::scratch_dir("mesh_roundtrip");
  const auto mesh = generate_structured_mesh(5, 4, {0.0, 0.0, 1.0, 0.7});
  const std::vector<Segment> fractures{{{0.11, 0.2}, {0.73, 0.5}}, {{0.3, 0.1}, {0.3, 0.6}}};
  const std::vector<int> hints{-1, 4};
  write_mesh(dir / "m.txt", mesh, fractures, hints);
  const auto back = read_mesh(dir / "m.txt");
  REQUIRE(back.mesh.num_cells() == mesh.num_cells());
  for (std::size_t c = 0; c < mesh.num_cells(); ++c) CHECK(back.mesh.cells()[c] == mesh.cells()[c]);
  for (std::size_t v = 0; v < mesh.num_vertices(); ++v) CHECK(back.mesh.vertices()[v] == mesh.vertices()[v]);
  CHECK(back.fractures == fractures);
  CHECK(back.hints == hints);

  const std::vector<double> field{1.0, 2.5e-7, 3.0};
  write_cell_data(dir / "k.txt", field);
  CHECK(read_cell_data(dir / "k.txt", 3) == field);
  CHECK_THROWS_AS(read_cell_data(dir / "k.txt", 4), InputError);
}

TEST_CASE("point location") {
  const auto mesh = generate_structured_mesh(4, 4, kUnit);
  for (std::size_t c = 0; c < mesh.num_cells(); ++c) {
    const auto found = mesh.locate(mesh.cell_centroid(static_cast<int>(c)));
    REQUIRE(found);
    CHECK(*found == static_cast<int>(c));
  }
  CHECK_FALSE(mesh.locate({1.5, 0.5}));
}

TEST_CASE("segment clipping examples") {
  const auto mesh = generate_structured_mesh(1, 1, kUnit);
  const auto inside = clip_segment_to_cells({{0.6, 0.2}, {0.8, 0.3}}, mesh);
  REQUIRE(inside.size() == 1);
  CHECK(inside[0].length == doctest::Approx(std::hypot(0.2, 0.1)));

  const auto across = clip_segment_to_cells({{0.0, 0.5}, {1.0, 0.5}}, mesh);
  REQUIRE(across.size() == 2);
  CHECK(across[0].length == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(across[1].length == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(across[0].cell != across[1].cell);

  CHECK(clip_segment_to_cells({{0.3, 0.3}, {0.3, 0.3}}, mesh).empty());
  CHECK_THROWS_AS(clip_segment_to_cells({{0.5, 0.5}, {1.5, 0.5}}, mesh), InputError);
}

TEST_CASE("clipping conservation and sampling oracle over random seeds") {
  for (unsigned seed = 0; seed < 100; ++seed) {
    const int n = 3 + static_cast<int>(seed % 9);
    const auto mesh = generate_structured_mesh(n, n + static_cast<int>(seed % 3), kUnit);
    const auto segs = test_support::random_segments(1000 + seed, 3, 0.05, 0.8);
    for (const auto& s : segs) {
      const auto pieces = clip_segment_to_cells(s, mesh);
      double total = 0.0;
      std::map<int, double> by_cell;
      for (const auto& p : pieces) {
        total += p.length;
        by_cell[p.cell] += p.length;
        CHECK(mesh.cell_contains(p.cell, p.piece.midpoint(), 1e-12));
        CHECK(mesh.cell_contains(p.cell, p.piece.a, 1e-10));
        CHECK(mesh.cell_contains(p.cell, p.piece.b, 1e-10));
      }
      CHECK(std::abs(total - s.length()) <= 1e-10 * s.length());

      // Sampling oracle: the share of sample points landing strictly inside a
      // cell estimates the clipped length in that cell.
      constexpr int kSamples = 4000;
      std::map<int, int> hits;
      for (int k = 0; k < kSamples; ++k) {
        const Point x = lerp(s.a, s.b, (k + 0.5) / kSamples);
        for (std::size_t c = 0; c < mesh.num_cells(); ++c) {
          if (mesh.cell_contains(static_cast<int>(c), x, 0.0)) {
            ++hits[static_cast<int>(c)];
            break;
          }
        }
      }
      for (const auto& [cell, count] : hits) {
        const double estimate = s.length() * count / kSamples;
        CHECK(std::abs(estimate - by_cell[cell]) <= 2.5 * s.length() / kSamples);
      }
    }
  }
}

TEST_CASE("network labeling examples") {
  const std::vector<Segment> disjoint{{{0.1, 0.1}, {0.4, 0.1}}, {{0.1, 0.5}, {0.4, 0.5}}};
  CHECK(label_networks(disjoint, FractureMode::efm).num_networks == 2);
  const std::vector<Segment> crossing{{{0.1, 0.1}, {0.5, 0.5}}, {{0.1, 0.5}, {0.5, 0.1}}};
  CHECK(label_networks(crossing, FractureMode::efm).num_networks == 1);
  const std::vector<Segment> touching{{{0.1, 0.1}, {0.5, 0.1}}, {{0.5, 0.1}, {0.5, 0.6}}, {{0.3, 0.1}, {0.3, 0.05}}};
  const auto t = label_networks(touching, FractureMode::efm);
  CHECK(t.num_networks == 1);
  CHECK(t.network == std::vector<int>{0, 0, 0});
}

TEST_CASE("network labeling agrees with union-find oracle over random seeds") {
  for (unsigned seed = 0; seed < 100; ++seed) {
    const auto segs = test_support::random_segments(seed, 30, 0.1, 0.3);
    const auto fg = label_networks(segs, FractureMode::efm);
    std::vector<int> roots;
    const int expected = union_find_components(segs, roots);
    CHECK(fg.num_networks == expected);
    for (std::size_t i = 0; i < segs.size(); ++i) {
      for (std::size_t j = i + 1; j < segs.size(); ++j) {
        CHECK((fg.network[i] == fg.network[j]) == (roots[i] == roots[j]));
      }
    }
  }
}

TEST_CASE("coarse grid examples") {
  const auto mesh = generate_structured_mesh(20, 20, kUnit);
  {
    const auto fg = label_networks({{{0.12, 0.12}, {0.18, 0.17}}}, FractureMode::efm);
    const auto fm = discretize_fractures(mesh, fg);
    const auto grid = build_coarse_grid(mesh, fg, fm, 5, 5);
    for (int i = 0; i < grid.num_cells(); ++i) CHECK(grid.num_networks_in(i) == (i == 0 ? 1 : 0));
  }
  {
    const auto fg = label_networks({{{0.12, 0.11}, {0.33, 0.13}}}, FractureMode::efm);
    const auto fm = discretize_fractures(mesh, fg);
    const auto grid = build_coarse_grid(mesh, fg, fm, 5, 5);
    REQUIRE(grid.fragments().size() == 2);
    const double sum = grid.fragments()[0].measure + grid.fragments()[1].measure;
    CHECK(std::abs(sum - fg.segments[0].length()) <= 1e-12);
    // Clipping oracle for the split point at the coarse edge x = 0.2.
    const double t = (0.2 - 0.12) / (0.33 - 0.12);
    CHECK(grid.fragments()[0].measure == doctest::Approx(t * fg.segments[0].length()).epsilon(1e-12));
  }
  const auto fg = label_networks({}, FractureMode::efm);
  const auto grid = build_coarse_grid(mesh, fg, discretize_fractures(mesh, fg), 20, 20);
  CHECK(grid.num_cells() == 400);
  CHECK(grid.num_coarse_dofs() == 400);
  for (int c = 0; c < static_cast<int>(mesh.num_cells()); ++c) {
    CHECK(grid.rect(grid.cell_of_fine(c)).contains(mesh.cell_centroid(c)));
  }
}

TEST_CASE("fragment conservation over random seeds") {
  const auto mesh = generate_structured_mesh(30, 30, kUnit);
  for (unsigned seed = 0; seed < 100; ++seed) {
    const auto segs = test_support::random_segments(500 + seed, 12, 0.1, 0.4);
    const auto fg = label_networks(segs, FractureMode::efm);
    const auto fm = discretize_fractures(mesh, fg);
    const auto grid = build_coarse_grid(mesh, fg, fm, 6, 6);
    std::vector<double> per_network(static_cast<std::size_t>(fg.num_networks), 0.0);
    for (const auto& f : grid.fragments()) per_network[f.network] += f.measure;
    for (int l = 0; l < fg.num_networks; ++l) {
      CHECK(std::abs(per_network[l] - fg.network_length(l)) <= 1e-9 * fg.network_length(l));
    }
  }
}

TEST_CASE("oversampled regions") {
  const auto mesh = generate_structured_mesh(10, 10, kUnit);
  const auto fg = label_networks({}, FractureMode::efm);
  const auto grid = build_coarse_grid(mesh, fg, discretize_fractures(mesh, fg), 5, 5);
  CHECK(oversample(grid, 12, 1).coarse_cells.size() == 9);
  CHECK(oversample(grid, 0, 1).coarse_cells.size() == 4);
  CHECK(oversample(grid, 12, 10).coarse_cells.size() == 25);
  for (int i = 0; i < grid.num_cells(); ++i) {
    const auto s2 = oversample(grid, i, 2);
    const auto s3 = oversample(grid, i, 3);
    CHECK(s2.contains_coarse(i));
    CHECK(std::includes(s3.coarse_cells.begin(), s3.coarse_cells.end(), s2.coarse_cells.begin(),
                        s2.coarse_cells.end()));
    CHECK(std::includes(s3.fine_cells.begin(), s3.fine_cells.end(), s2.fine_cells.begin(), s2.fine_cells.end()));
    CHECK(s2.fine_cells.size() == 8 * s2.coarse_cells.size());
  }
  CHECK_THROWS_AS(oversample(grid, 25, 1), InputError);
  CHECK_THROWS_AS(oversample(grid, 3, 0), InputError);
}

TEST_CASE("DFM conformity") {
  const auto mesh = generate_structured_mesh(4, 4, kUnit);
  const auto good = label_networks({{{0.25, 0.25}, {0.5, 0.25}}, {{0.5, 0.25}, {0.75, 0.5}}}, FractureMode::dfm);
  const auto facets = match_dfm_facets(mesh, good);
  REQUIRE(facets.size() == 2);
  CHECK(mesh.facet_length(facets[0]) == doctest::Approx(0.25));
  const auto fm = discretize_fractures(mesh, good);
  REQUIRE(fm.size() == 2);
  for (const auto& p : fm.pieces) {
    CHECK(p.cells[0] != kBoundary);
    CHECK(p.cells[1] != kBoundary);
  }
  CHECK(fm.connections.size() == 1);

  const auto off = label_networks({{{0.25, 0.3}, {0.5, 0.3}}}, FractureMode::dfm);
  CHECK_THROWS_AS(match_dfm_facets(mesh, off), GeometryError);
  const auto anti = label_networks({{{0.25, 0.5}, {0.5, 0.25}}}, FractureMode::dfm);
  CHECK_THROWS_AS(match_dfm_facets(mesh, anti), GeometryError);
}

TEST_CASE("EFM fracture discretization couples consecutive and crossing pieces") {
  const auto mesh = generate_structured_mesh(4, 4, kUnit);
  const auto fg = label_networks({{{0.1, 0.4}, {0.9, 0.4}}, {{0.6, 0.1}, {0.6, 0.9}}}, FractureMode::efm);
  const auto fm = discretize_fractures(mesh, fg);
  double total = 0.0;
  for (const auto& p : fm.pieces) total += p.length;
  CHECK(total == doctest::Approx(1.6).epsilon(1e-12));
  std::set<int> along_first;
  for (std::size_t k = 0; k < fm.size(); ++k) {
    if (fm.pieces[k].segment == 0) along_first.insert(static_cast<int>(k));
  }
  int internal = 0;
  int junction = 0;
  for (const auto& [a, b] : fm.connections) {
    const bool sa = along_first.contains(a);
    const bool sb = along_first.contains(b);
    (sa == sb ? internal : junction) += 1;
  }
  CHECK(internal == static_cast<int>(fm.size()) - 2);
  CHECK(junction >= 1);
}
