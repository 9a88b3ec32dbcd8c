#include "nlmc/error.hpp"
#include "nlmc/geometry.hpp"

#include <fstream>
#include <sstream>

#include <fmt/format.h>
#include <fmt/os.h>

namespace nlmc::geometry {

namespace {

/// Line reader that skips blank lines and `#` comments and remembers the
/// line number for error messages.
class LineReader {
 public:
  LineReader(std::istream& in, std::string source) : in_(in), source_(std::move(source)) {}

  bool next(std::istringstream& fields) {
    std::string line;
    while (std::getline(in_, line)) {
      ++line_no_;
      if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
      if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
      fields.clear();
      fields.str(line);
      return true;
    }
    return false;
  }

  void require(std::istringstream& fields, const char* what) {
    if (!next(fields)) fail(fmt::format("unexpected end of file, expected {}", what));
  }

  [[noreturn]] void fail(const std::string& message) const {
    throw InputError(fmt::format("{}:{}: {}", source_, line_no_, message));
  }

  void expect_end(std::istringstream& fields) const {
    std::string extra;
    if (fields >> extra) fail(fmt::format("unexpected trailing token '{}'", extra));
  }

  std::size_t section(std::istringstream& fields, const std::string& keyword) {
    std::string word;
    long long count = -1;
    if (!(fields >> word) || word != keyword || !(fields >> count) || count < 0) {
      fail(fmt::format("expected '{} <count>'", keyword));
    }
    expect_end(fields);
    return static_cast<std::size_t>(count);
  }

 private:
  std::istream& in_;
  std::string source_;
  int line_no_ = 0;
};

}  // namespace

MeshFile parse_mesh(std::istream& in, const std::string& source) {
  LineReader reader(in, source);
  std::istringstream fields;

  reader.require(fields, "MESH2D header");
  std::string header;
  fields >> header;
  if (header != "MESH2D") reader.fail("missing MESH2D header");
  reader.expect_end(fields);

  reader.require(fields, "VERTICES section");
  const std::size_t nv = reader.section(fields, "VERTICES");
  std::vector<Point> vertices(nv);
  for (auto& p : vertices) {
    reader.require(fields, "vertex coordinates");
    if (!(fields >> p.x >> p.y)) reader.fail("expected 'x y'");
    reader.expect_end(fields);
  }

  reader.require(fields, "CELLS section");
  const std::size_t nc = reader.section(fields, "CELLS");
  std::vector<std::array<int, 3>> cells(nc);
  for (auto& t : cells) {
    reader.require(fields, "cell vertex indices");
    if (!(fields >> t[0] >> t[1] >> t[2])) reader.fail("expected 'v0 v1 v2'");
    reader.expect_end(fields);
    for (int v : t) {
      if (v < 0 || static_cast<std::size_t>(v) >= nv) {
        reader.fail(fmt::format("vertex index {} out of range [0, {})", v, nv));
      }
    }
  }

  MeshFile out;
  if (reader.next(fields)) {
    const std::size_t nf = reader.section(fields, "FRACTURES");
    out.fractures.resize(nf);
    out.hints.resize(nf);
    for (std::size_t k = 0; k < nf; ++k) {
      reader.require(fields, "fracture segment");
      auto& s = out.fractures[k];
      if (!(fields >> s.a.x >> s.a.y >> s.b.x >> s.b.y >> out.hints[k])) {
        reader.fail("expected 'x0 y0 x1 y1 network_hint'");
      }
      reader.expect_end(fields);
    }
    if (reader.next(fields)) reader.fail("unexpected content after FRACTURES section");
  }
  out.mesh = FineMesh(std::move(vertices), std::move(cells));
  return out;
}

MeshFile read_mesh(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InputError(fmt::format("cannot open mesh file '{}'", path.string()));
  return parse_mesh(in, path.string());
}

void write_mesh(const std::filesystem::path& path, const FineMesh& mesh, std::span<const Segment> fractures,
                std::span<const int> hints) {
  if (!hints.empty() && hints.size() != fractures.size()) {
    throw InputError("fracture hint count does not match fracture count");
  }
  auto out = fmt::output_file(path.string());
  out.print("MESH2D\nVERTICES {}\n", mesh.num_vertices());
  for (const auto& p : mesh.vertices()) out.print("{:.17g} {:.17g}\n", p.x, p.y);
  out.print("CELLS {}\n", mesh.num_cells());
  for (const auto& t : mesh.cells()) out.print("{} {} {}\n", t[0], t[1], t[2]);
  out.print("FRACTURES {}\n", fractures.size());
  for (std::size_t k = 0; k < fractures.size(); ++k) {
    const auto& s = fractures[k];
    out.print("{:.17g} {:.17g} {:.17g} {:.17g} {}\n", s.a.x, s.a.y, s.b.x, s.b.y, hints.empty() ? -1 : hints[k]);
  }
}

std::vector<double> read_cell_data(const std::filesystem::path& path, std::size_t expected) {
  std::ifstream in(path);
  if (!in) throw InputError(fmt::format("cannot open cell data file '{}'", path.string()));
  LineReader reader(in, path.string());
  std::istringstream fields;
  reader.require(fields, "CELLDATA section");
  const std::size_t n = reader.section(fields, "CELLDATA");
  if (n != expected) reader.fail(fmt::format("CELLDATA has {} values but the mesh has {} cells", n, expected));
  std::vector<double> values(n);
  for (auto& v : values) {
    reader.require(fields, "cell value");
    if (!(fields >> v)) reader.fail("expected a number");
    reader.expect_end(fields);
  }
  return values;
}

void write_cell_data(const std::filesystem::path& path, std::span<const double> values) {
  auto out = fmt::output_file(path.string());
  out.print("CELLDATA {}\n", values.size());
  for (double v : values) out.print("{:.17g}\n", v);
}

}  // namespace nlmc::geometry
