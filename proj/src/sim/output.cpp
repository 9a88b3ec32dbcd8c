#include "nlmc/error.hpp"
#include "nlmc/sim.hpp"

#include <fmt/format.h>
#include <fmt/os.h>

#include <fstream>
#include <sstream>

namespace nlmc::sim {

void write_trajectory_csv(const std::filesystem::path& path, const Trajectory& trajectory,
                          std::span<const int> steps) {
  std::vector<int> selected(steps.begin(), steps.end());
  if (selected.empty()) {
    for (std::size_t n = 0; n < trajectory.size(); ++n) selected.push_back(static_cast<int>(n));
  }
  for (int n : selected) {
    if (n < 0 || static_cast<std::size_t>(n) >= trajectory.size()) {
      throw InputError(fmt::format("snapshot step {} outside trajectory of {} states", n, trajectory.size()));
    }
  }
  auto out = fmt::output_file(path.string());
  out.print("step,time,dof_id,value\n");
  for (int n : selected) {
    const Vector& state = trajectory.states[n];
    const double t = trajectory.times[n];
    for (Index k = 0; k < state.size(); ++k) out.print("{},{:.17g},{},{:.17g}\n", n, t, k, state[k]);
  }
}

const Vector& Snapshots::at_step(int step) const {
  for (std::size_t k = 0; k < steps.size(); ++k) {
    if (steps[k] == step) return states[k];
  }
  throw InputError(fmt::format("step {} is not among the stored snapshots", step));
}

Snapshots read_trajectory_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InputError(fmt::format("cannot open trajectory file {}", path.string()));
  std::string line;
  if (!std::getline(in, line) || line != "step,time,dof_id,value") {
    throw InputError(fmt::format("{}: missing trajectory header", path.string()));
  }
  Snapshots out;
  std::vector<std::vector<double>> values;
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::istringstream row(line);
    int step = 0;
    double t = 0.0;
    long long dof = 0;
    double v = 0.0;
    char c1 = 0, c2 = 0, c3 = 0;
    if (!(row >> step >> c1 >> t >> c2 >> dof >> c3 >> v) || c1 != ',' || c2 != ',' || c3 != ',') {
      throw InputError(fmt::format("{}:{}: malformed trajectory row", path.string(), line_no));
    }
    if (out.steps.empty() || out.steps.back() != step) {
      out.steps.push_back(step);
      out.times.push_back(t);
      values.emplace_back();
    }
    if (dof != static_cast<long long>(values.back().size())) {
      throw InputError(fmt::format("{}:{}: dof ids must be consecutive from 0", path.string(), line_no));
    }
    values.back().push_back(v);
  }
  for (const auto& v : values) out.states.push_back(Eigen::Map<const Vector>(v.data(), static_cast<Index>(v.size())));
  return out;
}

void write_vtk(const std::filesystem::path& path, const geometry::FineMesh& mesh,
               const geometry::FractureMesh& fracture_mesh, const Vector& matrix_values,
               const Vector& fracture_values, const std::string& title) {
  const auto nv = mesh.num_vertices();
  const auto nc = mesh.num_cells();
  const auto np = fracture_mesh.size();
  if (matrix_values.size() != static_cast<Index>(nc) || fracture_values.size() != static_cast<Index>(np)) {
    throw InputError("VTK output sized inconsistently with the mesh");
  }

  auto out = fmt::output_file(path.string());
  out.print("# vtk DataFile Version 3.0\n{}\nASCII\nDATASET UNSTRUCTURED_GRID\n", title);
  out.print("POINTS {} double\n", nv + 2 * np);
  for (const auto& v : mesh.vertices()) out.print("{:.17g} {:.17g} 0\n", v.x, v.y);
  for (const auto& piece : fracture_mesh.pieces) {
    out.print("{:.17g} {:.17g} 0\n{:.17g} {:.17g} 0\n", piece.geometry.a.x, piece.geometry.a.y, piece.geometry.b.x,
              piece.geometry.b.y);
  }

  out.print("CELLS {} {}\n", nc + np, 4 * nc + 3 * np);
  for (const auto& cell : mesh.cells()) out.print("3 {} {} {}\n", cell[0], cell[1], cell[2]);
  for (std::size_t k = 0; k < np; ++k) out.print("2 {} {}\n", nv + 2 * k, nv + 2 * k + 1);
  out.print("CELL_TYPES {}\n", nc + np);
  for (std::size_t c = 0; c < nc; ++c) out.print("5\n");
  for (std::size_t k = 0; k < np; ++k) out.print("3\n");

  out.print("CELL_DATA {}\n", nc + np);
  out.print("SCALARS matrix_pressure double 1\nLOOKUP_TABLE default\n");
  for (std::size_t c = 0; c < nc; ++c) out.print("{:.17g}\n", matrix_values[static_cast<Index>(c)]);
  for (std::size_t k = 0; k < np; ++k) out.print("0\n");
  out.print("SCALARS fracture_pressure double 1\nLOOKUP_TABLE default\n");
  for (std::size_t c = 0; c < nc; ++c) out.print("0\n");
  for (std::size_t k = 0; k < np; ++k) out.print("{:.17g}\n", fracture_values[static_cast<Index>(k)]);
  out.print("SCALARS continuum int 1\nLOOKUP_TABLE default\n");
  for (std::size_t c = 0; c < nc; ++c) out.print("0\n");
  for (std::size_t k = 0; k < np; ++k) out.print("1\n");
}

}  // namespace nlmc::sim
