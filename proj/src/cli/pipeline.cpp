#include "nlmc/cli.hpp"
#include "nlmc/error.hpp"

#include <chrono>
#include <fstream>
#include <sstream>

#include <fmt/format.h>
#include <fmt/os.h>

namespace nlmc::cli {

namespace fs = std::filesystem;
using linalg::Index;
using linalg::Vector;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

std::vector<geometry::Point> source_anchors(const ExperimentConfig& config) {
  std::vector<geometry::Point> out;
  if (!config.geometry.anchors) return out;
  for (const auto& s : config.sources.regions) {
    if (s.target == fvm::Continuum::fracture) {
      out.push_back({0.5 * (s.region.x0 + s.region.x1), 0.5 * (s.region.y0 + s.region.y1)});
    }
  }
  return out;
}

fvm::SourceSpec balanced_sources(const ExperimentConfig& config, const geometry::FineMesh& mesh,
                                 const geometry::FractureMesh& fracture_mesh) {
  fvm::SourceSpec sources = config.sources.regions;
  if (!config.sources.balance) return sources;
  double injected = 0.0;
  for (std::size_t r = 0; r + 1 < sources.size(); ++r) {
    injected += sources[r].rate * fvm::region_measure(sources[r], mesh, fracture_mesh);
  }
  const double last = fvm::region_measure(sources.back(), mesh, fracture_mesh);
  if (!(last > 0.0)) throw InputError("cannot balance sources: the last source region selects nothing");
  sources.back().rate = -injected / last;
  return sources;
}

void write_text(const fs::path& path, const std::string& text) {
  auto out = fmt::output_file(path.string());
  out.print("{}", text);
}

void require(const fs::path& path, const std::string& stage) {
  if (!fs::exists(path)) {
    throw InputError(fmt::format("missing {} (run the '{}' stage first)", path.string(), stage));
  }
}

fs::path coarse_dir(const fs::path& out, int layers) { return out / fmt::format("coarse_s{}", layers); }

geometry::MeshFile load_geometry(const fs::path& out) {
  require(out / "geometry.mesh", "generate");
  return geometry::read_mesh(out / "geometry.mesh");
}

std::vector<double> load_permeability(const fs::path& out, std::size_t cells) {
  require(out / "permeability.txt", "generate");
  return geometry::read_cell_data(out / "permeability.txt", cells);
}

FineSetup load_fine(const ExperimentConfig& config, const fs::path& out) {
  const auto geometry = load_geometry(out);
  const auto k_m = load_permeability(out, geometry.mesh.num_cells());
  return build_fine(config, geometry, k_m);
}

void write_timing(const fs::path& path, std::initializer_list<std::pair<const char*, double>> entries) {
  std::string text;
  for (const auto& [key, value] : entries) text += fmt::format("{} {:.6f}\n", key, value);
  write_text(path, text);
}

}  // namespace

geometry::MeshFile make_geometry(const ExperimentConfig& config) {
  const auto& g = config.geometry;
  if (g.source == GeometrySource::file) return geometry::read_mesh(config.resolve(g.mesh_file));
  auto mesh = geometry::generate_structured_mesh(g.nx, g.ny, g.domain);
  const auto anchors = source_anchors(config);
  auto fractures = config.model == geometry::FractureMode::dfm ? generate_lattice_fractures(g, anchors)
                                                               : generate_embedded_fractures(g, anchors);
  return {std::move(mesh), std::move(fractures.segments), std::move(fractures.groups)};
}

std::vector<double> make_matrix_permeability(const ExperimentConfig& config, const geometry::FineMesh& mesh) {
  const auto& g = config.geometry;
  switch (g.perm_field) {
    case PermField::uniform:
      return std::vector<double>(mesh.num_cells(), config.params.k_m);
    case PermField::lognormal:
      return generate_lognormal_field(mesh, config.params.k_m, g.perm_log10_std, g.perm_correlation, g.perm_seed);
    case PermField::file:
      break;
  }
  return geometry::read_cell_data(config.resolve(g.perm_file), mesh.num_cells());
}

fvm::MaterialParams make_params(const ExperimentConfig& config, const geometry::FineMesh& mesh,
                                const geometry::FractureGeometry& fractures, std::span<const double> k_m_field) {
  const auto& p = config.params;
  if (k_m_field.size() != mesh.num_cells()) {
    throw InputError(fmt::format("{} matrix permeabilities for {} cells", k_m_field.size(), mesh.num_cells()));
  }
  fvm::MaterialParams out;
  out.matrix_storage = p.c_m;
  out.fracture_storage = p.c_f;
  out.matrix_mobility.reserve(k_m_field.size());
  for (double k : k_m_field) out.matrix_mobility.push_back(k / p.mu);
  const std::size_t n = fractures.segments.size();
  out.fracture_mobility.resize(n);
  out.transfer.resize(n);
  for (std::size_t s = 0; s < n; ++s) {
    double k_f = p.k_f;
    for (const auto& [group, value] : p.k_f_overrides) {
      if (fractures.group[s] == group) k_f = value;
    }
    out.fracture_mobility[s] = p.thickness * k_f / p.mu;
    out.transfer[s] = (p.sigma ? *p.sigma : fvm::sigma_from_perms(p.k_m, k_f)) * p.sigma_multiplier;
  }
  return out;
}

FineSetup build_fine(const ExperimentConfig& config, const geometry::MeshFile& geometry,
                     std::span<const double> k_m_field) {
  auto fractures = geometry::label_networks(geometry.fractures, config.model, geometry.hints);
  auto fracture_mesh = geometry::discretize_fractures(geometry.mesh, fractures);
  auto grid = geometry::build_coarse_grid(geometry.mesh, fractures, fracture_mesh, config.coarse.nx,
                                          config.coarse.ny);
  auto params = make_params(config, geometry.mesh, fractures, k_m_field);
  auto system = fvm::assemble(geometry.mesh, fractures, fracture_mesh, params);
  auto sourced = fvm::apply_sources(std::move(system), balanced_sources(config, geometry.mesh, fracture_mesh),
                                    geometry.mesh, fracture_mesh);
  return {geometry.mesh,          std::move(fractures),          std::move(fracture_mesh),
          std::move(grid),        std::move(params),             std::move(sourced.system),
          std::move(sourced.empty_regions)};
}

FineSetup build_fine(const ExperimentConfig& config) {
  const auto geometry = make_geometry(config);
  const auto k_m = make_matrix_permeability(config, geometry.mesh);
  return build_fine(config, geometry, k_m);
}

Timed solve_timed(const sim::LinearModel& model, const sim::TimeSpec& time) {
  Timed out;
  auto start = Clock::now();
  const sim::ImplicitEuler stepper(model, time.tau());
  out.setup_seconds = seconds_since(start);
  start = Clock::now();
  out.trajectory = sim::run(stepper, time, Vector::Constant(model.size(), time.initial));
  out.step_seconds = seconds_since(start);
  return out;
}

CoarseBuild upscale(const ExperimentConfig& config, const FineSetup& fine, int layers) {
  const auto start = Clock::now();
  CoarseBuild out;
  out.layers = layers;
  upscaling::BasisOptions options;
  options.layers = layers;
  options.partition_of_unity = config.coarse.partition_of_unity;
  options.threads = config.coarse.threads;
  out.basis = upscaling::build_projection(fine.problem(), options);
  out.model = upscaling::build_coarse_model(out.basis.projection, fine.system, fine.grid, fine.params,
                                            config.coarse.mass, config.coarse.rhs);
  out.seconds = seconds_since(start);
  return out;
}

ReportTable make_report(const ExperimentConfig& config, const FineSetup& fine, const sim::Snapshots& fine_states,
                        std::span<const std::pair<int, sim::Snapshots>> coarse_states) {
  ReportTable table;
  table.dof_fine = fine.dof_fine();
  table.fine_matrix = fine.system.num_matrix();
  table.fine_fracture = fine.system.num_fracture();
  for (const auto& [layers, states] : coarse_states) {
    table.dof_coarse.emplace_back(layers, states.states.empty() ? 0 : states.states.front().size());
    for (int step : config.time.snapshots) {
      const auto errors = sim::compare_states(fine.mesh, fine.fracture_mesh, fine.grid, fine_states.at_step(step),
                                              states.at_step(step));
      table.rows.push_back({layers, step, step * config.time.spec().tau(), 100.0 * errors.matrix,
                            100.0 * errors.fracture});
    }
  }
  return table;
}

std::string ReportTable::to_text() const {
  std::string s = fmt::format("DOF_f = {} (matrix {}, fracture {})\n", dof_fine, fine_matrix, fine_fracture);
  for (const auto& [layers, dof] : dof_coarse) s += fmt::format("s = {}: DOF_c = {}\n", layers, dof);
  s += fmt::format("\n{:>3} {:>6} {:>12} {:>16} {:>18}\n", "s", "step", "time", "matrix err (%)",
                   "fracture err (%)");
  for (const auto& r : rows) {
    s += fmt::format("{:>3} {:>6} {:>12.6g} {:>16.6f} {:>18.6f}\n", r.layers, r.step, r.time,
                     r.matrix_error_percent, r.fracture_error_percent);
  }
  return s;
}

std::string ReportTable::to_csv() const {
  std::string s = "layers,step,time,matrix_error_percent,fracture_error_percent,dof_fine,dof_coarse\n";
  for (const auto& r : rows) {
    Index dof_c = 0;
    for (const auto& [layers, dof] : dof_coarse) {
      if (layers == r.layers) dof_c = dof;
    }
    s += fmt::format("{},{},{:.17g},{:.17g},{:.17g},{},{}\n", r.layers, r.step, r.time, r.matrix_error_percent,
                     r.fracture_error_percent, dof_fine, dof_c);
  }
  return s;
}

// ---------------------------------------------------------------------------
// Stages
// ---------------------------------------------------------------------------

void cmd_generate(const ExperimentConfig& config, const fs::path& out) {
  config.validate();
  fs::create_directories(out);
  const auto geometry = make_geometry(config);
  const auto k_m = make_matrix_permeability(config, geometry.mesh);
  // Conformity and labeling are checked before anything is written, so a
  // failed request leaves no partial artifacts.
  const auto fractures = geometry::label_networks(geometry.fractures, config.model, geometry.hints);
  if (config.model == geometry::FractureMode::dfm) geometry::match_dfm_facets(geometry.mesh, fractures);
  geometry::write_mesh(out / "geometry.mesh", geometry.mesh, geometry.fractures, geometry.hints);
  geometry::write_cell_data(out / "permeability.txt", k_m);
  write_text(out / "config.cfg", serialize_config(config));
  write_text(out / "geometry_summary.txt",
             fmt::format("cells {}\nvertices {}\nsegments {}\nnetworks {}\n", geometry.mesh.num_cells(),
                         geometry.mesh.num_vertices(), fractures.segments.size(), fractures.num_networks));
}

void cmd_solve_fine(const ExperimentConfig& config, const fs::path& out) {
  const auto start = Clock::now();
  const FineSetup fine = load_fine(config, out);
  const double assembly = seconds_since(start);
  const auto run = solve_timed(sim::LinearModel::fine(fine.system), config.time.spec());

  const fs::path dir = out / "fine";
  fs::create_directories(dir);
  sim::write_trajectory_csv(dir / "snapshots.csv", run.trajectory, config.time.snapshots);
  if (config.output.csv) sim::write_trajectory_csv(dir / "trajectory.csv", run.trajectory);
  if (config.output.vtk) {
    const Index nm = fine.system.num_matrix();
    for (int n : config.time.snapshots) {
      const Vector& p = run.trajectory.at(static_cast<std::size_t>(n));
      sim::write_vtk(dir / fmt::format("pressure_{:03d}.vtk", n), fine.mesh, fine.fracture_mesh, p.head(nm),
                     p.tail(fine.system.num_fracture()), fmt::format("fine pressure step {}", n));
    }
  }
  std::string empty;
  for (int r : fine.empty_source_regions) empty += fmt::format(" {}", r);
  write_text(dir / "summary.txt",
             fmt::format("DOF_f {}\nmatrix {}\nfracture {}\nnetworks {}\nfragments {}\nempty_source_regions{}\n",
                         fine.dof_fine(), fine.system.num_matrix(), fine.system.num_fracture(),
                         fine.fractures.num_networks, fine.grid.fragments().size(), empty.empty() ? " none" : empty));
  write_timing(out / "timing_fine.txt",
               {{"assembly_seconds", assembly}, {"factor_seconds", run.setup_seconds}, {"step_seconds", run.step_seconds}});
}

void cmd_upscale(const ExperimentConfig& config, const fs::path& out) {
  const FineSetup fine = load_fine(config, out);
  for (int layers : config.coarse.layers) {
    CoarseBuild build;
    try {
      build = upscale(config, fine, layers);
    } catch (const SolverError& e) {
      throw SolverError(fmt::format("upscaling with s = {}: {}", layers, e.what()));
    }
    const fs::path dir = coarse_dir(out, layers);
    fs::create_directories(dir);
    linalg::write_coordinate(dir / "projection.txt", build.basis.projection.r);
    linalg::write_coordinate(dir / "stiffness.txt", build.model.stiffness);
    linalg::write_coordinate(dir / "mass.txt", build.model.mass);
    linalg::write_vector(dir / "rhs.txt", build.model.rhs);
    std::string dofs = "# row cell continuum network fragment\n";
    for (std::size_t r = 0; r < build.model.dofs.size(); ++r) {
      const auto& d = build.model.dofs[r];
      dofs += fmt::format("{} {} {} {} {}\n", r, d.cell, d.kind == upscaling::BasisKind::matrix ? "matrix" : "fracture",
                          d.network, d.fragment);
    }
    write_text(dir / "dofs.txt", dofs);
    write_text(dir / "summary.txt",
               fmt::format("layers {}\nDOF_c {}\ncoarse_cells {}\nfragments {}\nDOF_f {}\n", layers,
                           build.model.size(), fine.grid.num_cells(), fine.grid.fragments().size(), fine.dof_fine()));
    if (config.output.debug_dumps) {
      fs::create_directories(dir / "basis");
      for (const auto& basis : build.basis.bases) upscaling::write_basis(dir / "basis", basis);
    }
    write_timing(out / fmt::format("timing_upscale_s{}.txt", layers), {{"basis_seconds", build.seconds}});
  }
}

void cmd_solve_coarse(const ExperimentConfig& config, const fs::path& out) {
  std::optional<FineSetup> fine;
  for (int layers : config.coarse.layers) {
    const fs::path dir = coarse_dir(out, layers);
    for (const char* name : {"stiffness.txt", "mass.txt", "rhs.txt", "projection.txt"}) require(dir / name, "upscale");
    sim::LinearModel model{linalg::read_coordinate(dir / "mass.txt", true),
                           linalg::read_coordinate(dir / "stiffness.txt", true), linalg::read_vector(dir / "rhs.txt")};
    const auto run = solve_timed(model, config.time.spec());
    sim::write_trajectory_csv(dir / "snapshots.csv", run.trajectory, config.time.snapshots);
    if (config.output.csv) sim::write_trajectory_csv(dir / "trajectory.csv", run.trajectory);
    if (config.output.vtk) {
      if (!fine) fine.emplace(load_fine(config, out));
      const auto r = linalg::read_coordinate(dir / "projection.txt");
      const Index nm = fine->system.num_matrix();
      for (int n : config.time.snapshots) {
        const Vector p = r.eigen().transpose() * run.trajectory.at(static_cast<std::size_t>(n));
        sim::write_vtk(dir / fmt::format("pressure_{:03d}.vtk", n), fine->mesh, fine->fracture_mesh, p.head(nm),
                       p.tail(fine->system.num_fracture()), fmt::format("downscaled coarse pressure step {}", n));
      }
    }
    write_timing(out / fmt::format("timing_coarse_s{}.txt", layers),
                 {{"factor_seconds", run.setup_seconds}, {"step_seconds", run.step_seconds}});
  }
}

void cmd_compare(const ExperimentConfig& config, const fs::path& out) {
  require(out / "fine" / "snapshots.csv", "solve-fine");
  std::vector<std::pair<int, sim::Snapshots>> coarse;
  for (int layers : config.coarse.layers) {
    const fs::path file = coarse_dir(out, layers) / "snapshots.csv";
    require(file, "solve-coarse");
    coarse.emplace_back(layers, sim::read_trajectory_csv(file));
  }
  const FineSetup fine = load_fine(config, out);
  const auto fine_states = sim::read_trajectory_csv(out / "fine" / "snapshots.csv");
  const ReportTable table = make_report(config, fine, fine_states, coarse);
  write_text(out / "report.txt", table.to_text());
  write_text(out / "report.csv", table.to_csv());

  std::string timings;
  auto append = [&](const fs::path& file) {
    if (!fs::exists(file)) return;
    std::ifstream in(file);
    std::ostringstream text;
    text << in.rdbuf();
    timings += fmt::format("[{}]\n{}", file.filename().string(), text.str());
  };
  append(out / "timing_fine.txt");
  for (int layers : config.coarse.layers) {
    append(out / fmt::format("timing_upscale_s{}.txt", layers));
    append(out / fmt::format("timing_coarse_s{}.txt", layers));
  }
  if (!timings.empty()) write_text(out / "timing_report.txt", timings);
}

void cmd_report(const ExperimentConfig& config, const fs::path& out) {
  cmd_generate(config, out);
  cmd_solve_fine(config, out);
  cmd_upscale(config, out);
  cmd_solve_coarse(config, out);
  cmd_compare(config, out);
}

}  // namespace nlmc::cli
