#include <doctest.h>

#include <cmath>
#include <fstream>
#include <random>
#include <sstream>

#include "nlmc/error.hpp"
#include "nlmc/sim.hpp"
#include "support.hpp"

using namespace nlmc;
using namespace nlmc::sim;
using linalg::Matrix;
using linalg::Vector;

namespace {

const geometry::Rect kUnit{0.0, 0.0, 1.0, 1.0};

SparseMatrix dense_to_sparse(const Matrix& m, bool symmetric = true) { return SparseMatrix(m.sparseView(), symmetric); }

/// Two storage units of capacity m exchanging with coefficient a.
LinearModel two_cells(double m, double a) {
  Matrix stiff(2, 2);
  stiff << a, -a, -a, a;
  return {SparseMatrix::diagonal(Vector::Constant(2, m)), dense_to_sparse(stiff), Vector::Zero(2)};
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

TEST_CASE("single implicit steps") {
  const Vector m = (Vector(3) << 1.0, 2.0, 4.0).finished();
  const Vector f = (Vector(3) << 1.0, -1.0, 2.0).finished();
  const Vector p0 = (Vector(3) << 0.5, 0.25, 1.0).finished();
  const double tau = 0.1;
  const SparseMatrix zero(linalg::EigenSparse(3, 3), true);
  const Vector p1 = step_implicit(SparseMatrix::diagonal(m), zero, f, p0, tau);
  for (int k = 0; k < 3; ++k) CHECK(p1[k] == doctest::Approx(p0[k] + tau * f[k] / m[k]).epsilon(1e-14));

  const auto model = two_cells(2.0, 3.0);
  const Vector flat = Vector::Constant(2, 7.0);
  CHECK((step_implicit(model.mass, model.stiffness, model.rhs, flat, tau) - flat).cwiseAbs().maxCoeff() <= 1e-13);

  const ImplicitEuler stepper(model, tau);
  CHECK(stepper.tau() == tau);
  const Vector start = (Vector(2) << 1.0, 0.0).finished();
  CHECK((stepper.step(start) - step_implicit(model.mass, model.stiffness, model.rhs, start, tau))
            .cwiseAbs()
            .maxCoeff() <= 1e-14);
  CHECK_THROWS_AS(stepper.step(Vector::Zero(3)), InputError);
  CHECK_THROWS_AS(ImplicitEuler(model, 0.0), InputError);
  CHECK_THROWS_AS(step_implicit(model.mass, model.stiffness, Vector::Zero(3), start, tau), InputError);
}

TEST_CASE("two-cell exchange matches the analytic solution") {
  const double m = 2.0;
  const double a = 5.0;
  const auto model = two_cells(m, a);
  const double t_max = 0.4;
  const Vector start = (Vector(2) << 1.0, 0.0).finished();

  // Discrete: the difference contracts by 1/(1 + 2aτ/m) per step.
  for (int n : {1, 4, 16}) {
    TimeSpec spec{t_max, n, 0.0};
    const auto traj = run(model, spec, start);
    CHECK(traj.size() == static_cast<std::size_t>(n + 1));
    CHECK(traj.times.back() == doctest::Approx(t_max));
    const double diff = traj.states.back()[0] - traj.states.back()[1];
    CHECK(diff == doctest::Approx(std::pow(1.0 + 2.0 * a * spec.tau() / m, -n)).epsilon(1e-12));
    CHECK(traj.states.back().sum() == doctest::Approx(1.0).epsilon(1e-13));
  }

  // First-order convergence towards exp(−2at/m).
  const double exact = std::exp(-2.0 * a * t_max / m);
  std::vector<double> errors;
  for (int n : {50, 100, 200, 400}) {
    const auto traj = run(model, TimeSpec{t_max, n, 0.0}, start);
    errors.push_back(std::abs(traj.states.back()[0] - traj.states.back()[1] - exact));
  }
  for (std::size_t k = 1; k < errors.size(); ++k) {
    const double ratio = errors[k - 1] / errors[k];
    CHECK(ratio > 1.8);
    CHECK(ratio < 2.2);
  }

  // One step over the whole interval is the single implicit step.
  const auto one = run(model, TimeSpec{t_max, 1, 0.0}, start);
  CHECK((one.states[1] - step_implicit(model.mass, model.stiffness, model.rhs, start, t_max)).cwiseAbs().maxCoeff() <=
        1e-14);

  const auto uniform = run(model, TimeSpec{t_max, 3, 2.5});
  CHECK((uniform.states.back() - Vector::Constant(2, 2.5)).cwiseAbs().maxCoeff() <= 1e-13);

  CHECK_THROWS_AS(run(model, TimeSpec{t_max, 0, 0.0}, start), InputError);
  CHECK_THROWS_AS(run(model, TimeSpec{-1.0, 3, 0.0}, start), InputError);
  CHECK_THROWS_AS(run(model, TimeSpec{t_max, 3, 0.0}, Vector::Zero(5)), InputError);
}

TEST_CASE("averaging") {
  const auto mesh = geometry::generate_structured_mesh(4, 4, kUnit);
  const auto fractures = geometry::label_networks({{{0.1, 0.3}, {0.9, 0.3}}}, geometry::FractureMode::efm);
  const auto fmesh = geometry::discretize_fractures(mesh, fractures);
  const auto grid = geometry::build_coarse_grid(mesh, fractures, fmesh, 2, 2);

  Vector linear(static_cast<linalg::Index>(mesh.num_cells()));
  for (std::size_t c = 0; c < mesh.num_cells(); ++c) linear[static_cast<linalg::Index>(c)] = mesh.cell_centroid(c).x;
  const Vector avg = cell_average(mesh, grid, linear);
  CHECK(avg[0] == doctest::Approx(0.25));
  CHECK(avg[1] == doctest::Approx(0.75));
  CHECK(avg[3] == doctest::Approx(0.75));

  std::mt19937 rng(2);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  const auto fine = geometry::generate_structured_mesh(10, 10, kUnit);
  const auto fine_grid = geometry::build_coarse_grid(fine, geometry::FractureGeometry{}, geometry::FractureMesh{}, 5, 2);
  Vector field(static_cast<linalg::Index>(fine.num_cells()));
  for (auto& v : field) v = u(rng);
  const Vector got = cell_average(fine, fine_grid, field);
  for (int i = 0; i < fine_grid.num_cells(); ++i) {
    const auto r = fine_grid.rect(i);
    double num = 0.0;
    double den = 0.0;
    for (std::size_t c = 0; c < fine.num_cells(); ++c) {
      if (r.contains(fine.cell_centroid(static_cast<int>(c)))) {
        num += fine.cell_area(static_cast<int>(c)) * field[static_cast<linalg::Index>(c)];
        den += fine.cell_area(static_cast<int>(c));
      }
    }
    CHECK(got[i] == doctest::Approx(num / den).epsilon(1e-13));
  }

  // Fracture: x along the piece midpoints, split at x = 0.5.
  Vector along(static_cast<linalg::Index>(fmesh.size()));
  for (std::size_t k = 0; k < fmesh.size(); ++k) along[static_cast<linalg::Index>(k)] = fmesh.pieces[k].geometry.midpoint().x;
  const Vector frag = fragment_average(fmesh, grid, along);
  REQUIRE(frag.size() == 2);
  CHECK(frag[0] == doctest::Approx(0.3));
  CHECK(frag[1] == doctest::Approx(0.7));

  CHECK_THROWS_AS(cell_average(mesh, grid, Vector::Zero(3)), InputError);
  CHECK_THROWS_AS(fragment_average(fmesh, grid, Vector::Zero(99)), InputError);
}

TEST_CASE("relative error") {
  const Vector ref = (Vector(4) << 1.0, -2.0, 3.0, 0.5).finished();
  CHECK(relative_error(ref, ref) == 0.0);
  CHECK(relative_error(ref, 2.0 * ref) == doctest::Approx(1.0));
  CHECK(relative_error(ref, Vector::Zero(4)) == doctest::Approx(1.0));
  const Vector approx = ref + (Vector(4) << 0.1, 0.0, -0.2, 0.0).finished();
  const double e = relative_error(ref, approx);
  CHECK(e == doctest::Approx(std::sqrt(0.05 / 14.25)));
  CHECK(relative_error(1e6 * ref, 1e6 * approx) == doctest::Approx(e).epsilon(1e-14));
  CHECK_THROWS_AS(relative_error(Vector::Zero(4), ref), InputError);
  CHECK_THROWS_AS(relative_error(ref, Vector::Zero(3)), InputError);
}

TEST_CASE("state comparison uses cell and fragment averages") {
  const auto mesh = geometry::generate_structured_mesh(8, 8, kUnit);
  const auto fractures = geometry::label_networks({{{0.1, 0.3}, {0.9, 0.35}}}, geometry::FractureMode::efm);
  const auto fmesh = geometry::discretize_fractures(mesh, fractures);
  const auto grid = geometry::build_coarse_grid(mesh, fractures, fmesh, 4, 4);
  const auto nm = static_cast<linalg::Index>(mesh.num_cells());
  const auto nf = static_cast<linalg::Index>(fmesh.size());
  Vector fine(nm + nf);
  for (linalg::Index k = 0; k < fine.size(); ++k) fine[k] = 1.0 + 0.01 * static_cast<double>(k % 7);
  Vector coarse(static_cast<linalg::Index>(grid.num_coarse_dofs()));
  coarse << cell_average(mesh, grid, fine.head(nm)), fragment_average(fmesh, grid, fine.tail(nf));
  const auto exact = compare_states(mesh, fmesh, grid, fine, coarse);
  CHECK(exact.matrix <= 1e-15);
  CHECK(exact.fracture <= 1e-15);
  coarse[grid.num_cells()] *= 1.1;
  const auto off = compare_states(mesh, fmesh, grid, fine, coarse);
  CHECK(off.matrix <= 1e-15);
  CHECK(off.fracture > 0.0);
  CHECK_THROWS_AS(compare_states(mesh, fmesh, grid, fine, Vector::Zero(3)), InputError);
}

TEST_CASE("balanced sources conserve total storage") {
  const auto mesh = geometry::generate_structured_mesh(20, 20, kUnit);
  const auto fractures =
      geometry::label_networks(test_support::random_segments(3, 6, 0.2, 0.5), geometry::FractureMode::efm);
  const auto fmesh = geometry::discretize_fractures(mesh, fractures);
  const auto params = fvm::MaterialParams::uniform(1e-5, 1e-6, 1e-6, 1.0, 2e-6, mesh.num_cells(),
                                                   fractures.segments.size());
  auto system = fvm::assemble(mesh, fractures, fmesh, params);
  const fvm::SourceRegion a{{0.0, 0.0, 0.25, 0.25}, fvm::Continuum::matrix, 1e-3};
  const fvm::SourceRegion b{{0.75, 0.75, 1.0, 1.0}, fvm::Continuum::matrix, -1e-3};
  system = fvm::apply_sources(system, {a, b}, mesh, fmesh).system;
  const auto model = LinearModel::fine(system);
  const auto traj = run(model, TimeSpec{0.1, 20, 1.0});
  const double s0 = total_storage(model.mass, traj.states.front());
  for (const auto& p : traj.states) CHECK(total_storage(model.mass, p) == doctest::Approx(s0).epsilon(1e-10));
  CHECK((traj.states.back() - traj.states.front()).cwiseAbs().maxCoeff() > 1e-6);

  // Rerunning is bit-identical.
  const auto again = run(model, TimeSpec{0.1, 20, 1.0});
  for (std::size_t n = 0; n < traj.size(); ++n) CHECK((traj.states[n] - again.states[n]).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("trajectory files") {
  const auto dir = test_support::scratch_dir("sim_io");
  const auto model = two_cells(1.0, 0.3);
  const auto traj = run(model, TimeSpec{1.0, 4, 0.0}, (Vector(2) << 1.0 / 3.0, 2.0 / 7.0).finished());

  write_trajectory_csv(dir / "all.csv", traj);
  const auto all = read_trajectory_csv(dir / "all.csv");
  CHECK(all.steps == std::vector<int>{0, 1, 2, 3, 4});
  for (std::size_t n = 0; n < traj.size(); ++n) {
    CHECK(all.times[n] == traj.times[n]);
    CHECK((all.states[n] - traj.states[n]).cwiseAbs().maxCoeff() == 0.0);
  }
  CHECK(slurp(dir / "all.csv").rfind("step,time,dof_id,value\n", 0) == 0);

  const std::vector<int> picked{2, 4};
  write_trajectory_csv(dir / "some.csv", traj, picked);
  const auto some = read_trajectory_csv(dir / "some.csv");
  CHECK(some.steps == picked);
  CHECK((some.at_step(4) - traj.states[4]).cwiseAbs().maxCoeff() == 0.0);
  CHECK_THROWS_AS(some.at_step(3), InputError);
  CHECK_THROWS_AS(write_trajectory_csv(dir / "bad.csv", traj, std::vector<int>{9}), InputError);
  CHECK_THROWS_AS(read_trajectory_csv(dir / "absent.csv"), InputError);

  write_trajectory_csv(dir / "again.csv", traj);
  CHECK(slurp(dir / "again.csv") == slurp(dir / "all.csv"));
}

TEST_CASE("VTK output") {
  const auto dir = test_support::scratch_dir("sim_vtk");
  const auto mesh = geometry::generate_structured_mesh(2, 2, kUnit);
  const auto fractures = geometry::label_networks({{{0.1, 0.2}, {0.9, 0.2}}}, geometry::FractureMode::efm);
  const auto fmesh = geometry::discretize_fractures(mesh, fractures);
  const Vector pm = Vector::LinSpaced(static_cast<linalg::Index>(mesh.num_cells()), 0.0, 1.0);
  const Vector pf = Vector::Constant(static_cast<linalg::Index>(fmesh.size()), 2.0);
  write_vtk(dir / "p.vtk", mesh, fmesh, pm, pf);
  const auto text = slurp(dir / "p.vtk");
  CHECK(text.rfind("# vtk DataFile Version", 0) == 0);
  const auto cells = mesh.num_cells() + fmesh.size();
  CHECK(text.find("POINTS " + std::to_string(mesh.num_vertices() + 2 * fmesh.size())) != std::string::npos);
  CHECK(text.find("CELLS " + std::to_string(cells) + " ") != std::string::npos);
  CHECK(text.find("CELL_DATA " + std::to_string(cells)) != std::string::npos);
  CHECK(text.find("matrix_pressure") != std::string::npos);
  CHECK(text.find("fracture_pressure") != std::string::npos);
  CHECK_THROWS_AS(write_vtk(dir / "q.vtk", mesh, fmesh, pf, pf), InputError);
}
