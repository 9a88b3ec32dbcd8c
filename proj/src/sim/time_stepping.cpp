#include "nlmc/error.hpp"
#include "nlmc/sim.hpp"

#include <cmath>

#include <fmt/format.h>

namespace nlmc::sim {

void TimeSpec::validate() const {
  if (n_steps < 1) throw InputError(fmt::format("number of time steps must be at least 1, got {}", n_steps));
  if (!(t_max > 0.0) || !std::isfinite(t_max)) throw InputError(fmt::format("end time must be positive, got {}", t_max));
  if (!std::isfinite(initial)) throw InputError("initial pressure must be finite");
}

LinearModel LinearModel::fine(const fvm::BlockSystem& system) {
  return {SparseMatrix::diagonal(system.storage()), system.stiffness, system.rhs()};
}

LinearModel LinearModel::coarse(const upscaling::CoarseModel& model) {
  return {model.mass, model.stiffness, model.rhs};
}

namespace {

void check_sizes(const SparseMatrix& mass, const SparseMatrix& stiffness, const Vector& rhs) {
  if (mass.rows() != rhs.size() || mass.cols() != rhs.size() || stiffness.rows() != rhs.size() ||
      stiffness.cols() != rhs.size()) {
    throw InputError(fmt::format("time stepping blocks do not conform: mass {}x{}, stiffness {}x{}, rhs {}",
                                 mass.rows(), mass.cols(), stiffness.rows(), stiffness.cols(), rhs.size()));
  }
}

const SparseMatrix& checked_stiffness(const LinearModel& model, double tau) {
  check_sizes(model.mass, model.stiffness, model.rhs);
  if (!(tau > 0.0)) throw InputError("time step must be positive");
  return model.stiffness;
}

}  // namespace

Vector step_implicit(const SparseMatrix& mass, const SparseMatrix& stiffness, const Vector& rhs,
                     const Vector& previous, double tau) {
  return ImplicitEuler(LinearModel{mass, stiffness, rhs}, tau).step(previous);
}

ImplicitEuler::ImplicitEuler(const LinearModel& model, double tau)
    : mass_(model.mass),
      stiffness_(checked_stiffness(model, tau)),
      rhs_(model.rhs),
      tau_(tau),
      solver_(linalg::combine(1.0 / tau, model.mass, 1.0, model.stiffness)) {}

Vector ImplicitEuler::step(const Vector& previous) const {
  if (previous.size() != rhs_.size()) {
    throw InputError(fmt::format("state of size {} for a model of size {}", previous.size(), rhs_.size()));
  }
  const Vector residual = rhs_ - stiffness_.apply(previous);
  Vector increment = solver_.solve(residual);
  const Vector applied = (mass_ * increment) / tau_ + stiffness_.apply(increment);
  increment += solver_.solve(residual - applied);
  return previous + increment;
}

Trajectory run(const ImplicitEuler& stepper, const TimeSpec& time, const Vector& initial) {
  time.validate();
  Trajectory out;
  out.times.reserve(static_cast<std::size_t>(time.n_steps) + 1);
  out.states.reserve(static_cast<std::size_t>(time.n_steps) + 1);
  out.times.push_back(0.0);
  out.states.push_back(initial);
  for (int n = 1; n <= time.n_steps; ++n) {
    Vector next = stepper.step(out.states.back());
    if (!next.allFinite()) throw SolverError(fmt::format("time step {} produced a non-finite state", n));
    out.times.push_back(n * time.tau());
    out.states.push_back(std::move(next));
  }
  return out;
}

Trajectory run(const LinearModel& model, const TimeSpec& time, const Vector& initial) {
  time.validate();
  if (initial.size() != model.size()) {
    throw InputError(fmt::format("initial state of size {} for a model of size {}", initial.size(), model.size()));
  }
  try {
    const ImplicitEuler stepper(model, time.tau());
    return run(stepper, time, initial);
  } catch (const SolverError& e) {
    throw SolverError(fmt::format("time stepping (tau {}): {}", time.tau(), e.what()));
  }
}

Trajectory run(const LinearModel& model, const TimeSpec& time) {
  return run(model, time, Vector::Constant(model.size(), time.initial));
}

}  // namespace nlmc::sim
