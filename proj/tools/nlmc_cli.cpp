#include "nlmc/cli.hpp"
#include "nlmc/error.hpp"

#include <CLI11.hpp>
#include <fmt/format.h>

#include <functional>
#include <iostream>
#include <map>

namespace {

struct Options {
  std::string config;
  std::string out;
  std::string layers;
  std::string model;
  std::string mass;
  std::optional<std::uint64_t> seed;
};

nlmc::cli::ExperimentConfig load(const Options& o) {
  auto config = nlmc::cli::load_config(o.config);
  if (!o.out.empty()) config.output.dir = o.out;
  if (!o.layers.empty()) config.coarse.layers = nlmc::cli::parse_int_list(o.layers, "--layers");
  if (!o.model.empty()) {
    if (o.model != "dfm" && o.model != "efm") throw nlmc::InputError("--model must be dfm or efm");
    config.model = o.model == "dfm" ? nlmc::geometry::FractureMode::dfm : nlmc::geometry::FractureMode::efm;
  }
  if (!o.mass.empty()) {
    if (o.mass != "galerkin" && o.mass != "diagonal") throw nlmc::InputError("--mass must be galerkin or diagonal");
    config.coarse.mass = o.mass == "galerkin" ? nlmc::upscaling::MassMode::galerkin : nlmc::upscaling::MassMode::diagonal;
  }
  if (o.seed) config.geometry.seed = *o.seed;
  config.validate();
  return config;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Non-local multicontinuum upscaling of fractured porous media flow"};
  app.require_subcommand(1);
  Options options;

  using Stage = std::function<void(const nlmc::cli::ExperimentConfig&, const std::filesystem::path&)>;
  const std::vector<std::tuple<std::string, std::string, Stage>> stages = {
      {"generate", "write the fine mesh, fractures and permeability field", nlmc::cli::cmd_generate},
      {"solve-fine", "run the fine-scale simulation", nlmc::cli::cmd_solve_fine},
      {"upscale", "build basis functions and coarse models for each oversampling size", nlmc::cli::cmd_upscale},
      {"solve-coarse", "run the coarse simulations", nlmc::cli::cmd_solve_coarse},
      {"compare", "tabulate relative errors of coarse against fine cell averages", nlmc::cli::cmd_compare},
      {"report", "run every stage in order", nlmc::cli::cmd_report},
  };
  std::map<CLI::App*, Stage> by_command;
  for (const auto& [name, help, stage] : stages) {
    auto* sub = app.add_subcommand(name, help);
    sub->add_option("--config", options.config, "experiment configuration file")->required();
    sub->add_option("--out", options.out, "output directory (overrides [output] dir)");
    sub->add_option("--layers", options.layers, "comma-separated oversampling layers, e.g. 1,2,3");
    sub->add_option("--model", options.model, "fine model: dfm or efm");
    sub->add_option("--mass", options.mass, "coarse mass matrix: galerkin or diagonal");
    sub->add_option("--seed", options.seed, "fracture generator seed");
    by_command[sub] = stage;
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    const auto config = load(options);
    for (auto* sub : app.get_subcommands()) by_command.at(sub)(config, config.output.dir);
  } catch (const nlmc::InputError& e) {
    std::cerr << "configuration error: " << e.what() << '\n';
    return 2;
  } catch (const nlmc::GeometryError& e) {
    std::cerr << "geometry error: " << e.what() << '\n';
    return 3;
  } catch (const nlmc::SolverError& e) {
    std::cerr << "solver error: " << e.what() << '\n';
    return 4;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
