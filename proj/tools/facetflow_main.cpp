#include <fstream>
#include <iostream>

#include "CLI11.hpp"
#include "facetflow/harness.hpp"

namespace ff = facetflow;

namespace {

ff::ScenarioConfig load_config(const std::string& path, std::uint64_t* seed_override,
                               const std::string& solver_override) {
  std::ifstream in(path);
  if (!in) throw ff::ConfigError("config: cannot open '" + path + "'");
  nlohmann::json j;
  try {
    in >> j;
  } catch (const std::exception& e) {
    throw ff::ConfigError(std::string("config: invalid json: ") + e.what());
  }
  ff::ScenarioConfig cfg = ff::ScenarioConfig::from_json(j);
  if (seed_override) cfg.seed = *seed_override;
  if (!solver_override.empty() && solver_override != "all")
    cfg.solvers = {solver_override};
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"facetflow: facet dynamics for a singular parabolic flow on the circle"};
  app.require_subcommand(1);

  std::string config_path, out_dir = "out", solver = "all";
  std::uint64_t seed = 0;
  bool seed_set = false;

  auto add_common = [&](CLI::App* cmd, bool with_out) {
    cmd->add_option("--config", config_path, "scenario config (json)")->required();
    if (with_out) cmd->add_option("--out", out_dir, "output directory");
    cmd->add_option("--solver", solver, "tracker|regularized|scheme|all");
    cmd->add_option("--seed", seed, "rng seed override")->each([&](const std::string&) {
      seed_set = true;
    });
  };

  CLI::App* run = app.add_subcommand("run", "run a scenario and write the bundle");
  add_common(run, true);
  CLI::App* validate = app.add_subcommand("validate", "validate config and datum");
  add_common(validate, false);
  CLI::App* conv = app.add_subcommand("convergence", "scheme-vs-tracker error table");
  add_common(conv, true);
  std::vector<double> h_list{4e-3, 2e-3, 1e-3};
  conv->add_option("--h", h_list, "time steps for the study");
  CLI::App* plot = app.add_subcommand("plotdata", "emit long-format plot csv");
  plot->add_option("--config", config_path, "bundle directory (from run)")->required();
  plot->add_option("--out", out_dir, "output csv path");

  CLI11_PARSE(app, argc, argv);

  try {
    if (run->parsed()) {
      ff::ScenarioConfig cfg =
          load_config(config_path, seed_set ? &seed : nullptr, solver);
      ff::ScenarioArtifacts art = ff::run_scenario(cfg, out_dir);
      for (const std::string& f : art.written_files) std::cout << f << "\n";
      if (!art.cross.violations.empty()) {
        for (const auto& v : art.cross.violations) std::cerr << "violation: " << v << "\n";
        return ff::kInvariantViolation;
      }
      return ff::kOk;
    }
    if (validate->parsed()) {
      ff::ScenarioConfig cfg =
          load_config(config_path, seed_set ? &seed : nullptr, solver);
      ff::AnisotropyJ J = cfg.make_anisotropy();
      ff::Profile p = cfg.make_profile();
      auto bad = p.validate(J);
      for (const auto& v : bad) std::cout << "violation: " << v << "\n";
      if (!bad.empty()) return ff::kConfigError;
      std::cout << "ok\n";
      return ff::kOk;
    }
    if (conv->parsed()) {
      ff::ScenarioConfig cfg =
          load_config(config_path, seed_set ? &seed : nullptr, solver);
      nlohmann::json table = ff::run_convergence(cfg, h_list);
      std::filesystem::create_directories(out_dir);
      std::ofstream out(std::filesystem::path(out_dir) / "convergence.json",
                        std::ios::binary);
      out << table.dump(2) << "\n";
      std::cout << table.dump(2) << "\n";
      return ff::kOk;
    }
    if (plot->parsed()) {
      ff::emit_plot_data(config_path, out_dir);
      return ff::kOk;
    }
  } catch (const ff::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return ff::kConfigError;
  } catch (const ff::InvariantViolation& e) {
    std::cerr << "invariant violation: " << e.what() << "\n";
    return ff::kInvariantViolation;
  } catch (const ff::SolverError& e) {
    std::cerr << "solver failure: " << e.what() << "\n";
    return ff::kSolverFailure;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return ff::kSolverFailure;
  }
  return ff::kOk;
}
