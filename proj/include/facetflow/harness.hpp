#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "facetflow/anisotropy.hpp"
#include "facetflow/presets.hpp"
#include "facetflow/profile.hpp"
#include "facetflow/regularized.hpp"
#include "facetflow/semidiscrete.hpp"
#include "facetflow/tracker.hpp"

#include "json.hpp"

namespace facetflow {

struct ScenarioConfig {
  std::string preset = "parabola";  // preset name or "file" mode
  int corner_m = 2;                 // parameter of the corner preset
  double perturbation = 0.15;       // parameter of the perturbed-square preset
  std::optional<std::string> profile_file;
  std::string anisotropy = "square";
  std::vector<double> corners, weights;  // custom anisotropy
  std::vector<std::string> solvers{"tracker", "regularized", "scheme"};
  double T = 0.05;
  std::vector<double> sample_times;
  SolverParams regularized;
  int regularized_n = 2048;
  int scheme_n = 1024;
  double scheme_h = 1e-3;
  std::vector<double> scheme_eps_ladder{1e-3, 1e-4, 1e-5};
  double scheme_grad_tol = 1e-11;
  std::uint64_t seed = 1;

  static ScenarioConfig from_json(const nlohmann::json& j);
  nlohmann::json to_json() const;
  AnisotropyJ make_anisotropy() const;
  Profile make_profile() const;
};

// Exit codes used by the command line driver.
enum ExitCode : int {
  kOk = 0,
  kConfigError = 2,
  kSolverFailure = 3,
  kInvariantViolation = 4,
};

struct CrossValidation {
  struct Row {
    double t = 0;
    double tracker_vs_regularized_sup = -1;
    double tracker_vs_regularized_l2 = -1;
    double tracker_vs_scheme_sup = -1;
    double tracker_vs_scheme_l2 = -1;
  };
  std::vector<Row> rows;
  std::vector<std::string> violations;  // failed module invariants
  std::vector<std::string> notes;      // informational flags
  nlohmann::json to_json() const;
};

struct ScenarioArtifacts {
  ScenarioConfig config;
  std::optional<Milestones> milestones;
  CrossValidation cross;
  std::vector<std::string> written_files;
};

// Runs the configured solvers and writes the artifact bundle into out_dir.
// Outputs are deterministic: identical config and seed give identical bytes.
ScenarioArtifacts run_scenario(const ScenarioConfig& cfg,
                               const std::filesystem::path& out_dir);

// Long-format CSV for external plotting (curve snapshots, facet intervals,
// milestone markers), derived from a bundle directory written by run_scenario.
void emit_plot_data(const std::filesystem::path& bundle_dir,
                    const std::filesystem::path& out_file);

// Scheme-vs-tracker error table written as JSON.
nlohmann::json run_convergence(const ScenarioConfig& cfg,
                               const std::vector<double>& h_list);

}  // namespace facetflow
