#pragma once

#include <vector>

#include "facetflow/anisotropy.hpp"
#include "facetflow/profile.hpp"

namespace facetflow {

// Uniform periodic sample of Lambda at s_j = 2*pi*j/n.
struct GridField {
  int n = 0;
  double t = 0;
  std::vector<double> values;  // Lambda_j

  double ds() const { return kTwoPi / double(n); }
  double s(int j) const { return kTwoPi * double(j) / double(n); }
  // phi at the staggered point s_{j+1/2} (cyclic).
  double phi_half(int j) const {
    double next = (j + 1 < n) ? values[j + 1] : values[0];
    return (next - values[j]) / ds() + s(j) + 0.5 * ds();
  }
  static GridField sample(const Profile& p, int n);
};

struct SolverParams {
  double epsilon = 1e-3;
  double dt = 1e-4;
  double theta = 1.0;        // implicitness weight in [1/2, 1]
  double newton_tol = 1e-12;
  int max_iter = 30;
};

struct Observables {
  double tv = 0;       // cyclic total variation of phi
  double phi_min = 0;
  double phi_max = 0;
  double energy = 0;   // integral of J_eps(phi)
};

class RegularizedSolver {
 public:
  RegularizedSolver(const AnisotropyJ& J, SolverParams params);
  const SolverParams& params() const { return params_; }
  const RegularizedJ& energy() const { return Jeps_; }

  // One theta-implicit step of size params.dt (internally halves the step on
  // Newton failure, up to 10 times, re-assembling the full step).
  void step(GridField& f) const;
  // Advance to time t_end with the configured dt.
  void run(GridField& f, double t_end) const;
  Observables observables(const GridField& f) const;
  // Accumulated integral of Lambda_t^2 over all steps taken so far.
  double dissipation() const { return dissipation_; }
  void reset_dissipation() { dissipation_ = 0; }

  // Grid resolution advice; empty string when the mollified corners are
  // resolved per the n >= 16*(2*pi/epsilon) rule.
  std::string resolution_warning(int n) const;

 private:
  void single_step(GridField& f, double dt, int depth) const;
  SolverParams params_;
  RegularizedJ Jeps_;
  mutable double dissipation_ = 0;
};

// Co-evolves two fields with the same stepper and reports the L2 distance
// after every step (monotonicity check for the contraction property).
std::vector<double> contraction_history(const RegularizedSolver& solver, GridField a,
                                        GridField b, int steps);

// Cells whose phi value sits within tol of the corner set, merged into
// cyclic runs when separated by at most merge_cells grid cells.
struct GridXi {
  struct Run {
    int begin = 0;   // first cell index
    int end = 0;     // one past last (may exceed n for wrapped runs)
    int corner = 0;  // base corner index
  };
  int n = 0;
  std::vector<Run> runs;
  double measure(double ds) const;
  int count() const { return int(runs.size()); }
};

GridXi detect_grid_xi(const std::vector<double>& phi, const AnisotropyJ& J,
                      double value_tol = 1e-4, int merge_cells = 2);

}  // namespace facetflow
