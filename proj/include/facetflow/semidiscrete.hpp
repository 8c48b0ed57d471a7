#pragma once

#include <functional>
#include <vector>

#include "facetflow/anisotropy.hpp"
#include "facetflow/profile.hpp"
#include "facetflow/regularized.hpp"

namespace facetflow {

// One implicit-Euler step: minimize  sum_j [ h*J_eps(Du_j) + (u_j-v_j)^2/2 ] ds
// over grid functions u with the boundary offset u(2*pi) = u(0) + 2*pi^2.
// u holds samples of w = lambda + s^2/2 at s_j = 2*pi*j/n.
struct ProxStepProblem {
  std::vector<double> v;    // previous step field
  double h = 1e-3;          // time step
  const AnisotropyJ* anisotropy = nullptr;
  std::vector<double> eps_ladder{1e-3, 1e-4, 1e-5};  // continuation schedule
  double grad_tol = 1e-11;  // sup norm of the pointwise optimality residual
  int max_iter = 80;        // Newton iterations per continuation stage
};

struct ProxResult {
  std::vector<double> u;
  double residual = 0;
  int iterations = 0;
  bool converged = false;
  std::string message;
};

ProxResult prox_step(const ProxStepProblem& p);

// Per-step structural diagnostics of Theorem-style facet behavior.
struct StepDiagnostics {
  int k = 0;                     // step index
  double t = 0;
  bool xi_inclusion = true;      // previous Xi contained in the new one (2*ds)
  int components_prev = 0;
  int components_new = 0;
  bool u_equals_v_off_xi = true;
  double off_xi_deviation = 0;
  double omega_slope_variation = 0;  // max in-facet variation of (u-v)/h
  double l1_change = 0;          // |u-v|_L1
  double sup_change = 0;         // |u-v|_inf
  std::vector<double> new_measure_per_corner;  // |Xi_l^k \ Xi_l^{k-1}|
};

struct SchemeRun {
  std::vector<std::vector<double>> fields;  // lambda^k samples, k = 0..K
  std::vector<StepDiagnostics> diagnostics;
  double h = 0;
  int n = 0;
};

class SemiDiscreteScheme {
 public:
  SemiDiscreteScheme(const AnisotropyJ& J, int n, double h,
                     std::vector<double> eps_ladder = {1e-3, 1e-4, 1e-5},
                     double grad_tol = 1e-11);
  // lambda0 sampled from the profile; runs ceil(T/h) steps.
  SchemeRun run(const Profile& p0, double T, bool collect_diagnostics = true) const;
  // Single prox application to explicit w-samples.
  ProxResult apply(const std::vector<double>& v_w) const;

  int n() const { return n_; }
  double h() const { return h_; }
  const AnisotropyJ& anisotropy() const { return *J_; }

  StepDiagnostics diagnose(const std::vector<double>& lambda_prev,
                           const std::vector<double>& lambda_new, int k,
                           int k_phi0) const;

 private:
  const AnisotropyJ* J_;
  int n_;
  double h_;
  std::vector<double> eps_ladder_;
  double grad_tol_;
};

// Error table E(h) of the scheme against a reference trajectory in the
// discrete L1(0,T; L2) norm; reference(t) returns w(s_j, t) samples.
struct ConvergenceRow {
  double h = 0;
  double error = 0;
};
std::vector<ConvergenceRow> convergence_study(
    const AnisotropyJ& J, const Profile& p0, int n, const std::vector<double>& h_list,
    double T, const std::function<std::vector<double>(double)>& reference_w);

}  // namespace facetflow
