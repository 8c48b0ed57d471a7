#include <algorithm>
#include <cmath>

#include "doctest.h"
#include "facetflow/presets.hpp"
#include "facetflow/regularized.hpp"

using namespace facetflow;

namespace {
const AnisotropyJ& SQ = AnisotropyJ::square();

GridField evolved(const Profile& p, int n, SolverParams prm, double T) {
  RegularizedSolver solver(SQ, prm);
  GridField f = GridField::sample(p, n);
  solver.run(f, T);
  return f;
}
}  // namespace

TEST_CASE("minimal profile translates upward at unit speed") {
  SolverParams prm;
  prm.epsilon = 1e-3;
  prm.dt = 1e-3;
  Profile p = presets::minimal();
  GridField f0 = GridField::sample(p, 512);
  GridField f = f0;
  RegularizedSolver solver(SQ, prm);
  solver.run(f, 0.1);
  double sup = 0;
  for (int j = 0; j < f.n; ++j)
    sup = std::max(sup, std::fabs(f.values[j] - f0.values[j] - 0.1));
  CHECK(sup <= 5 * prm.epsilon);
}

TEST_CASE("maximum principle and TV decay on random JR data") {
  // Pointwise phi bounds are tied to the coordinate cut; the datum keeps its
  // corner crossings clear of s = 0 so the window extremes are meaningful.
  SolverParams prm;
  prm.epsilon = 3e-3;
  prm.dt = 2e-5;
  prm.newton_tol = 1e-13;
  RegularizedSolver solver(SQ, prm);
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    Rng rng(seed);
    Profile p = presets::random_jr(rng, 0.45);
    GridField f = GridField::sample(p, 256);
    Observables o0 = solver.observables(f);
    double tv_prev = o0.tv;
    for (int k = 0; k < 200; ++k) {
      solver.step(f);
      Observables o = solver.observables(f);
      CHECK(o.tv <= tv_prev + 1e-8);
      CHECK(o.phi_min >= o0.phi_min - 1e-8);
      CHECK(o.phi_max <= o0.phi_max + 1e-8);
      tv_prev = o.tv;
    }
  }
}

TEST_CASE("dissipation bounded by initial energy plus boundary work") {
  SolverParams prm;
  prm.epsilon = 1e-3;
  prm.dt = 1e-3;
  RegularizedSolver solver(SQ, prm);
  Profile p = presets::parabola();
  GridField f = GridField::sample(p, 512);
  double lambda0_start = f.values[0];
  Observables o0 = solver.observables(f);
  solver.run(f, 0.05);
  double bound = o0.energy + kTwoPi * (f.values[0] - lambda0_start) + 1e-6;
  CHECK(solver.dissipation() <= bound);
}

TEST_CASE("contraction and order preservation") {
  SolverParams prm;
  prm.epsilon = 3e-3;
  prm.dt = 1e-3;
  RegularizedSolver solver(SQ, prm);
  Rng rng(3);
  Profile p1 = presets::random_jr(rng);
  Profile p2 = presets::random_jr(rng);
  GridField a = GridField::sample(p1, 256);
  GridField b = GridField::sample(p2, 256);
  // identical inputs stay identical
  auto zero = contraction_history(solver, a, a, 5);
  for (double d : zero) CHECK(d <= 1e-12);
  // random pair: non-increasing distance
  auto hist = contraction_history(solver, a, b, 60);
  for (std::size_t i = 1; i < hist.size(); ++i) CHECK(hist[i] <= hist[i - 1] + 1e-8);
  // ordered pair stays ordered
  GridField c = b;
  double shift = 0;
  for (int j = 0; j < a.n; ++j) shift = std::max(shift, a.values[j] - b.values[j]);
  for (int j = 0; j < c.n; ++j) c.values[j] += shift + 0.05;
  GridField a2 = a;
  for (int k = 0; k < 60; ++k) {
    solver.step(a2);
    solver.step(c);
    for (int j = 0; j < a2.n; ++j) CHECK(c.values[j] >= a2.values[j] - 1e-8);
  }
}

TEST_CASE("grid refinement against a finer reference gains at least 1.8x") {
  // pre-collision parabola regime, fixed epsilon
  double T = 0.01, eps = 3e-3;
  Profile p = presets::parabola();
  auto run = [&](int n, double dt) {
    SolverParams prm;
    prm.epsilon = eps;
    prm.dt = dt;
    return evolved(p, n, prm, T);
  };
  GridField ref = run(4096, 2.5e-5);
  auto sup_err = [&](const GridField& f) {
    double e = 0;
    int stride = ref.n / f.n;
    for (int j = 0; j < f.n; ++j)
      e = std::max(e, std::fabs(f.values[j] - ref.values[j * stride]));
    return e;
  };
  double e1 = sup_err(run(512, 2e-4));
  double e2 = sup_err(run(1024, 1e-4));
  CHECK(e1 / e2 >= 1.8);
}

TEST_CASE("epsilon robustness: tracker-free trend of the mollified flow") {
  // With epsilon shrinking, solutions at fixed t approach each other
  // monotonically (Cauchy-like trend in the sup norm).
  double T = 0.02;
  Profile p = presets::parabola();
  auto at_eps = [&](double eps) {
    SolverParams prm;
    prm.epsilon = eps;
    prm.dt = 1e-4;
    return evolved(p, 1024, prm, T);
  };
  GridField f1 = at_eps(1e-2), f2 = at_eps(3e-3), f3 = at_eps(1e-3);
  double d12 = 0, d23 = 0;
  for (int j = 0; j < f1.n; ++j) {
    d12 = std::max(d12, std::fabs(f1.values[j] - f2.values[j]));
    d23 = std::max(d23, std::fabs(f2.values[j] - f3.values[j]));
  }
  CHECK(d23 < d12);
}

TEST_CASE("grid xi detection finds plateau runs") {
  Profile p = presets::minimal();
  GridField f = GridField::sample(p, 256);
  std::vector<double> phi(f.n);
  for (int j = 0; j < f.n; ++j) phi[j] = f.phi_half(j);
  GridXi xi = detect_grid_xi(phi, SQ);
  CHECK(xi.count() == 4);
  CHECK(xi.measure(f.ds()) == doctest::Approx(kTwoPi).epsilon(0.05));
}

TEST_CASE("resolution warning fires for coarse grids") {
  SolverParams prm;
  prm.epsilon = 1e-3;
  RegularizedSolver solver(SQ, prm);
  CHECK(!solver.resolution_warning(64).empty());
}
