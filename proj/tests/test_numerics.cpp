#include <cmath>
#include <vector>

#include "doctest.h"
#include "facetflow/numerics.hpp"

using namespace facetflow;

TEST_CASE("cyclic tridiagonal solve reproduces a dense product") {
  const int n = 12;
  Rng rng(7);
  std::vector<double> lower(n), diag(n), upper(n), x(n);
  for (int i = 0; i < n; ++i) {
    lower[i] = rng.uniform(-1, 1);
    upper[i] = rng.uniform(-1, 1);
    diag[i] = 4.0 + rng.uniform(0, 1);  // diagonally dominant
    x[i] = rng.uniform(-2, 2);
  }
  std::vector<double> rhs(n);
  for (int i = 0; i < n; ++i)
    rhs[i] = lower[i] * x[(i + n - 1) % n] + diag[i] * x[i] + upper[i] * x[(i + 1) % n];
  auto sol = solve_cyclic_tridiagonal(lower, diag, upper, rhs);
  for (int i = 0; i < n; ++i) CHECK(sol[i] == doctest::Approx(x[i]).epsilon(1e-12));
}

TEST_CASE("brent finds simple roots") {
  double r = brent_root([](double x) { return x * x - 2.0; }, 0, 2, 1e-14);
  CHECK(r == doctest::Approx(std::sqrt(2.0)).epsilon(1e-12));
}

TEST_CASE("adaptive integrator handles a stiff-ish decay") {
  double t = 0;
  std::vector<double> y{1.0};
  OdeControl ctrl;
  integrate_adaptive(
      [](double, std::span<const double> y, std::span<double> dy) {
        dy[0] = -8.0 * y[0];
      },
      t, y, 1.0, ctrl);
  CHECK(y[0] == doctest::Approx(std::exp(-8.0)).epsilon(1e-8));
}

TEST_CASE("format_double round-trips") {
  for (double v : {0.0, 1.0 / 3.0, kPi, -1e-17, 12345.6789}) {
    CHECK(std::strtod(format_double(v).c_str(), nullptr) == v);
  }
}
