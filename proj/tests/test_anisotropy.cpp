#include <cmath>

#include "doctest.h"
#include "facetflow/anisotropy.hpp"
#include "facetflow/presets.hpp"

using namespace facetflow;

TEST_CASE("square energy values at reference angles") {
  const AnisotropyJ& J = AnisotropyJ::square();
  CHECK(J.value(0.0) == doctest::Approx(kPi * kPi / 2).epsilon(1e-14));
  CHECK(J.value(kPi / 4) == doctest::Approx(kPi * kPi / 2).epsilon(1e-14));
  // Determinism on repeated calls.
  CHECK(J.value(kPi / 4) == J.value(kPi / 4));
}

TEST_CASE("square subdifferential at reference angles") {
  const AnisotropyJ& J = AnisotropyJ::square();
  SlopeInterval s0 = J.subdifferential(0.0);
  CHECK(s0.lo == doctest::Approx(0.0));
  CHECK(s0.hi == doctest::Approx(0.0));
  SlopeInterval s1 = J.subdifferential(kPi / 4);
  CHECK(s1.lo == doctest::Approx(0.0));
  CHECK(s1.hi == doctest::Approx(kPi / 2));
  SlopeInterval s2 = J.subdifferential(kPi);
  CHECK(s2.lo == doctest::Approx(kPi));
  CHECK(s2.hi == doctest::Approx(kPi));
}

TEST_CASE("periodic extension and the finite sum agree on the base window") {
  const AnisotropyJ& J = AnisotropyJ::square();
  Rng rng(3);
  for (int i = 0; i < 200; ++i) {
    double phi = rng.uniform(-5 * kPi / 4, 5 * kPi / 4);
    double lit = 0;
    for (int k = 0; k < 4; ++k) lit += J.weight(k) * std::fabs(phi - J.corner(k));
    CHECK(J.value(phi) == doctest::Approx(lit).epsilon(1e-13));
  }
  // One full period up: derivative gains 2*pi.
  for (int i = 0; i < 50; ++i) {
    double phi = rng.uniform(-10, 10);
    CHECK(J.derivative(phi + kTwoPi) ==
          doctest::Approx(J.derivative(phi) + kTwoPi).epsilon(1e-13));
  }
}

TEST_CASE("subdifferential is a monotone operator") {
  const AnisotropyJ& J = AnisotropyJ::square();
  Rng rng(11);
  for (int i = 0; i < 500; ++i) {
    double a = rng.uniform(-8, 8), b = rng.uniform(-8, 8);
    if (a > b) std::swap(a, b);
    if (b - a < 1e-9) continue;
    CHECK(J.subdifferential(a).hi <= J.subdifferential(b).lo + 1e-12);
  }
}

TEST_CASE("energy is convex (midpoint inequality on random triples)") {
  const AnisotropyJ& J = presets::pentagon();
  Rng rng(5);
  for (int i = 0; i < 300; ++i) {
    double a = rng.uniform(-9, 9), b = rng.uniform(-9, 9);
    CHECK(J.value(0.5 * (a + b)) <= 0.5 * (J.value(a) + J.value(b)) + 1e-11);
  }
}

TEST_CASE("mollified derivative: exactness away from corners") {
  const AnisotropyJ& J = AnisotropyJ::square();
  for (double eps : {1e-2, 1e-3}) {
    RegularizedJ R(J, eps);
    Rng rng(17);
    int checked = 0;
    for (int i = 0; i < 1000; ++i) {
      double phi = rng.uniform(-7, 7);
      bool near = false;
      if (auto hit = J.corner_near(phi, eps)) near = true, (void)hit;
      if (near) continue;
      ++checked;
      CHECK(R.d1(phi) - eps * eps * phi == doctest::Approx(J.derivative(phi)).epsilon(1e-13));
    }
    CHECK(checked > 700);
  }
}

TEST_CASE("mollified second derivative bounded below by eps^2") {
  RegularizedJ R(AnisotropyJ::square(), 3e-3);
  Rng rng(23);
  for (int i = 0; i < 1000; ++i) {
    double phi = rng.uniform(-7, 7);
    CHECK(R.d2(phi) >= 3e-3 * 3e-3 - 1e-18);
  }
}

TEST_CASE("mollified derivative at a corner approaches the jump midpoint") {
  const AnisotropyJ& J = AnisotropyJ::square();
  CHECK(RegularizedJ(J, 0.05).d1(0.0) == doctest::Approx(0.0).epsilon(1e-12));
  for (double eps : {1e-2, 1e-3, 1e-4}) {
    RegularizedJ R(J, eps);
    CHECK(R.d1(kPi / 4) == doctest::Approx(kPi / 4).epsilon(1e-3));
  }
  // Interval endpoints are the one-sided limits as eps shrinks.
  RegularizedJ R(J, 1e-5);
  SlopeInterval sub = J.subdifferential(kPi / 4);
  CHECK(R.d1(kPi / 4 - 1e-5) == doctest::Approx(sub.lo).epsilon(1e-4));
  CHECK(R.d1(kPi / 4 + 1e-5) == doctest::Approx(sub.hi).epsilon(1e-4));
}

TEST_CASE("mollified value blends the exact energy") {
  RegularizedJ R(AnisotropyJ::square(), 1e-2);
  const AnisotropyJ& J = AnisotropyJ::square();
  // away from corners the quadratic term is the only difference
  CHECK(R.value(0.1) == doctest::Approx(J.value(0.1) + 0.5e-4 * 0.1 * 0.1).epsilon(1e-12));
  // finite-difference consistency of d1 and d2
  for (double phi : {0.25, kPi / 4, 1.9, 5.0}) {
    double h = 1e-6;
    double fd = (R.value(phi + h) - R.value(phi - h)) / (2 * h);
    CHECK(R.d1(phi) == doctest::Approx(fd).epsilon(1e-5));
    double fd2 = (R.d1(phi + h) - R.d1(phi - h)) / (2 * h);
    CHECK(R.d2(phi) == doctest::Approx(fd2).epsilon(1e-4));
  }
}

TEST_CASE("wulff profile of the square") {
  WulffProfile w = wulff_profile(AnisotropyJ::square());
  REQUIRE(w.omegas.size() == 5);
  CHECK(w.omegas.front() == doctest::Approx(-kPi));
  CHECK(w.omegas.back() == doctest::Approx(kPi));
  // Step heights all pi/2; total sweep exactly 2*pi.
  for (std::size_t i = 1; i < w.omegas.size(); ++i)
    CHECK(w.omegas[i] - w.omegas[i - 1] == doctest::Approx(kPi / 2));
  CHECK(w.omegas.back() - w.omegas.front() == doctest::Approx(kTwoPi));
  // Interior plateau values per the quoted indexing.
  CHECK(w.omegas[1] == doctest::Approx(-kPi / 2));
  CHECK(w.omegas[2] == doctest::Approx(0.0));
  CHECK(w.omegas[3] == doctest::Approx(kPi / 2));
}

TEST_CASE("wulff profile of a general polygon telescopes to 2*pi") {
  AnisotropyJ J = presets::pentagon();
  WulffProfile w = wulff_profile(J);
  CHECK(w.omegas.back() - w.omegas.front() == doctest::Approx(kTwoPi).epsilon(1e-13));
  for (int i = 0; i < J.size(); ++i)
    CHECK(w.omegas[i + 1] - w.omegas[i] == doctest::Approx(2 * J.weight(i)));
}

TEST_CASE("degenerate anisotropies are rejected") {
  CHECK_THROWS_AS(AnisotropyJ({0.0}, {kPi}), ConfigError);
  CHECK_THROWS_AS(AnisotropyJ({0, 1, 2, 3}, {1, 1, 1, 1}), ConfigError);  // sum != pi
  CHECK_THROWS_AS(AnisotropyJ({0, 1, 0.5, 3}, {kPi / 4, kPi / 4, kPi / 4, kPi / 4}),
                  ConfigError);
  CHECK_THROWS_AS(RegularizedJ(AnisotropyJ::square(), -1.0), ConfigError);
  CHECK_THROWS_AS(RegularizedJ(AnisotropyJ::square(), 2.0), ConfigError);
}
