#include <cmath>

#include "doctest.h"
#include "facetflow/presets.hpp"
#include "facetflow/profile.hpp"

using namespace facetflow;

namespace {
const AnisotropyJ& SQ = AnisotropyJ::square();
}

TEST_CASE("presets are valid JR data") {
  CHECK(presets::parabola().validate(SQ).empty());
  CHECK(presets::minimal().validate(SQ).empty());
  CHECK(presets::minimal_reversed().validate(SQ).empty());
  for (int m : {1, 2, 3}) CHECK(presets::corner(m).validate(SQ).empty());
  CHECK(presets::two_hump().validate(SQ).empty());
  CHECK(presets::perturbed_square().validate(SQ).empty());
  CHECK(presets::polygon(SQ).validate(SQ).empty());
  AnisotropyJ pent = presets::pentagon();
  CHECK(presets::polygon(pent).validate(pent).empty());
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    Rng rng(seed);
    Profile p = presets::random_jr(rng);
    auto bad = p.validate(SQ);
    INFO("seed ", seed, " first violation: ", bad.empty() ? "none" : bad.front());
    CHECK(bad.empty());
  }
}

TEST_CASE("minimal profile: facet components cover the circle") {
  Profile p = presets::minimal();
  auto xi = p.xi_components(SQ);
  REQUIRE(xi.size() == 4);
  double total = 0;
  for (const auto& c : xi) {
    CHECK(c.hi - c.lo == doctest::Approx(kPi / 2));
    total += c.hi - c.lo;
  }
  CHECK(total == doctest::Approx(kTwoPi));
  CHECK(p.facet_count(SQ) == 4);
  // Cyclic TV: three interior jumps of pi/2 plus the wrap jump.
  CHECK(p.tv_cyclic() == doctest::Approx(kTwoPi).epsilon(1e-13));
  CHECK(p.jr_norm(SQ) == doctest::Approx(kTwoPi + 4).epsilon(1e-13));
}

TEST_CASE("parabola profile: four degenerate components at the corner angles") {
  Profile p = presets::parabola();
  auto xi = p.xi_components(SQ);
  REQUIRE(xi.size() == 4);
  for (int k = 0; k < 4; ++k) {
    CHECK(xi[k].degenerate());
    CHECK(xi[k].lo == doctest::Approx(kPi / 4 + k * kPi / 2).epsilon(1e-13));
  }
  CHECK(p.tv_cyclic() == doctest::Approx(kTwoPi).epsilon(1e-13));
  CHECK(p.facet_count(SQ) == 4);
  // Interlacing.
  for (std::size_t k = 1; k < xi.size(); ++k) CHECK(xi[k - 1].hi <= xi[k].lo + 1e-12);
}

TEST_CASE("constant profile segment has zero interval TV and no facets") {
  // phi == 0 is not a closed-curve datum; it exercises the raw computations.
  std::vector<Segment> segs{Segment::smooth({0.0, kTwoPi}, {0.0, 0.0})};
  Profile p(std::move(segs), 0.0);
  CHECK(p.tv_interval() == 0.0);
  CHECK(p.tv_cyclic() == 0.0);  // wrap jump measured mod 2*pi
  CHECK(p.facet_count(SQ) == 0);
  CHECK(!p.validate(SQ).empty());  // periodicity violated, as expected
}

TEST_CASE("partial_w cases") {
  Profile p = presets::minimal();
  // corner between two facets
  SlopeInterval at = p.partial_w(kPi / 2);
  CHECK(at.lo == doctest::Approx(kPi / 4));
  CHECK(at.hi == doctest::Approx(3 * kPi / 4));
  // interior of a facet
  SlopeInterval in = p.partial_w(0.3);
  CHECK(in.lo == doctest::Approx(kPi / 4));
  CHECK(in.hi == doctest::Approx(kPi / 4));
  // smooth point of the parabola
  Profile q = presets::parabola();
  SlopeInterval sm = q.partial_w(0.5);
  CHECK(sm.lo == doctest::Approx(0.5));
  CHECK(sm.hi == doctest::Approx(0.5));
}

TEST_CASE("corner preset straddles the advertised number of corners") {
  for (int m : {1, 2, 3}) {
    Profile p = presets::corner(m);
    SlopeInterval dw = p.partial_w(kPi);
    int inside = 0;
    auto hit = SQ.corner_above(dw.lo + 1e-9);
    while (hit.alpha < dw.hi - 1e-9) {
      ++inside;
      hit = (hit.index + 1 < SQ.size()) ? SQ.corner_hit(hit.index + 1, hit.period)
                                        : SQ.corner_hit(0, hit.period + 1);
    }
    CHECK(inside == m);
    CHECK(p.integral_phi() == doctest::Approx(kTwoPi * kPi).epsilon(1e-12));
  }
}

TEST_CASE("validate reports violations with locations") {
  // A smooth segment crossing a corner value interiorly.
  std::vector<Segment> segs;
  segs.push_back(Segment::smooth({0.0, kTwoPi}, {0.0, kTwoPi}));
  Profile p(std::move(segs), 0.0);
  auto bad = p.validate(SQ);
  REQUIRE(!bad.empty());
  CHECK(bad.front().find("crosses corner value") != std::string::npos);
  // A plateau at a corner not marked as a facet.
  std::vector<Segment> segs2;
  segs2.push_back(Segment::smooth({0.0, 1.0, 2.0}, {kPi / 4, kPi / 4, kPi / 4}));
  segs2.push_back(Segment::smooth({2.0, kTwoPi}, {kPi / 4, kPi / 4 + 0.3}));
  Profile q(std::move(segs2), 0.0);
  auto bad2 = q.validate(SQ);
  bool found = false;
  for (const auto& v : bad2)
    if (v.find("plateau at corner value") != std::string::npos) found = true;
  CHECK(found);
}

TEST_CASE("json round-trip is byte-exact") {
  Rng rng(42);
  Profile p = presets::random_jr(rng);
  auto j1 = p.to_json();
  Profile q = Profile::from_json(j1);
  auto j2 = q.to_json();
  CHECK(j1.dump() == j2.dump());
  CHECK(p.base_height() == q.base_height());
  CHECK(p.integral_phi() == q.integral_phi());
}

TEST_CASE("piecewise view matches the profile and lifts across periods") {
  Profile p = presets::two_hump();
  PiecewiseW w(p);
  Rng rng(9);
  for (int i = 0; i < 200; ++i) {
    double s = rng.uniform(0, kTwoPi - 1e-9);
    CHECK(w.w(s) == doctest::Approx(p.w(s)).epsilon(1e-12));
    // cover rule
    CHECK(w.w(s + kTwoPi) ==
          doctest::Approx(p.w(s) + kTwoPi * s + 2 * kPi * kPi).epsilon(1e-11));
    CHECK(w.phi_after(s + kTwoPi) == doctest::Approx(w.phi_after(s) + kTwoPi));
  }
}

TEST_CASE("reconstruction round-trip: integrate then re-extract") {
  Profile p = presets::two_hump();
  PiecewiseW w(p);
  for (const Segment& s : p.segments()) {
    if (s.kind != Segment::Kind::smooth) continue;
    for (std::size_t k = 0; k < s.x.size(); ++k) {
      if (k > 0)
        CHECK(w.phi_before(s.x[k]) == doctest::Approx(s.phi[k]).epsilon(1e-10));
      if (k + 1 < s.x.size())
        CHECK(w.phi_after(s.x[k]) == doctest::Approx(s.phi[k]).epsilon(1e-10));
    }
  }
}

TEST_CASE("polygon preset for the square equals the minimal profile") {
  Profile a = presets::polygon(SQ);
  Profile b = presets::minimal();
  for (double s : {0.1, 0.9, 2.0, 3.3, 4.4, 5.9})
    CHECK(a.phi_after(s) == doctest::Approx(b.phi_after(s)).epsilon(1e-12));
}
