#include <cmath>

#include "doctest.h"
#include "facetflow/composition.hpp"
#include "facetflow/presets.hpp"

using namespace facetflow;

namespace {
const AnisotropyJ& SQ = AnisotropyJ::square();

// Random maximal monotone step function on [0, L]: plateaus at increasing
// values with jumps between.
PwGraph random_step(Rng& rng, double L = 5.0) {
  int plateaus = 2 + int(rng.index(5));
  std::vector<double> breaks{0.0};
  for (int i = 1; i < plateaus; ++i) breaks.push_back(rng.uniform(0.2, L - 0.2));
  breaks.push_back(L);
  std::sort(breaks.begin(), breaks.end());
  std::vector<PwPiece> pieces;
  double v = rng.uniform(-3, -2);
  for (int i = 0; i < plateaus; ++i) {
    if (breaks[i + 1] - breaks[i] < 1e-3) continue;
    pieces.push_back(PwPiece{breaks[i], breaks[i + 1], v, v});
    v += rng.uniform(0.3, 1.5);  // jump height
  }
  return PwGraph(std::move(pieces));
}
}  // namespace

TEST_CASE("domain decomposition of the minimal profile derivative") {
  PwGraph a = PwGraph::from_profile_derivative(presets::minimal());
  DomainDecomposition d = decompose_domain(a);
  CHECK(d.plateaus.size() == 4);
  CHECK(d.jump_points.size() == 3);  // interior junctions
  CHECK(d.residual.empty());
}

TEST_CASE("domain decomposition of strictly increasing data is all residual") {
  PwGraph a(std::vector<PwPiece>{{0, 1, 0.0, 0.5}, {1, 2, 0.5, 1.1}});
  DomainDecomposition d = decompose_domain(a);
  CHECK(d.plateaus.empty());
  CHECK(d.jump_points.empty());
  REQUIRE(d.residual.size() == 1);
  CHECK(d.residual[0].first == doctest::Approx(0.0));
  CHECK(d.residual[0].second == doctest::Approx(2.0));
}

TEST_CASE("single step function decomposes into one jump point and plateaus") {
  PwGraph a(std::vector<PwPiece>{{0, 1, 0.2, 0.2}, {1, 2, 0.9, 0.9}});
  DomainDecomposition d = decompose_domain(a);
  CHECK(d.plateaus.size() == 2);
  REQUIRE(d.jump_points.size() == 1);
  CHECK(d.jump_points[0] == doctest::Approx(1.0));
}

TEST_CASE("plateau classification") {
  // monotone increasing step: plateau is 'increasing'
  PwGraph inc(std::vector<PwPiece>{{0, 1, -1, 0.0}, {1, 2, 0.0, 0.0}, {2, 3, 0.0, 1.0}});
  auto d = decompose_domain(inc);
  REQUIRE(d.plateaus.size() == 1);
  CHECK(classify_plateau(inc, d.plateaus[0]) == PlateauClass::increasing);
  // local minimum plateau: 'convex'
  PwGraph vee(std::vector<PwPiece>{{0, 1, 1.0, 0.0}, {1, 2, 0.0, 0.0}, {2, 3, 0.0, 1.0}});
  d = decompose_domain(vee);
  REQUIRE(d.plateaus.size() == 1);
  CHECK(classify_plateau(vee, d.plateaus[0]) == PlateauClass::convex);
  // local maximum plateau: 'concave'
  PwGraph cap(std::vector<PwPiece>{{0, 1, -1.0, 0.0}, {1, 2, 0.0, 0.0}, {2, 3, 0.0, -1.0}});
  d = decompose_domain(cap);
  REQUIRE(d.plateaus.size() == 1);
  CHECK(classify_plateau(cap, d.plateaus[0]) == PlateauClass::concave);
  // sticking to the plateau value outside it is malformed
  PwGraph bad(std::vector<PwPiece>{{0, 1, 0.0, 0.0}, {1, 2, 0.0, 0.0}});
  CHECK_THROWS_AS(
      classify_plateau(bad, DomainDecomposition::Plateau{0.0, 1.0, 0.0}),
      ConfigError);
}

TEST_CASE("composition with the minimal profile reproduces the identity section") {
  PwGraph a = PwGraph::from_profile_derivative(presets::minimal());
  PwGraph out = compose(SQ, a);
  for (double s : {0.1, 0.7, 1.4, 2.2, 3.0, 3.9, 4.7, 5.5, 6.1}) {
    SlopeInterval v = out.value(s);
    CHECK(v.lo == doctest::Approx(s).epsilon(1e-12));
    CHECK(v.hi == doctest::Approx(s).epsilon(1e-12));
  }
  CHECK(validate_jr_function(out, SQ).empty());
}

TEST_CASE("convex plateau at a corner takes the upper subdifferential endpoint") {
  // phi dips to the corner pi/4 from above on both sides.
  double c = kPi / 4;
  PwGraph a(std::vector<PwPiece>{{0, 1, c + 0.5, c}, {1, 2, c, c}, {2, 3, c, c + 0.5}});
  PwGraph out = compose(SQ, a);
  SlopeInterval mid = out.value(1.5);
  CHECK(mid.lo == doctest::Approx(kPi / 2));  // upper endpoint of [0, pi/2]
  CHECK(mid.hi == doctest::Approx(kPi / 2));
  // concave: lower endpoint
  PwGraph b(std::vector<PwPiece>{{0, 1, c - 0.5, c}, {1, 2, c, c}, {2, 3, c, c - 0.5}});
  PwGraph out2 = compose(SQ, b);
  CHECK(out2.value(1.5).lo == doctest::Approx(0.0));
  CHECK(out2.value(1.5).hi == doctest::Approx(0.0));
}

TEST_CASE("inverse composed with itself is the identity on step functions") {
  for (std::uint64_t seed = 1; seed <= 50; ++seed) {
    Rng rng(seed);
    PwGraph a = random_step(rng);
    PwGraph inv = a.inverse();
    PwGraph out = compose(inv, a);
    for (int i = 1; i < 40; ++i) {
      double s = a.lo() + (a.hi() - a.lo()) * double(i) / 40.0;
      SlopeInterval v = out.value(s);
      CHECK(v.lo == doctest::Approx(s).epsilon(1e-9));
      CHECK(v.hi == doctest::Approx(s).epsilon(1e-9));
    }
  }
}

TEST_CASE("composition of maximal increasing graphs is maximal increasing") {
  for (std::uint64_t seed = 100; seed < 130; ++seed) {
    Rng rng(seed);
    PwGraph a = random_step(rng);
    // monotone ramp-and-step outer over the value range of a
    double lo = a.pieces().front().v0 - 1.0, hi = a.pieces().back().v1 + 1.0;
    PwGraph outer(std::vector<PwPiece>{{lo, 0.5 * (lo + hi), -1.0, 0.2},
                                       {0.5 * (lo + hi), hi, 0.7, 2.0}});
    PwGraph out = compose(outer, a);
    CHECK(out.monotone(1e-10));
  }
}

TEST_CASE("composition is a measurable selection of the subdifferential") {
  Rng rng(77);
  Profile p = presets::random_jr(rng);
  PwGraph a = PwGraph::from_profile_derivative(p);
  PwGraph out = compose(SQ, a);
  for (int i = 1; i < 500; ++i) {
    double s = kTwoPi * double(i) / 500.0;
    SlopeInterval av = a.value(s);
    if (!av.singleton(1e-9)) continue;  // multivalued points carry intervals
    SlopeInterval jv = SQ.subdifferential(av.lo, 1e-9);
    SlopeInterval ov = out.value(s);
    CHECK(ov.lo >= jv.lo - 1e-9);
    CHECK(ov.hi <= jv.hi + 1e-9);
  }
  CHECK(validate_jr_function(out, SQ).empty());
}
