#include "facetflow/composition.hpp"

#include <algorithm>
#include <cmath>

namespace facetflow {

namespace {
constexpr double kTol = 1e-12;
}

PwGraph::PwGraph(std::vector<PwPiece> pieces) : pieces_(std::move(pieces)) {
  if (pieces_.empty()) throw ConfigError("pw graph: no pieces");
  for (std::size_t i = 0; i < pieces_.size(); ++i) {
    if (!(pieces_[i].x1 >= pieces_[i].x0)) throw ConfigError("pw graph: reversed piece");
    if (i && std::fabs(pieces_[i].x0 - pieces_[i - 1].x1) > 1e-9)
      throw ConfigError("pw graph: pieces not contiguous");
  }
}

double PwGraph::after(double x) const {
  int lo = 0, hi = int(pieces_.size()) - 1;
  while (lo < hi) {
    int mid = (lo + hi + 1) / 2;
    if (pieces_[mid].x0 <= x + kTol)
      lo = mid;
    else
      hi = mid - 1;
  }
  // Skip zero-length pieces when taking the right limit.
  while (lo + 1 < int(pieces_.size()) && pieces_[lo].x1 <= x + kTol) ++lo;
  return pieces_[lo].at(std::max(x, pieces_[lo].x0));
}

double PwGraph::before(double x) const {
  int lo = 0, hi = int(pieces_.size()) - 1;
  while (lo < hi) {
    int mid = (lo + hi + 1) / 2;
    if (pieces_[mid].x0 < x - kTol)
      lo = mid;
    else
      hi = mid - 1;
  }
  while (lo > 0 && pieces_[lo].x0 >= x - kTol) --lo;
  return pieces_[lo].at(std::min(x, pieces_[lo].x1));
}

SlopeInterval PwGraph::value(double x) const {
  double vlo = std::numeric_limits<double>::infinity();
  double vhi = -vlo;
  auto take = [&](double v) {
    vlo = std::min(vlo, v);
    vhi = std::max(vhi, v);
  };
  for (const PwPiece& p : pieces_) {
    if (x < p.x0 - kTol || x > p.x1 + kTol) continue;
    if (std::fabs(x - p.x0) <= kTol) take(p.v0);
    if (std::fabs(x - p.x1) <= kTol) take(p.v1);
    if (x > p.x0 + kTol && x < p.x1 - kTol) take(p.at(x));
  }
  if (vhi < vlo) throw ConfigError("pw graph: point outside the domain");
  return SlopeInterval{vlo, vhi};
}

bool PwGraph::monotone(double tol) const {
  double prev = pieces_.front().v0;
  for (const PwPiece& p : pieces_) {
    if (p.v0 < prev - tol) return false;
    if (p.v1 < p.v0 - tol) return false;
    prev = p.v1;
  }
  return true;
}

PwGraph PwGraph::inverse() const {
  if (!monotone()) throw ConfigError("pw graph inverse: graph is not increasing");
  std::vector<PwPiece> out;
  double prev_v = pieces_.front().v0;
  double prev_x = pieces_.front().x0;
  // A plateau at the very start of the domain becomes a vertical jump piece
  // at the left end of the inverse; interior plateaus become implicit jumps.
  double lead_hi = prev_x;
  for (const PwPiece& p : pieces_) {
    if (!(p.constant(kTol) && std::fabs(p.v0 - pieces_.front().v0) <= kTol)) break;
    lead_hi = p.x1;
  }
  if (lead_hi > prev_x + kTol)
    out.push_back(PwPiece{prev_v, prev_v, prev_x, lead_hi});
  for (const PwPiece& p : pieces_) {
    if (p.v0 > prev_v + kTol)  // jump becomes a plateau
      out.push_back(PwPiece{prev_v, p.v0, prev_x, prev_x});
    if (p.v1 > p.v0 + kTol)  // strictly increasing run inverts
      out.push_back(PwPiece{p.v0, p.v1, p.x0, p.x1});
    prev_v = std::max(prev_v, p.v1);
    prev_x = p.x1;
  }
  // Trailing plateau becomes a vertical jump at the right end.
  double tail_lo = pieces_.back().x1;
  for (auto it = pieces_.rbegin(); it != pieces_.rend(); ++it) {
    if (!(it->constant(kTol) && std::fabs(it->v1 - pieces_.back().v1) <= kTol)) break;
    tail_lo = it->x0;
  }
  if (tail_lo < pieces_.back().x1 - kTol)
    out.push_back(PwPiece{prev_v, prev_v, tail_lo, pieces_.back().x1});
  if (out.empty()) throw ConfigError("pw graph inverse: constant graph");
  return PwGraph(std::move(out));
}

PwGraph PwGraph::from_profile_derivative(const Profile& p) {
  std::vector<PwPiece> out;
  for (const Segment& s : p.segments()) {
    if (s.kind == Segment::Kind::facet) {
      if (s.hi > s.lo + kTol) out.push_back(PwPiece{s.lo, s.hi, s.alpha, s.alpha});
      continue;
    }
    for (std::size_t k = 0; k + 1 < s.x.size(); ++k)
      out.push_back(PwPiece{s.x[k], s.x[k + 1], s.phi[k], s.phi[k + 1]});
  }
  return PwGraph(std::move(out));
}

PwGraph PwGraph::from_subdifferential(const AnisotropyJ& J, double phi_lo, double phi_hi) {
  if (!(phi_hi > phi_lo)) throw ConfigError("subdifferential graph: empty range");
  std::vector<PwPiece> out;
  double x = phi_lo;
  while (x < phi_hi - kTol) {
    auto hit = J.corner_above(x + 1e-13);
    double x1 = std::min(phi_hi, hit.alpha);
    double slope = J.derivative(0.5 * (x + x1));
    out.push_back(PwPiece{x, x1, slope, slope});
    x = x1;
  }
  return PwGraph(std::move(out));
}

DomainDecomposition decompose_domain(const PwGraph& a) {
  DomainDecomposition d;
  const auto& ps = a.pieces();
  // Plateaus: maximal contiguous constant runs with a common value.
  std::size_t i = 0;
  while (i < ps.size()) {
    if (ps[i].constant(kTol) && ps[i].x1 > ps[i].x0 + kTol) {
      double lo = ps[i].x0, hi = ps[i].x1, c = ps[i].v0;
      std::size_t j = i + 1;
      while (j < ps.size() && ps[j].constant(kTol) && std::fabs(ps[j].v0 - c) <= kTol &&
             ps[j].x1 > ps[j].x0 + kTol) {
        hi = ps[j].x1;
        ++j;
      }
      d.plateaus.push_back({lo, hi, c});
      i = j;
    } else {
      ++i;
    }
  }
  // Multivalued points: interior breakpoints with a genuine jump.
  for (std::size_t k = 1; k < ps.size(); ++k) {
    if (std::fabs(ps[k].v0 - ps[k - 1].v1) > kTol) d.jump_points.push_back(ps[k].x0);
  }
  // Residual intervals: strict pieces merged.
  for (const PwPiece& p : ps) {
    if (p.constant(kTol) || p.x1 <= p.x0 + kTol) continue;
    if (!d.residual.empty() && std::fabs(d.residual.back().second - p.x0) <= kTol)
      d.residual.back().second = p.x1;
    else
      d.residual.push_back({p.x0, p.x1});
  }
  return d;
}

namespace {

// Flank value of the inner function just outside the plateau; `side` is -1
// for the left flank and +1 for the right. Values are lifted cyclically when
// the plateau touches the ends of the graph (circle data).
double flank_value(const PwGraph& a, const DomainDecomposition::Plateau& p, int side) {
  const auto& ps = a.pieces();
  double c = p.value;
  double boundary = (side < 0) ? p.lo : p.hi;
  double lift = 0;
  if (side < 0 && boundary <= a.lo() + kTol) {
    boundary = a.hi();
    lift = -kTwoPi;
  } else if (side > 0 && boundary >= a.hi() - kTol) {
    boundary = a.lo();
    lift = kTwoPi;
  }
  // Adjacent piece on the requested side.
  int idx = -1;
  for (int k = 0; k < int(ps.size()); ++k) {
    if (side < 0 && std::fabs(ps[k].x1 - boundary) <= kTol) idx = k;
    if (side > 0 && idx < 0 && std::fabs(ps[k].x0 - boundary) <= kTol) idx = k;
  }
  if (idx < 0) throw ConfigError("classify_plateau: no adjacent piece");
  const PwPiece& q = ps[idx];
  double near = ((side < 0) ? q.v1 : q.v0) + lift;
  double far = ((side < 0) ? q.v0 : q.v1) + lift;
  if (std::fabs(near - c) > kTol) return near;  // jump at the boundary
  if (std::fabs(far - c) <= kTol)
    throw ConfigError("classify_plateau: inner function sticks to the plateau value");
  return 0.5 * (near + far);  // same side as the far end, strictly
}

}  // namespace

PlateauClass classify_plateau(const PwGraph& a, const DomainDecomposition::Plateau& p) {
  double lv = flank_value(a, p, -1);
  double rv = flank_value(a, p, +1);
  bool lb = lv < p.value, rb = rv < p.value;
  if (lb && !rb) return PlateauClass::increasing;
  if (!lb && rb) return PlateauClass::decreasing;
  if (!lb && !rb) return PlateauClass::convex;
  return PlateauClass::concave;
}

namespace {

// Output of the composition on one strictly varying inner piece, split at the
// outer's multivalued values.
void compose_strict_piece(const PwGraph& outer, const PwPiece& p, std::vector<PwPiece>& out) {
  double x0 = p.x0, v0 = p.v0;
  const bool up = p.v1 > p.v0;
  while (true) {
    // Next outer jump value strictly between v0 and p.v1.
    double vstop = p.v1;
    auto consider = [&](double bp) {
      if (up && bp > v0 + kTol && bp < vstop - kTol) vstop = bp;
      if (!up && bp < v0 - kTol && bp > vstop + kTol) vstop = bp;
    };
    for (std::size_t k = 0; k < outer.pieces().size(); ++k) {
      const PwPiece& q = outer.pieces()[k];
      if (q.x1 - q.x0 <= kTol && std::fabs(q.v1 - q.v0) > kTol) consider(q.x0);
      if (k && std::fabs(q.v0 - outer.pieces()[k - 1].v1) > kTol) consider(q.x0);
    }
    double x1 = (std::fabs(p.v1 - p.v0) < kTol)
                    ? p.x1
                    : p.x0 + (vstop - p.v0) / (p.v1 - p.v0) * (p.x1 - p.x0);
    double vm = 0.5 * (v0 + vstop);
    // Locate the outer piece holding vm and extend it linearly.
    const PwPiece* q = nullptr;
    for (const PwPiece& cand : outer.pieces()) {
      if (cand.x1 - cand.x0 <= kTol) continue;
      if (cand.x0 - kTol <= vm && vm <= cand.x1 + kTol) {
        q = &cand;
        break;
      }
    }
    if (!q) throw ConfigError("compose: inner value outside the outer domain");
    out.push_back(PwPiece{x0, x1, q->at(v0), q->at(vstop)});
    if (std::fabs(vstop - p.v1) <= kTol || x1 >= p.x1 - kTol) break;
    x0 = x1;
    v0 = vstop;
  }
}

}  // namespace

PwGraph compose(const PwGraph& outer, const PwGraph& a) {
  DomainDecomposition dec = decompose_domain(a);
  std::vector<PwPiece> out;
  std::size_t next_plateau = 0;
  for (const PwPiece& p : a.pieces()) {
    if (p.x1 <= p.x0 + kTol) continue;
    if (p.constant(kTol)) {
      // Part of a plateau; emit once per whole plateau.
      while (next_plateau < dec.plateaus.size() &&
             dec.plateaus[next_plateau].hi <= p.x0 + kTol)
        ++next_plateau;
      const auto& pl = dec.plateaus[next_plateau];
      if (std::fabs(pl.lo - p.x0) > kTol) continue;  // interior constant run
      SlopeInterval sub = outer.value(pl.value);
      if (sub.singleton(kTol)) {
        out.push_back(PwPiece{pl.lo, pl.hi, sub.lo, sub.lo});
      } else {
        switch (classify_plateau(a, pl)) {
          case PlateauClass::increasing:
            out.push_back(PwPiece{pl.lo, pl.hi, sub.lo, sub.hi});
            break;
          case PlateauClass::decreasing:
            out.push_back(PwPiece{pl.lo, pl.hi, sub.hi, sub.lo});
            break;
          case PlateauClass::convex:
            out.push_back(PwPiece{pl.lo, pl.hi, sub.hi, sub.hi});
            break;
          case PlateauClass::concave:
            out.push_back(PwPiece{pl.lo, pl.hi, sub.lo, sub.lo});
            break;
        }
      }
      continue;
    }
    compose_strict_piece(outer, p, out);
  }
  return PwGraph(std::move(out));
}

PwGraph compose(const AnisotropyJ& J, const PwGraph& a) {
  double vmin = a.pieces().front().v0, vmax = vmin;
  for (const PwPiece& p : a.pieces()) {
    vmin = std::min({vmin, p.v0, p.v1});
    vmax = std::max({vmax, p.v0, p.v1});
  }
  PwGraph outer = PwGraph::from_subdifferential(J, vmin - 1.0, vmax + 1.0);
  return compose(outer, a);
}

std::vector<std::string> validate_jr_function(const PwGraph& f, const AnisotropyJ& J) {
  std::vector<std::string> bad;
  double tv = 0;
  double prev = f.pieces().front().v0;
  for (const PwPiece& p : f.pieces()) {
    tv += std::fabs(p.v0 - prev) + std::fabs(p.v1 - p.v0);
    prev = p.v1;
  }
  if (!std::isfinite(tv)) bad.push_back("total variation is not finite");
  // Between touches of the corner set the values must stay inside one gap.
  for (const PwPiece& p : f.pieces()) {
    double lo = std::min(p.v0, p.v1), hi = std::max(p.v0, p.v1);
    auto hit = J.corner_above(lo + 1e-11);
    int crossings = 0;
    while (hit.alpha < hi - 1e-11) {
      ++crossings;
      hit = (hit.index + 1 < J.size()) ? J.corner_hit(hit.index + 1, hit.period)
                                       : J.corner_hit(0, hit.period + 1);
    }
    // Transversal crossings are isolated corner touches, which is fine for a
    // strictly varying piece; a constant piece strictly between corners with
    // crossings would be a structural error.
    if (p.constant(1e-11) && crossings > 0)
      bad.push_back("constant piece spans a corner value");
  }
  return bad;
}

}  // namespace facetflow
