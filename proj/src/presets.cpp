#include "facetflow/presets.hpp"

#include <algorithm>
#include <cmath>

namespace facetflow {
namespace presets {

namespace {

Segment ramp(double x0, double x1, double v0, double v1) {
  return Segment::smooth({x0, x1}, {v0, v1});
}

// Splits the linear run [x0,x1], v0 -> v1 at every interior corner crossing,
// inserting zero-length facet markers; appends to segs.
void append_with_markers(std::vector<Segment>& segs, const AnisotropyJ& J, double x0,
                         double x1, double v0, double v1) {
  double m = (v1 - v0) / (x1 - x0);
  double x = x0, v = v0;
  while (true) {
    bool up = v1 > v;
    auto hit = up ? J.corner_above(v + 1e-13) : J.corner_below(v - 1e-13);
    bool crosses = up ? (hit.alpha < v1 - 1e-13) : (hit.alpha > v1 + 1e-13);
    if (!crosses) break;
    double xc = x0 + (hit.alpha - v0) / m;
    segs.push_back(ramp(x, xc, v, hit.alpha));
    segs.push_back(Segment::facet(xc, xc, hit.alpha));
    x = xc;
    v = hit.alpha;
  }
  segs.push_back(ramp(x, x1, v, v1));
}

}  // namespace

Profile parabola() {
  const AnisotropyJ& J = AnisotropyJ::square();
  std::vector<Segment> segs;
  append_with_markers(segs, J, 0.0, kTwoPi, 0.0, kTwoPi);
  return Profile(std::move(segs), 0.0);
}

Profile minimal() {
  std::vector<Segment> segs;
  segs.push_back(Segment::facet(0.0, kPi / 2, kPi / 4));
  segs.push_back(Segment::facet(kPi / 2, kPi, 3 * kPi / 4));
  segs.push_back(Segment::facet(kPi, 3 * kPi / 2, 5 * kPi / 4));
  segs.push_back(Segment::facet(3 * kPi / 2, kTwoPi, 7 * kPi / 4));
  return Profile(std::move(segs), 0.0);
}

Profile minimal_reversed() {
  std::vector<Segment> segs;
  segs.push_back(Segment::facet(0.0, kPi / 2, 7 * kPi / 4));
  segs.push_back(Segment::facet(kPi / 2, kPi, 5 * kPi / 4));
  segs.push_back(Segment::facet(kPi, 3 * kPi / 2, 3 * kPi / 4));
  segs.push_back(Segment::facet(3 * kPi / 2, kTwoPi, kPi / 4));
  return Profile(std::move(segs), 0.0);
}

Profile corner(int m) {
  if (m < 1 || m > 3) throw ConfigError("corner preset: m must be 1, 2 or 3");
  const AnisotropyJ& J = AnisotropyJ::square();
  const double d = (m == 1) ? 2.0 : (m == 2) ? 2.5 : 4.0;
  const double a = kPi - 0.5 * d;  // makes the phi-integral exactly 2*pi^2
  std::vector<Segment> segs;
  append_with_markers(segs, J, 0.0, kPi, a, 0.0);
  append_with_markers(segs, J, kPi, kTwoPi, d, a + kTwoPi);
  return Profile(std::move(segs), 0.0);
}

Profile two_hump() {
  const double c1 = kPi / 4, c2 = 3 * kPi / 4, c3 = 5 * kPi / 4, c4 = 7 * kPi / 4;
  const double v0 = 0.2, valley = 1.0;
  const double f_ramp = 0.4, f5_len = 0.4;
  const double e_end = 2.8;  // end of the fixed layout, start of the c3 facet
  auto area_until = [&](double a_len) {
    double L4 = e_end + a_len;
    double L5 = L4 + f_ramp + f5_len;
    double area = 0;
    area += 0.5 * (v0 + c1) * 0.5;            // [0.0, 0.5]
    area += c1 * 0.3;                          // F1 [0.5, 0.8]
    area += 0.5 * (c1 + c2) * 0.4;             // [0.8, 1.2]
    area += c2 * 0.3;                          // F2 [1.2, 1.5] zero curvature
    area += 0.5 * (c2 + valley) * 0.3;         // [1.5, 1.8]
    area += 0.5 * (valley + c2) * 0.3;         // [1.8, 2.1]
    area += c2 * 0.3;                          // F3 [2.1, 2.4]
    area += 0.5 * (c2 + c3) * 0.4;             // [2.4, 2.8]
    area += c3 * a_len;                        // F4
    area += 0.5 * (c3 + c4) * f_ramp;          // ramp to c4
    area += c4 * f5_len;                       // F5
    area += 0.5 * (c4 + v0 + kTwoPi) * (kTwoPi - L5);  // closing ramp
    return area;
  };
  // area is affine in a_len; solve exactly.
  double a0 = area_until(0.0), a1 = area_until(1.0);
  double a_len = (kTwoPi * kPi - a0) / (a1 - a0);
  double L4 = e_end + a_len;
  double L5 = L4 + f_ramp + f5_len;
  if (!(a_len > 0 && L5 < kTwoPi))
    throw ConfigError("two_hump preset: layout solve failed");

  std::vector<Segment> segs;
  segs.push_back(ramp(0.0, 0.5, v0, c1));
  segs.push_back(Segment::facet(0.5, 0.8, c1));
  segs.push_back(ramp(0.8, 1.2, c1, c2));
  segs.push_back(Segment::facet(1.2, 1.5, c2));  // local max at a corner
  segs.push_back(ramp(1.5, 1.8, c2, valley));
  segs.push_back(ramp(1.8, 2.1, valley, c2));
  segs.push_back(Segment::facet(2.1, 2.4, c2));
  segs.push_back(ramp(2.4, 2.8, c2, c3));
  segs.push_back(Segment::facet(2.8, L4, c3));
  segs.push_back(ramp(L4, L4 + f_ramp, c3, c4));
  segs.push_back(Segment::facet(L4 + f_ramp, L5, c4));
  segs.push_back(ramp(L5, kTwoPi, c4, v0 + kTwoPi));
  return Profile(std::move(segs), 0.0);
}

Profile perturbed_square(double e) {
  if (!(std::fabs(e) < kPi / 2 * 0.9))
    throw ConfigError("perturbed_square: perturbation too large");
  const double g = kPi / 2;
  // Pattern (+1,-1,-1,+1) keeps both the total length and the phi-integral
  // constraints exact.
  double g1 = g + e, g2 = g - e, g3 = g - e, g4 = g + e;
  std::vector<Segment> segs;
  double x = 0;
  const double alphas[4] = {kPi / 4, 3 * kPi / 4, 5 * kPi / 4, 7 * kPi / 4};
  const double gaps[4] = {g1, g2, g3, g4};
  for (int k = 0; k < 4; ++k) {
    double x1 = (k == 3) ? kTwoPi : x + gaps[k];
    segs.push_back(Segment::facet(x, x1, alphas[k]));
    x = x1;
  }
  return Profile(std::move(segs), 0.0);
}

Profile polygon(const AnisotropyJ& J) {
  // Staircase inverse of the extended derivative: value on the jump interval
  // [gap_slope(j), gap_slope(j+1)] (+ 2*pi lifts) is corner(j) (+ lift).
  const int n = J.size();
  auto inverse_at = [&](double y) {
    long m = long(std::floor((y - J.gap_slope(0)) / kTwoPi));
    double r = y - kTwoPi * double(m);
    if (r < J.gap_slope(0)) {
      r += kTwoPi;
      --m;
    }
    for (int j = 0; j < n; ++j)
      if (r <= J.gap_slope(j + 1) + 1e-15)
        return std::pair<int, long>{j, m};
    return std::pair<int, long>{n - 1, m};
  };
  // Integral of the inverse staircase over [0, 2*pi) at shift zero.
  double I0 = 0;
  {
    double y = 0;
    while (y < kTwoPi - 1e-15) {
      auto [j, m] = inverse_at(y + 1e-13);
      double y_next = std::min(kTwoPi, J.gap_slope(j + 1) + kTwoPi * double(m));
      I0 += (J.corner(j) + kTwoPi * double(m)) * (y_next - y);
      y = y_next;
    }
  }
  // The integral grows with slope exactly 2*pi in the shift.
  double shift = (kTwoPi * kPi - I0) / kTwoPi;
  std::vector<Segment> segs;
  double s = 0;
  while (s < kTwoPi - 1e-12) {
    auto [j, m] = inverse_at(s + shift + 1e-13);
    double s_next = std::min(kTwoPi, J.gap_slope(j + 1) + kTwoPi * double(m) - shift);
    if (s_next <= s) s_next = s + 1e-13;
    if (s_next > s + 1e-12)
      segs.push_back(Segment::facet(s, s_next, J.corner(j) + kTwoPi * double(m)));
    s = s_next;
  }
  segs.front().lo = 0.0;
  segs.back().hi = kTwoPi;
  return Profile(std::move(segs), 0.0);
}

Profile random_jr(Rng& rng, double cut_clearance) {
  const AnisotropyJ& J = AnisotropyJ::square();
  if (cut_clearance < 0 || cut_clearance > 0.6)
    throw ConfigError("random_jr: cut_clearance must lie in [0, 0.6]");
  // Wiggly periodic perturbation of phi(s) = s with bounded slopes. The first
  // and last corner crossings sit at pi/4 -/+ psi from the cut, so capping
  // |psi| keeps them clear of it.
  const double amp = (cut_clearance > 0) ? (kPi / 4 - cut_clearance) : 0.55;
  const double slope_cap = (cut_clearance > 0) ? 0.5 : 0.75;
  int count = 6 + int(rng.index(7));
  // With a clearance the whole collar is one linear piece, so the flow is
  // exactly static there (the mollified flux is affine on gap interiors).
  double margin = std::max(0.08, cut_clearance);
  std::vector<double> xs{0.0};
  while (int(xs.size()) < count + 1) {
    double x = rng.uniform(margin, kTwoPi - margin);
    bool ok = true;
    for (double e : xs)
      if (std::fabs(e - x) < 0.12) ok = false;
    if (ok) xs.push_back(x);
  }
  std::sort(xs.begin(), xs.end());
  xs.push_back(kTwoPi);

  std::vector<double> psi(xs.size());
  psi[0] = rng.uniform(-0.7 * amp, 0.7 * amp);
  for (std::size_t i = 1; i < xs.size(); ++i) {
    double dx = xs[i] - xs[i - 1];
    double step = rng.uniform(-slope_cap, slope_cap) * dx;
    psi[i] = std::clamp(psi[i - 1] + step, -amp, amp);
  }
  if (cut_clearance > 0) {
    // Flat psi across the cut: the collar becomes a single slope-1 stretch of
    // phi, which the mollified flow leaves exactly invariant.
    psi[1] = psi[0];
    psi[xs.size() - 2] = psi[0];
    psi[xs.size() - 1] = psi[0];
  }
  // Close the loop without breaking the slope bound, then remove the mean.
  double defect = psi.back() - psi.front();
  for (std::size_t i = 0; i < xs.size(); ++i) psi[i] -= defect * xs[i] / kTwoPi;
  double mean = 0;
  for (std::size_t i = 1; i < xs.size(); ++i)
    mean += 0.5 * (psi[i] + psi[i - 1]) * (xs[i] - xs[i - 1]);
  mean /= kTwoPi;
  for (double& v : psi) v -= mean;
  if (cut_clearance > 0) {
    // Shrink until every corner crossing s = c - psi(s) clears the cut.
    for (int guard = 0; guard < 60; ++guard) {
      double m = 0;
      for (double v : psi) m = std::max(m, std::fabs(v));
      if (m <= kPi / 4 - cut_clearance) break;
      for (double& v : psi) v *= 0.8;
    }
  }

  // phi nodes; widen up to two corner crossings into genuine plateaus.
  std::vector<Segment> segs;
  int plateaus_left = int(rng.index(3));
  for (std::size_t i = 0; i + 1 < xs.size(); ++i) {
    double x0 = xs[i], x1 = xs[i + 1];
    double v0 = x0 + psi[i], v1 = x1 + psi[i + 1];
    double m = (v1 - v0) / (x1 - x0);
    // At most one widened plateau per piece to keep the geometry simple.
    auto hit = J.corner_above(v0 + 1e-12);
    bool widened = false;
    if (plateaus_left > 0 && hit.alpha < v1 - 1e-12) {
      double xc = x0 + (hit.alpha - v0) / m;
      double wmax = 0.4 * std::min(xc - x0, x1 - xc);
      if (cut_clearance > 0)
        wmax = std::min(wmax, std::min(xc, kTwoPi - xc) - cut_clearance);
      if (wmax > 0.02) {
        double w = rng.uniform(0.02, wmax);
        append_with_markers(segs, J, x0, xc - w, v0, hit.alpha - m * w);
        segs.push_back(Segment::facet(xc - w, xc + w, hit.alpha));
        append_with_markers(segs, J, xc + w, x1, hit.alpha + m * w, v1);
        --plateaus_left;
        widened = true;
      }
    }
    if (!widened) append_with_markers(segs, J, x0, x1, v0, v1);
  }
  return Profile(std::move(segs), rng.uniform(-1.0, 1.0));
}

AnisotropyJ pentagon() {
  std::vector<double> corners{-2.8, -1.2, 0.3, 1.9, 2.9};
  std::vector<double> weights{0.5, 0.8, 0.6, 0.7, kPi - 2.6};
  return AnisotropyJ(corners, weights);
}

}  // namespace presets
}  // namespace facetflow
