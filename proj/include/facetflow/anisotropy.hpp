#pragma once

#include <optional>
#include <vector>

#include "facetflow/numerics.hpp"

namespace facetflow {

struct SlopeInterval {
  double lo = 0;
  double hi = 0;
  bool singleton(double tol = 0.0) const { return hi - lo <= tol; }
  bool contains(double v, double tol = 0.0) const {
    return v >= lo - tol && v <= hi + tol;
  }
  double mid() const { return 0.5 * (lo + hi); }
};

// Convex piecewise-linear angular energy with corner set repeated every 2*pi.
// The derivative gains exactly 2*pi per period (sum of jump heights 2*sum(b)),
// which is what makes the staircase profile with unit-speed section possible.
// On the window [corner(N-1)-2pi, corner(0)+2pi] the value coincides with the
// plain finite sum  sum_i b_i * |phi - alpha_i|.
class AnisotropyJ {
 public:
  AnisotropyJ(std::vector<double> corners, std::vector<double> weights);
  static const AnisotropyJ& square();

  int size() const { return int(corners_.size()); }
  double corner(int i) const { return corners_[i]; }
  double weight(int i) const { return weights_[i]; }
  double jump(int i) const { return 2.0 * weights_[i]; }
  // Slope on gap g = (corner(g-1), corner(g)); g = 0 is the gap below
  // corner 0 and g = N the gap above corner N-1 (one period).
  double gap_slope(int g) const { return gap_slopes_[g]; }
  double min_gap() const { return min_gap_; }
  bool is_square(double tol = 1e-12) const;

  struct CornerHit {
    int index;      // base-period corner index
    long period;    // lift count
    double alpha;   // lifted corner value = corner(index) + 2*pi*period
  };
  std::optional<CornerHit> corner_near(double phi, double tol = 1e-12) const;
  CornerHit corner_hit(int index, long period) const;
  // Corner with lifted value strictly above / below phi.
  CornerHit corner_above(double phi) const;
  CornerHit corner_below(double phi) const;

  double value(double phi) const;
  // Exact derivative away from corners (lifted gap slope).
  double derivative(double phi) const;
  SlopeInterval subdifferential(double phi, double tol = 1e-12) const;
  SlopeInterval subdifferential_at(const CornerHit& hit) const;

 private:
  std::vector<double> corners_;      // strictly increasing, one period
  std::vector<double> weights_;      // positive, sum = pi
  std::vector<double> gap_slopes_;   // size N+1
  std::vector<double> knot_values_;  // J at base corners (finite-sum formula)
  double full_period_integral_ = 0;  // of the derivative over one period
  double min_gap_ = 0;

  // phi = r + 2*pi*m with r in [corner(0), corner(0)+2*pi)
  double reduce(double phi, long& m) const;
};

struct WulffProfile {
  // Phi(s) = omegas[j] on [angles[j], angles[j+1]), j = 0..N, with
  // angles[0] = corner(N-1) - 2*pi and angles[N+1] = angles[0] + 2*pi.
  std::vector<double> angles;  // size N+2
  std::vector<double> omegas;  // size N+1
};

WulffProfile wulff_profile(const AnisotropyJ& J);

// Mollified energy J_eps = J * rho_eps + (eps^2/2) x^2 with the quartic
// kernel rho(u) = (15/16)(1-u^2)^2 on [-1,1]; all derivatives in closed form.
class RegularizedJ {
 public:
  RegularizedJ(AnisotropyJ base, double epsilon);
  const AnisotropyJ& base() const { return base_; }
  double epsilon() const { return eps_; }
  double value(double phi) const;
  double d1(double phi) const;
  double d2(double phi) const;

 private:
  AnisotropyJ base_;
  double eps_;
};

// Kernel primitives shared with tests.
double mollifier_rho(double u);   // the bump itself
double mollifier_cdf(double u);   // integral of rho from -1
double mollifier_abs(double u);   // (|.| * rho)(u) for |u| <= 1

}  // namespace facetflow
