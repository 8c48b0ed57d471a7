#include "facetflow/anisotropy.hpp"

#include <algorithm>
#include <cmath>

namespace facetflow {

AnisotropyJ::AnisotropyJ(std::vector<double> corners, std::vector<double> weights)
    : corners_(std::move(corners)), weights_(std::move(weights)) {
  const int n = int(corners_.size());
  if (n < 4) throw ConfigError("anisotropy: need at least 4 corners");
  if (int(weights_.size()) != n)
    throw ConfigError("anisotropy: corners and weights differ in length");
  double wsum = 0;
  for (double b : weights_) {
    if (!(b > 0)) throw ConfigError("anisotropy: weights must be positive");
    wsum += b;
  }
  if (std::fabs(wsum - kPi) > 1e-12)
    throw ConfigError("anisotropy: weights must sum to pi");
  for (int i = 1; i < n; ++i)
    if (!(corners_[i] > corners_[i - 1]))
      throw ConfigError("anisotropy: corners must be strictly increasing");
  if (!(corners_[n - 1] - corners_[0] < kTwoPi))
    throw ConfigError("anisotropy: corners must fit in one period");

  gap_slopes_.resize(n + 1);
  for (int g = 0; g <= n; ++g) {
    double s = 0;
    for (int i = 0; i < n; ++i) s += (i < g) ? weights_[i] : -weights_[i];
    gap_slopes_[g] = s;
  }

  knot_values_.resize(n);
  for (int i = 0; i < n; ++i) {
    double v = 0;
    for (int j = 0; j < n; ++j) v += weights_[j] * std::fabs(corners_[i] - corners_[j]);
    knot_values_[i] = v;
  }

  full_period_integral_ = 0;
  for (int g = 1; g < n; ++g)
    full_period_integral_ += gap_slopes_[g] * (corners_[g] - corners_[g - 1]);
  full_period_integral_ += gap_slopes_[n] * (corners_[0] + kTwoPi - corners_[n - 1]);

  min_gap_ = corners_[0] + kTwoPi - corners_[n - 1];
  for (int i = 1; i < n; ++i) min_gap_ = std::min(min_gap_, corners_[i] - corners_[i - 1]);
}

const AnisotropyJ& AnisotropyJ::square() {
  static const AnisotropyJ j({-3 * kPi / 4, -kPi / 4, kPi / 4, 3 * kPi / 4},
                             {kPi / 4, kPi / 4, kPi / 4, kPi / 4});
  return j;
}

bool AnisotropyJ::is_square(double tol) const {
  const AnisotropyJ& s = square();
  if (size() != 4) return false;
  for (int i = 0; i < 4; ++i)
    if (std::fabs(corner(i) - s.corner(i)) > tol || std::fabs(weight(i) - s.weight(i)) > tol)
      return false;
  return true;
}

double AnisotropyJ::reduce(double phi, long& m) const {
  m = long(std::floor((phi - corners_[0]) / kTwoPi));
  double r = phi - kTwoPi * double(m);
  // Guard against boundary rounding.
  if (r < corners_[0]) {
    r += kTwoPi;
    --m;
  } else if (r >= corners_[0] + kTwoPi) {
    r -= kTwoPi;
    ++m;
  }
  return r;
}

std::optional<AnisotropyJ::CornerHit> AnisotropyJ::corner_near(double phi, double tol) const {
  long m;
  double r = reduce(phi, m);
  for (int i = 0; i < size(); ++i) {
    if (std::fabs(r - corners_[i]) <= tol) return CornerHit{i, m, corners_[i] + kTwoPi * double(m)};
  }
  // r could sit just below corner(0) + 2*pi.
  if (std::fabs(r - (corners_[0] + kTwoPi)) <= tol)
    return CornerHit{0, m + 1, corners_[0] + kTwoPi * double(m + 1)};
  return std::nullopt;
}

AnisotropyJ::CornerHit AnisotropyJ::corner_hit(int index, long period) const {
  return CornerHit{index, period, corners_[index] + kTwoPi * double(period)};
}

AnisotropyJ::CornerHit AnisotropyJ::corner_above(double phi) const {
  long m;
  double r = reduce(phi, m);
  for (int i = 0; i < size(); ++i)
    if (corners_[i] > r) return corner_hit(i, m);
  return corner_hit(0, m + 1);
}

AnisotropyJ::CornerHit AnisotropyJ::corner_below(double phi) const {
  long m;
  double r = reduce(phi, m);
  for (int i = size(); i-- > 0;)
    if (corners_[i] < r) return corner_hit(i, m);
  return corner_hit(size() - 1, m - 1);
}

double AnisotropyJ::value(double phi) const {
  long m;
  double r = reduce(phi, m);
  // Base-period value, anchored at the exact finite-sum knot values.
  auto it = std::upper_bound(corners_.begin(), corners_.end(), r);
  int g = int(it - corners_.begin());  // r in gap g in [1..N] within the window
  double base;
  if (g == 0) {
    base = knot_values_[0] + gap_slopes_[0] * (r - corners_[0]);
  } else {
    base = knot_values_[g - 1] + gap_slopes_[g] * (r - corners_[g - 1]);
  }
  const double dm = double(m);
  const double period_term = full_period_integral_ + kTwoPi * (r - corners_[0]);
  return base + dm * period_term + kTwoPi * kPi * dm * (dm - 1.0);
}

double AnisotropyJ::derivative(double phi) const {
  long m;
  double r = reduce(phi, m);
  auto it = std::upper_bound(corners_.begin(), corners_.end(), r);
  int g = int(it - corners_.begin());
  return gap_slopes_[g] + kTwoPi * double(m);
}

SlopeInterval AnisotropyJ::subdifferential_at(const CornerHit& hit) const {
  const double lift = kTwoPi * double(hit.period);
  return SlopeInterval{gap_slopes_[hit.index] + lift, gap_slopes_[hit.index + 1] + lift};
}

SlopeInterval AnisotropyJ::subdifferential(double phi, double tol) const {
  if (auto hit = corner_near(phi, tol)) return subdifferential_at(*hit);
  double d = derivative(phi);
  return SlopeInterval{d, d};
}

WulffProfile wulff_profile(const AnisotropyJ& J) {
  // Constructor enforces N >= 4 and sum(b) = pi; re-check the weight sum here
  // since this is the operation the contract attaches the rejection to.
  double wsum = 0;
  for (int i = 0; i < J.size(); ++i) wsum += J.weight(i);
  if (std::fabs(wsum - kPi) > 1e-12)
    throw ConfigError("wulff_profile: weights must sum to pi");
  WulffProfile out;
  const int n = J.size();
  out.angles.push_back(J.corner(n - 1) - kTwoPi);
  for (int i = 0; i < n; ++i) out.angles.push_back(J.corner(i));
  out.angles.push_back(J.corner(n - 1));  // = angles[0] + 2*pi
  for (int g = 0; g <= n; ++g) out.omegas.push_back(J.gap_slope(g));
  return out;
}

double mollifier_rho(double u) {
  if (std::fabs(u) >= 1.0) return 0.0;
  double w = 1.0 - u * u;
  return (15.0 / 16.0) * w * w;
}

double mollifier_cdf(double u) {
  if (u <= -1.0) return 0.0;
  if (u >= 1.0) return 1.0;
  return 0.5 + (15.0 / 16.0) * (u - 2.0 * u * u * u / 3.0 + std::pow(u, 5) / 5.0);
}

double mollifier_abs(double u) {
  if (std::fabs(u) >= 1.0) return std::fabs(u);
  double w = 1.0 - u * u;
  return u * (2.0 * mollifier_cdf(u) - 1.0) + (5.0 / 16.0) * w * w * w;
}

RegularizedJ::RegularizedJ(AnisotropyJ base, double epsilon)
    : base_(std::move(base)), eps_(epsilon) {
  if (!(eps_ > 0)) throw ConfigError("regularized J: epsilon must be positive");
  if (!(eps_ < 0.5 * base_.min_gap()))
    throw ConfigError("regularized J: epsilon must be below half the smallest corner gap");
}

double RegularizedJ::value(double phi) const {
  double v = base_.value(phi) + 0.5 * eps_ * eps_ * phi * phi;
  if (auto hit = base_.corner_near(phi, eps_)) {
    double d = phi - hit->alpha;
    v += base_.weight(hit->index) * (eps_ * mollifier_abs(d / eps_) - std::fabs(d));
  }
  return v;
}

double RegularizedJ::d1(double phi) const {
  if (auto hit = base_.corner_near(phi, eps_)) {
    SlopeInterval sub = base_.subdifferential_at(*hit);
    return sub.lo + base_.jump(hit->index) * mollifier_cdf((phi - hit->alpha) / eps_) +
           eps_ * eps_ * phi;
  }
  return base_.derivative(phi) + eps_ * eps_ * phi;
}

double RegularizedJ::d2(double phi) const {
  double v = eps_ * eps_;
  if (auto hit = base_.corner_near(phi, eps_)) {
    v += base_.jump(hit->index) / eps_ * mollifier_rho((phi - hit->alpha) / eps_);
  }
  return v;
}

}  // namespace facetflow
