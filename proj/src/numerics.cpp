#include "facetflow/numerics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>

namespace facetflow {

std::string format_double(double v) {
  char buf[40];
  // Find the shortest precision that round-trips.
  for (int prec = 1; prec <= 17; ++prec) {
    std::snprintf(buf, sizeof buf, "%.*g", prec, v);
    if (std::strtod(buf, nullptr) == v) return buf;
  }
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::vector<double> solve_cyclic_tridiagonal(std::span<const double> lower,
                                             std::span<const double> diag,
                                             std::span<const double> upper,
                                             std::span<const double> rhs) {
  const std::size_t n = diag.size();
  if (n < 3) throw SolverError("cyclic tridiagonal solve needs n >= 3");

  auto thomas = [&](std::vector<double> b, std::vector<double> d) {
    // Plain tridiagonal solve with modified diagonal b and rhs d
    // (lower/upper taken from the enclosing system, corners ignored).
    std::vector<double> c(n, 0.0);
    c[0] = upper[0] / b[0];
    d[0] /= b[0];
    for (std::size_t i = 1; i < n; ++i) {
      double denom = b[i] - lower[i] * c[i - 1];
      if (i + 1 < n) c[i] = upper[i] / denom;
      d[i] = (d[i] - lower[i] * d[i - 1]) / denom;
    }
    for (std::size_t i = n - 1; i-- > 0;) d[i] -= c[i] * d[i + 1];
    return d;
  };

  // Sherman-Morrison: fold the two corner entries into a rank-one update.
  const double alpha = lower[0];   // couples x[n-1] in row 0
  const double beta = upper[n - 1];  // couples x[0] in row n-1
  const double gamma = -diag[0];
  std::vector<double> b(diag.begin(), diag.end());
  b[0] -= gamma;
  b[n - 1] -= alpha * beta / gamma;

  std::vector<double> u(n, 0.0);
  u[0] = gamma;
  u[n - 1] = beta;

  auto y = thomas(b, std::vector<double>(rhs.begin(), rhs.end()));
  auto q = thomas(b, u);

  const double fact = (y[0] + alpha * y[n - 1] / gamma) /
                      (1.0 + q[0] + alpha * q[n - 1] / gamma);
  for (std::size_t i = 0; i < n; ++i) y[i] -= fact * q[i];
  return y;
}

double brent_root(const std::function<double(double)>& f, double lo, double hi,
                  double xtol, int max_iter) {
  double a = lo, b = hi;
  double fa = f(a), fb = f(b);
  if (fa == 0.0) return a;
  if (fb == 0.0) return b;
  if ((fa > 0) == (fb > 0)) throw SolverError("brent_root: root not bracketed");
  double c = a, fc = fa, d = b - a, e = d;
  for (int it = 0; it < max_iter; ++it) {
    if ((fb > 0) == (fc > 0)) {
      c = a;
      fc = fa;
      d = e = b - a;
    }
    if (std::fabs(fc) < std::fabs(fb)) {
      a = b; b = c; c = a;
      fa = fb; fb = fc; fc = fa;
    }
    const double tol1 = 2.0 * std::numeric_limits<double>::epsilon() * std::fabs(b) + 0.5 * xtol;
    const double xm = 0.5 * (c - b);
    if (std::fabs(xm) <= tol1 || fb == 0.0) return b;
    if (std::fabs(e) >= tol1 && std::fabs(fa) > std::fabs(fb)) {
      double s = fb / fa, p, q;
      if (a == c) {
        p = 2.0 * xm * s;
        q = 1.0 - s;
      } else {
        double qq = fa / fc, r = fb / fc;
        p = s * (2.0 * xm * qq * (qq - r) - (b - a) * (r - 1.0));
        q = (qq - 1.0) * (r - 1.0) * (s - 1.0);
      }
      if (p > 0) q = -q;
      p = std::fabs(p);
      if (2.0 * p < std::min(3.0 * xm * q - std::fabs(tol1 * q), std::fabs(e * q))) {
        e = d;
        d = p / q;
      } else {
        d = xm;
        e = d;
      }
    } else {
      d = xm;
      e = d;
    }
    a = b;
    fa = fb;
    b += (std::fabs(d) > tol1) ? d : (xm > 0 ? tol1 : -tol1);
    fb = f(b);
  }
  return b;
}

namespace {

// Dormand-Prince coefficients.
constexpr double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5, c5 = 8.0 / 9;
constexpr double a21 = 1.0 / 5;
constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561, a54 = -212.0 / 729;
constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247, a64 = 49.0 / 176, a65 = -5103.0 / 18656;
constexpr double b1 = 35.0 / 384, b3 = 500.0 / 1113, b4 = 125.0 / 192, b5 = -2187.0 / 6784, b6 = 11.0 / 84;
constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920, e5 = -17253.0 / 339200, e6 = 22.0 / 525, e7 = -1.0 / 40;

}  // namespace

void integrate_adaptive(
    const std::function<void(double, std::span<const double>, std::span<double>)>& rhs,
    double& t, std::vector<double>& y, double t_end, const OdeControl& ctrl,
    const std::function<bool(double, double, const std::vector<double>&)>& on_accept) {
  const std::size_t n = y.size();
  if (t >= t_end) return;
  std::vector<double> k1(n), k2(n), k3(n), k4(n), k5(n), k6(n), k7(n), yt(n), ynew(n);

  rhs(t, y, k1);
  double h = std::min({(t_end - t), ctrl.max_step, 1e-4});
  // Crude initial step from the first derivative scale.
  double d0 = 0, d1 = 0;
  for (std::size_t i = 0; i < n; ++i) {
    d0 = std::max(d0, std::fabs(y[i]));
    d1 = std::max(d1, std::fabs(k1[i]));
  }
  if (d1 > 0) h = std::min(h, 0.01 * (d0 + ctrl.atol) / d1 + ctrl.atol);

  double err_prev = 1.0;
  int rejects = 0;
  while (t < t_end) {
    h = std::min(h, t_end - t);
    auto stage = [&](double frac, std::span<const double> coeffs,
                     const std::vector<std::vector<double>*>& ks, std::vector<double>& out) {
      for (std::size_t i = 0; i < n; ++i) {
        double acc = y[i];
        for (std::size_t j = 0; j < ks.size(); ++j) acc += h * coeffs[j] * (*ks[j])[i];
        yt[i] = acc;
      }
      rhs(t + frac * h, yt, out);
    };
    const double s2[] = {a21};
    const double s3[] = {a31, a32};
    const double s4[] = {a41, a42, a43};
    const double s5[] = {a51, a52, a53, a54};
    const double s6[] = {a61, a62, a63, a64, a65};
    stage(c2, s2, {&k1}, k2);
    stage(c3, s3, {&k1, &k2}, k3);
    stage(c4, s4, {&k1, &k2, &k3}, k4);
    stage(c5, s5, {&k1, &k2, &k3, &k4}, k5);
    stage(1.0, s6, {&k1, &k2, &k3, &k4, &k5}, k6);
    for (std::size_t i = 0; i < n; ++i)
      ynew[i] = y[i] + h * (b1 * k1[i] + b3 * k3[i] + b4 * k4[i] + b5 * k5[i] + b6 * k6[i]);
    rhs(t + h, ynew, k7);

    double err = 0;
    for (std::size_t i = 0; i < n; ++i) {
      double ei = h * (e1 * k1[i] + e3 * k3[i] + e4 * k4[i] + e5 * k5[i] + e6 * k6[i] + e7 * k7[i]);
      double sc = ctrl.atol + ctrl.rtol * std::max(std::fabs(y[i]), std::fabs(ynew[i]));
      err = std::max(err, std::fabs(ei) / sc);
    }

    if (err <= 1.0) {
      double t_prev = t;
      t += h;
      std::swap(y, ynew);
      std::swap(k1, k7);  // FSAL
      if (on_accept && !on_accept(t_prev, t, y)) return;
      double fac = 0.9 * std::pow(err > 1e-12 ? err : 1e-12, -0.7 / 5.0) *
                   std::pow(err_prev, 0.4 / 5.0);
      fac = std::clamp(fac, 0.2, 6.0);
      h = std::min(h * fac, ctrl.max_step);
      err_prev = std::max(err, 1e-12);
      rejects = 0;
    } else {
      h *= std::max(0.2, 0.9 * std::pow(err, -0.2));
      if (++rejects > 60) throw SolverError("integrate_adaptive: step size collapse");
      rhs(t, y, k1);  // restore FSAL slot after swap-less reject
    }
  }
}

}  // namespace facetflow
