#include "facetflow/regularized.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace facetflow {

GridField GridField::sample(const Profile& p, int n) {
  if (n < 16) throw ConfigError("grid field: n must be at least 16");
  GridField f;
  f.n = n;
  f.values.resize(n);
  for (int j = 0; j < n; ++j) {
    double s = kTwoPi * double(j) / double(n);
    f.values[j] = p.w(s) - 0.5 * s * s;
  }
  return f;
}

RegularizedSolver::RegularizedSolver(const AnisotropyJ& J, SolverParams params)
    : params_(params), Jeps_(J, params.epsilon) {
  if (!(params_.dt > 0)) throw ConfigError("regularized solver: dt must be positive");
  if (params_.theta < 0.5 || params_.theta > 1.0)
    throw ConfigError("regularized solver: theta must lie in [1/2, 1]");
}

namespace {

// Conservative flux divergence F(Lambda)_j = (dJ(phi_{j+1/2}) - dJ(phi_{j-1/2}))/ds.
// The staggered phi values climb by 2*pi over one turn, so the flux entering
// cell 0 is evaluated at the pulled-back angle phi_{n-1/2} - 2*pi.
void flux_divergence(const RegularizedJ& Jeps, const GridField& f,
                     std::vector<double>& out) {
  const int n = f.n;
  const double ds = f.ds();
  static thread_local std::vector<double> flux;
  flux.resize(n);
  for (int j = 0; j < n; ++j) flux[j] = Jeps.d1(f.phi_half(j));
  const double wrap_flux = Jeps.d1(f.phi_half(n - 1) - kTwoPi);
  for (int j = 0; j < n; ++j) {
    double left = (j == 0) ? wrap_flux : flux[j - 1];
    out[j] = (flux[j] - left) / ds;
  }
}

}  // namespace

void RegularizedSolver::single_step(GridField& f, double dt, int depth) const {
  const int n = f.n;
  const double ds = f.ds();
  const double th = params_.theta;

  std::vector<double> expl(n);
  flux_divergence(Jeps_, f, expl);

  GridField next = f;
  std::vector<double> resid(n), divnew(n), lower(n), diag(n), upper(n);
  GridField trial = f;
  std::vector<double> resid_trial(n);
  auto residual_of = [&](const GridField& g, std::vector<double>& r) {
    flux_divergence(Jeps_, g, divnew);
    double rmax = 0;
    for (int j = 0; j < n; ++j) {
      r[j] = g.values[j] - f.values[j] - dt * (th * divnew[j] + (1 - th) * expl[j]);
      rmax = std::max(rmax, std::fabs(r[j]));
    }
    return rmax;
  };
  bool converged = false;
  double rmax = residual_of(next, resid);
  const double tol = params_.newton_tol * std::max(1.0, std::fabs(f.values[0]));
  for (int it = 0; it < params_.max_iter && !converged; ++it) {
    if (rmax <= tol) {
      converged = true;
      break;
    }
    // Newton matrix: I - dt*theta * D_-(a D_+), a = J_eps'' at the iterate.
    const double c = dt * th / (ds * ds);
    for (int j = 0; j < n; ++j) {
      double a_right = Jeps_.d2(next.phi_half(j));
      double a_left = Jeps_.d2(next.phi_half((j + n - 1) % n));
      diag[j] = 1.0 + c * (a_left + a_right);
      upper[j] = -c * a_right;
      lower[j] = -c * a_left;
    }
    std::vector<double> delta = solve_cyclic_tridiagonal(lower, diag, upper, resid);
    // Damped update: the coefficient varies on the mollification scale, so a
    // full step can overshoot its host cell badly.
    double step = 1.0;
    for (int ls = 0; ls < 40; ++ls) {
      for (int j = 0; j < n; ++j) trial.values[j] = next.values[j] - step * delta[j];
      double rtrial = residual_of(trial, resid_trial);
      if (rtrial < rmax * (1.0 - 1e-4 * step) || rtrial <= tol) {
        next.values.swap(trial.values);
        resid.swap(resid_trial);
        rmax = rtrial;
        break;
      }
      step *= 0.5;
      if (ls == 39) rmax = std::numeric_limits<double>::infinity();
    }
    if (!std::isfinite(rmax)) break;
  }
  if (rmax <= tol) converged = true;
  if (!converged) {
    if (depth >= 10) {
      std::ostringstream os;
      os << "regularized solver: Newton stalled at t=" << f.t << " after 10 dt halvings";
      throw SolverError(os.str());
    }
    single_step(f, 0.5 * dt, depth + 1);
    single_step(f, 0.5 * dt, depth + 1);
    return;
  }
  double diss = 0;
  for (int j = 0; j < n; ++j) {
    double rate = (next.values[j] - f.values[j]) / dt;
    diss += rate * rate * ds;
  }
  dissipation_ += diss * dt;
  next.t = f.t + dt;
  f = std::move(next);
}

void RegularizedSolver::step(GridField& f) const { single_step(f, params_.dt, 0); }

void RegularizedSolver::run(GridField& f, double t_end) const {
  while (f.t < t_end - 1e-15) {
    double dt = std::min(params_.dt, t_end - f.t);
    single_step(f, dt, 0);
  }
}

Observables RegularizedSolver::observables(const GridField& f) const {
  Observables o;
  const int n = f.n;
  const double ds = f.ds();
  // Window extremes of the staggered slope values. The reading is tied to
  // the coordinate cut at s = 0: once facet structure crosses the cut these
  // bounds pick up lifted copies and lose their invariance.
  double prev = f.phi_half(n - 1) - kTwoPi;
  o.phi_min = o.phi_max = f.phi_half(0);
  for (int j = 0; j < n; ++j) {
    double v = f.phi_half(j);
    o.tv += std::fabs(v - prev);
    o.phi_min = std::min(o.phi_min, v);
    o.phi_max = std::max(o.phi_max, v);
    o.energy += Jeps_.value(v) * ds;
    prev = v;
  }
  return o;
}

std::string RegularizedSolver::resolution_warning(int n) const {
  double needed = 16.0 * kTwoPi / params_.epsilon;
  if (double(n) >= needed) return {};
  std::ostringstream os;
  os << "under-resolved mollified corners: n=" << n << " below " << needed
     << " for epsilon=" << params_.epsilon;
  return os.str();
}

std::vector<double> contraction_history(const RegularizedSolver& solver, GridField a,
                                        GridField b, int steps) {
  if (a.n != b.n) throw ConfigError("contraction check: mismatched grids");
  std::vector<double> hist;
  auto dist = [&]() {
    double acc = 0;
    for (int j = 0; j < a.n; ++j) {
      double d = a.values[j] - b.values[j];
      acc += d * d;
    }
    return std::sqrt(acc * a.ds());
  };
  hist.push_back(dist());
  for (int k = 0; k < steps; ++k) {
    solver.step(a);
    solver.step(b);
    hist.push_back(dist());
  }
  return hist;
}

double GridXi::measure(double ds) const {
  double total = 0;
  for (const Run& r : runs) total += double(r.end - r.begin) * ds;
  return total;
}

GridXi detect_grid_xi(const std::vector<double>& phi, const AnisotropyJ& J,
                      double value_tol, int merge_cells) {
  GridXi xi;
  const int n = int(phi.size());
  xi.n = n;
  std::vector<int> corner_of(n, -1);
  for (int j = 0; j < n; ++j) {
    if (auto hit = J.corner_near(phi[j], value_tol)) corner_of[j] = hit->index;
  }
  // Cyclic runs per corner index, merging gaps of at most merge_cells cells.
  std::vector<bool> used(n, false);
  for (int j = 0; j < n; ++j) {
    if (corner_of[j] < 0 || used[j]) continue;
    int c = corner_of[j];
    int begin = j, end = j + 1;
    used[j] = true;
    // extend forward
    int gap = 0, k = j + 1;
    while (k < begin + n) {
      int kk = k % n;
      if (used[kk]) break;
      if (corner_of[kk] == c) {
        for (int m = end; m <= k; ++m) used[m % n] = true;
        end = k + 1;
        gap = 0;
      } else if (corner_of[kk] < 0 && gap < merge_cells) {
        ++gap;
      } else {
        break;
      }
      ++k;
    }
    // extend backward (only matters for the run containing cell 0 wrap)
    gap = 0;
    k = begin - 1;
    while (k > end - n) {
      int kk = (k % n + n) % n;
      if (used[kk]) break;
      if (corner_of[kk] == c) {
        for (int m = k; m < begin; ++m) used[(m % n + n) % n] = true;
        begin = k;
        gap = 0;
      } else if (corner_of[kk] < 0 && gap < merge_cells) {
        ++gap;
      } else {
        break;
      }
      --k;
    }
    xi.runs.push_back(GridXi::Run{(begin % n + n) % n,
                                  (begin % n + n) % n + (end - begin), c});
  }
  std::sort(xi.runs.begin(), xi.runs.end(),
            [](const GridXi::Run& a, const GridXi::Run& b) { return a.begin < b.begin; });
  return xi;
}

}  // namespace facetflow
