#include "facetflow/tracker.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace facetflow {

namespace {
constexpr double kPosTol = 1e-12;
constexpr double kEventTol = 1e-9;
constexpr double kSeedTime = 1e-9;

double reduce_pos(double x, long& k) {
  k = long(std::floor(x / kTwoPi));
  double r = x - kTwoPi * double(k);
  if (r < 0) {
    r += kTwoPi;
    --k;
  } else if (r >= kTwoPi) {
    r -= kTwoPi;
    ++k;
  }
  return r;
}

void set_low(Segment& s, double v) {
  s.lo = v;
  if (!s.x.empty()) s.x.front() = v;
}

void set_high(Segment& s, double v) {
  s.hi = v;
  if (!s.x.empty()) s.x.back() = v;
}

// Line of a facet shifted by tau, lifted by whole periods: w = slope*x + c + tau.
// The cover rule w(x + L) = w(x) + L*x + L^2/2 (L = 2*pi*k) gives the lifted
// slope alpha + L and intercept c0 - L*alpha_... - L^2/2.
struct Line {
  double slope = 0;
  double c = 0;  // intercept including tau
};

Line facet_line(const FacetState& f, double lift) {
  double c0 = f.anchor_w_plus - f.alpha * f.a_plus;
  return Line{f.alpha + lift, c0 - lift * f.alpha - 0.5 * lift * lift + f.tau};
}

double line_junction(const Line& a, const Line& b) {
  return (a.c - b.c) / (b.slope - a.slope);
}

struct SideWalk {
  double position = 0;
  double integral = 0;  // integral of the offset from the anchor over theta
};

// Closed-form walk of one facet endpoint to shift magnitude theta.
// sgn is +1 for rising facets (tau >= 0) and -1 for falling ones; dir is the
// spatial walk direction (+1 right endpoint, -1 left endpoint).
SideWalk walk_side(const PiecewiseW& w0, double anchor, double alpha, double sgn,
                   int dir, double theta) {
  SideWalk out;
  double entry = anchor;
  double base_theta = 0;
  double offset = 0;
  for (int hops = 0; hops < 100000; ++hops) {
    long lift;
    int idx = (dir > 0) ? w0.piece_after(entry, lift) : w0.piece_before(entry, lift);
    const WPiece& pc = w0.pieces()[idx];
    double far = ((dir > 0) ? pc.x1 : pc.x0) + kTwoPi * double(lift);
    double L = std::fabs(far - entry);
    double phi_e = ((dir > 0) ? w0.phi_after(entry) : w0.phi_before(entry));
    double B = std::max(0.0, sgn * double(dir) * (phi_e - alpha));
    double M = sgn * pc.slope;
    double theta_exit = base_theta + B * L + 0.5 * M * L * L;
    bool last = theta <= theta_exit;
    double theta_b = last ? theta : theta_exit;
    double dth = std::max(0.0, theta_b - base_theta);
    double u_b = 0, seg_int = 0;
    if (dth > 0) {
      if (std::fabs(M) < 1e-14) {
        if (B <= 0) throw SolverError("facet walk: flat piece with zero drive");
        u_b = dth / B;
        seg_int = 0.5 * dth * dth / B;
      } else {
        double Da = B * B;
        double Db = std::max(0.0, B * B + 2.0 * M * dth);
        u_b = (-B + std::sqrt(Db)) / M;
        seg_int = (-B * dth + (std::pow(Db, 1.5) - std::pow(Da, 1.5)) / (3.0 * M)) / M;
      }
    }
    out.integral += offset * dth + seg_int;
    if (last) {
      out.position = entry + double(dir) * u_b;
      return out;
    }
    offset += L;
    entry = far;
    base_theta = theta_exit;
    if (std::fabs(entry - anchor) > 2.5 * kTwoPi)
      throw SolverError("facet walk: runaway endpoint");
  }
  throw SolverError("facet walk: did not terminate");
}

}  // namespace

double liapunov_value(const std::vector<double>& gaps, double d_omega) {
  double acc = 0;
  for (double g : gaps) acc += std::log(g);
  return d_omega * acc;
}

double liapunov_deviation(const std::vector<double>& gaps, double d_omega) {
  // Equal gaps maximize sum(log g) at fixed total length, so this quantity is
  // nonnegative and vanishes exactly at the equal-gap state.
  const double n = double(gaps.size());
  double total = 0;
  for (double g : gaps) total += g;
  double mean = total / n;
  double acc = 0;
  for (double g : gaps) acc += std::log1p((g - mean) / mean);
  return -d_omega * acc;
}

Tracker::Tracker(const Profile& p0, const AnisotropyJ& J) : J_(J) {
  if (!J_.is_square())
    throw ConfigError("tracker: only the square anisotropy is supported");
  auto bad = p0.validate(J_);
  if (!bad.empty()) throw ConfigError("tracker: invalid initial profile: " + bad.front());
  w0_ = PiecewiseW(p0);
  detect(p0, true);
  n_sequence_.push_back(int(facets_.size()));
  t_sequence_.push_back(0.0);
  jr_norm_last_ = p0.jr_norm(J_);
  seed_singular_groups();
  check_full_faceting();
  update_asymptotic_state(time_, time_);
}

int Tracker::facet_pos(int id) const {
  for (int i = 0; i < int(facets_.size()); ++i)
    if (facets_[i].id == id) return i;
  return -1;
}

// ---------------------------------------------------------------------------
// Roots against the frozen profile.

double Tracker::shift_root(double start, double w_start, double alpha, double tau,
                           int dir, double guard) const {
  auto F = [&](double x) { return w0_.w(x) - w_start - alpha * (x - start); };
  double p = start;
  double Fp = F(p);
  for (int hops = 0; hops < 100000; ++hops) {
    long lift;
    int idx = (dir > 0) ? w0_.piece_after(p, lift) : w0_.piece_before(p, lift);
    const WPiece& pc = w0_.pieces()[idx];
    double far = ((dir > 0) ? pc.x1 : pc.x0) + kTwoPi * double(lift);
    bool clipped = false;
    if ((dir > 0 && far > guard) || (dir < 0 && far < guard)) {
      far = guard;
      clipped = true;
    }
    double Ffar = F(far);
    if ((Fp - tau) * (Ffar - tau) <= 0.0) {
      double phi_p = (dir > 0) ? w0_.phi_after(p) : w0_.phi_before(p);
      double B = phi_p - alpha;
      double M = pc.slope;
      double span = far - p;
      double d;
      if (std::fabs(M) < 1e-14) {
        d = (std::fabs(B) < 1e-14) ? span : (tau - Fp) / B;
      } else {
        double disc = std::max(0.0, B * B + 2.0 * M * (tau - Fp));
        double r = std::sqrt(disc);
        double d1 = (-B + r) / M, d2 = (-B - r) / M;
        auto in_range = [&](double dd) {
          return (span >= 0) ? (dd >= -1e-10 && dd <= span + 1e-10)
                             : (dd <= 1e-10 && dd >= span - 1e-10);
        };
        if (in_range(d1) && in_range(d2))
          d = (std::fabs(d1) <= std::fabs(d2)) ? d1 : d2;
        else if (in_range(d1))
          d = d1;
        else
          d = d2;
      }
      double x = p + d;
      double xlo = std::min(p, far), xhi = std::max(p, far);
      x = std::clamp(x, xlo, xhi);
      for (int it = 0; it < 3; ++it) {
        double fx = F(x) - tau;
        double dphi = (dir > 0) ? w0_.phi_after(std::clamp(x, xlo, xhi))
                                : w0_.phi_before(std::clamp(x, xlo, xhi));
        double der = dphi - alpha;
        if (std::fabs(der) < 1e-13) break;
        x = std::clamp(x - fx / der, xlo, xhi);
      }
      return x;
    }
    if (clipped)
      throw SolverError("shift root: target shift outside the reachable image");
    p = far;
    Fp = Ffar;
  }
  throw SolverError("shift root: walk did not terminate");
}

double Tracker::iso_G(const FacetState& f, double theta) const {
  double sgn = (f.d_omega() >= 0) ? 1.0 : -1.0;
  SideWalk plus = walk_side(w0_, f.a_plus, f.alpha, sgn, +1, theta);
  SideWalk minus = walk_side(w0_, f.a_minus, f.alpha, sgn, -1, theta);
  return (f.a_plus - f.a_minus) * theta + plus.integral + minus.integral;
}

double Tracker::isolated_tau_at(int facet_index, double dt_from_epoch) const {
  const FacetState& f = facets_[facet_index];
  if (f.curvature == Curvature::zero || dt_from_epoch <= 0) return 0.0;
  double target = std::fabs(f.d_omega()) * dt_from_epoch;
  double hi = 1e-6;
  for (int it = 0; iso_G(f, hi) < target; ++it) {
    hi *= 2;
    if (it > 80) throw SolverError("isolated facet: shift bracket failed");
  }
  double theta = brent_root([&](double th) { return iso_G(f, th) - target; }, 0.0, hi,
                            1e-15 * (1.0 + hi));
  double sgn = (f.d_omega() >= 0) ? 1.0 : -1.0;
  return sgn * theta;
}

std::pair<double, double> Tracker::endpoints_at_tau(int facet_index, double tau) const {
  const FacetState& f = facets_[facet_index];
  int n = int(facets_.size());
  const FacetState& right = facets_[(facet_index + 1) % n];
  const FacetState& left = facets_[(facet_index + n - 1) % n];
  double guard_r = (facet_index + 1 < n) ? right.xi_minus : right.xi_minus + kTwoPi;
  double guard_l = (facet_index > 0) ? left.xi_plus : left.xi_plus - kTwoPi;
  double xp = shift_root(f.a_plus, w0_.w(f.a_plus), f.alpha, tau, +1, guard_r + 1e-9);
  double xm = shift_root(f.a_minus, w0_.w(f.a_minus), f.alpha, tau, -1, guard_l - 1e-9);
  return {xm, xp};
}

// ---------------------------------------------------------------------------
// Facet detection from a profile.

void Tracker::detect(const Profile& p, bool initial) {
  auto comps = p.xi_components(J_);
  if (comps.empty())
    throw ConfigError("tracker: datum has no facet seeds; nothing to evolve");

  // Coincident degenerate components are ordered along the jump direction of
  // the derivative at the shared point; regular facets beginning there last.
  std::vector<XiComponent> ordered = comps;
  std::size_t i = 0;
  while (i < ordered.size()) {
    std::size_t j = i;
    while (j + 1 < ordered.size() &&
           std::fabs(ordered[j + 1].lo - ordered[i].lo) <= kPosTol)
      ++j;
    if (j > i) {
      double s = ordered[i].lo;
      double before = (s <= kPosTol) ? p.phi_before(kTwoPi) - kTwoPi : p.phi_before(s);
      double after = p.phi_after(std::min(s, kTwoPi - 1e-15));
      bool ascending = after >= before;
      std::sort(ordered.begin() + i, ordered.begin() + j + 1,
                [&](const XiComponent& a, const XiComponent& b) {
                  if (a.degenerate() != b.degenerate()) return a.degenerate();
                  return ascending ? a.alpha < b.alpha : a.alpha > b.alpha;
                });
    }
    i = j + 1;
  }

  std::vector<FacetState> fresh;
  for (const XiComponent& c : ordered) {
    FacetState f;
    f.id = -1;
    f.alpha = c.alpha;
    f.corner_index = c.corner_index;
    f.corner_period = c.corner_period;
    f.xi_minus = f.a_minus = c.lo;
    f.xi_plus = f.a_plus = std::max(c.lo, c.hi);
    f.anchor_w_plus = w0_.w(f.a_plus);
    fresh.push_back(f);
  }

  auto relink = [&](std::vector<FacetState>& v) {
    const int m = int(v.size());
    for (int k = 0; k < m; ++k) {
      FacetState& a = v[k];
      FacetState& b = v[(k + 1) % m];
      double gap =
          (k + 1 < m) ? b.xi_minus - a.xi_plus : b.xi_minus + kTwoPi - a.xi_plus;
      a.linked_right = std::fabs(gap) <= kEventTol && m > 1;
      b.linked_left = a.linked_right;
    }
  };
  relink(fresh);

  auto classify = [&](std::vector<FacetState>& v) {
    const int m = int(v.size());
    for (int k = 0; k < m; ++k) {
      FacetState& f = v[k];
      bool below_left, below_right;
      if (f.linked_left) {
        const FacetState& prev = v[(k + m - 1) % m];
        double pa = (k == 0) ? prev.alpha - kTwoPi : prev.alpha;
        below_left = pa < f.alpha;
      } else {
        double val = w0_.phi_before(f.xi_minus);
        if (std::fabs(val - f.alpha) > kEventTol) {
          below_left = val < f.alpha;
        } else {
          long lift;
          int idx = w0_.piece_before(f.xi_minus, lift);
          below_left = w0_.pieces()[idx].slope > 0;
        }
      }
      if (f.linked_right) {
        const FacetState& next = v[(k + 1) % m];
        double na = (k + 1 == m) ? next.alpha + kTwoPi : next.alpha;
        below_right = na < f.alpha;
      } else {
        double val = w0_.phi_after(f.xi_plus);
        if (std::fabs(val - f.alpha) > kEventTol) {
          below_right = val < f.alpha;
        } else {
          long lift;
          int idx = w0_.piece_after(f.xi_plus, lift);
          below_right = w0_.pieces()[idx].slope < 0;
        }
      }
      if (below_left && !below_right)
        f.curvature = Curvature::convex;
      else if (!below_left && below_right)
        f.curvature = Curvature::concave;
      else
        f.curvature = Curvature::zero;
      auto hit = J_.corner_near(f.alpha, 1e-9);
      if (!hit) throw InvariantViolation("tracker: facet slope off the corner set");
      SlopeInterval sub = J_.subdifferential_at(*hit);
      f.omega_minus = below_left ? sub.lo : sub.hi;
      f.omega_plus = below_right ? sub.lo : sub.hi;
    }
  };
  classify(fresh);

  if (initial) {
    // A degenerate facet sharing its point with a regular facet either
    // freezes (frozen neighbor) or is overrun instantly and dropped.
    std::vector<FacetState> kept;
    for (int k = 0; k < int(fresh.size()); ++k) {
      FacetState& f = fresh[k];
      const int m = int(fresh.size());
      bool drop = false;
      if (f.length() <= kPosTol && (f.linked_left || f.linked_right)) {
        int nb = f.linked_right ? (k + 1) % m : (k + m - 1) % m;
        const FacetState& r = fresh[nb];
        if (r.length() > kPosTol) {
          if (r.curvature == Curvature::zero) {
            f.curvature = Curvature::zero;
            f.omega_plus = f.omega_minus;
          } else {
            drop = true;
            EventRecord ev;
            ev.time = 0;
            ev.kind = EventRecord::Kind::discard;
            ev.note = "degenerate facet overrun by a moving neighbor";
            events_.push_back(ev);
          }
        }
      }
      if (!drop) kept.push_back(f);
    }
    fresh = std::move(kept);
    relink(fresh);
    classify(fresh);
  }

  // Stable ids across epochs by positional overlap.
  std::vector<FacetState> previous = std::move(facets_);
  facets_ = std::move(fresh);
  for (FacetState& f : facets_) {
    int match = -1;
    for (const FacetState& old : previous) {
      if (old.corner_index != f.corner_index) continue;
      for (double shift : {0.0, kTwoPi, -kTwoPi}) {
        double lo = std::max(f.xi_minus + shift, old.xi_minus) - 1e-9;
        double hi = std::min(f.xi_plus + shift, old.xi_plus) + 1e-9;
        if (hi >= lo && (match < 0 || old.id < match)) match = old.id;
      }
    }
    f.id = (match >= 0) ? match : next_id_++;
  }
  for (const FacetState& f : facets_)
    if (f.curvature == Curvature::zero) saw_zero_curvature_ = true;

  rebuild_groups();

  if (!initial) {
    for (const FacetState& f : facets_)
      if (f.length() <= kPosTol && (f.linked_left || f.linked_right))
        throw InvariantViolation("tracker: degenerate interacting facet after t=0");
  }
}

void Tracker::rebuild_groups() {
  groups_.clear();
  const int n = int(facets_.size());
  if (n == 0) return;
  bool all_linked = n > 1;
  for (const FacetState& f : facets_) all_linked = all_linked && f.linked_right;
  if (all_linked) {
    Group g;
    g.cyclic = true;
    for (int i = 0; i < n; ++i) g.members.push_back(i);
    groups_.push_back(std::move(g));
    return;
  }
  std::vector<bool> seen(n, false);
  for (int start = 0; start < n; ++start) {
    if (seen[start] || facets_[start].linked_left) continue;
    Group g;
    int i = start;
    while (true) {
      g.members.push_back(i);
      seen[i] = true;
      if (!facets_[i].linked_right) break;
      i = (i + 1) % n;
    }
    groups_.push_back(std::move(g));
  }
  // Safety net: anything not visited becomes a singleton.
  for (int i = 0; i < n; ++i)
    if (!seen[i]) groups_.push_back(Group{{i}, false});
}

// ---------------------------------------------------------------------------
// Group kinematics.

std::vector<double> Tracker::pack_tau() const {
  std::vector<double> out;
  for (const Group& g : groups_)
    if (g.members.size() >= 2)
      for (int m : g.members) out.push_back(facets_[m].tau);
  return out;
}

void Tracker::unpack_tau(const std::vector<double>& tau) {
  std::size_t k = 0;
  for (const Group& g : groups_)
    if (g.members.size() >= 2)
      for (int m : g.members) facets_[m].tau = tau[k++];
}

void Tracker::group_geometry(const Group& g, const std::vector<double>& tau_members,
                             std::vector<double>& xm, std::vector<double>& xp) const {
  const int m = int(g.members.size());
  xm.assign(m, 0.0);
  xp.assign(m, 0.0);
  std::vector<double> lift(m, 0.0);
  std::vector<Line> lines(m);
  for (int idx = 0; idx < m; ++idx) {
    if (idx > 0)
      lift[idx] = lift[idx - 1] + (g.members[idx] < g.members[idx - 1] ? kTwoPi : 0.0);
    FacetState f = facets_[g.members[idx]];
    f.tau = tau_members[idx];
    lines[idx] = facet_line(f, lift[idx]);
  }
  for (int idx = 0; idx + 1 < m; ++idx) {
    double x = line_junction(lines[idx], lines[idx + 1]);
    xp[idx] = x;
    xm[idx + 1] = x;
  }
  if (g.cyclic) {
    FacetState f0 = facets_[g.members[0]];
    f0.tau = tau_members[0];
    Line first_up = facet_line(f0, lift[m - 1] + kTwoPi);
    double x = line_junction(lines[m - 1], first_up);
    xp[m - 1] = x;
    xm[0] = x - (lift[m - 1] + kTwoPi);
    for (int idx = 1; idx < m; ++idx) xm[idx] -= lift[idx];
    for (int idx = 0; idx < m - 1; ++idx) xp[idx] -= lift[idx];
    xp[m - 1] -= lift[m - 1];
    return;
  }
  {
    const FacetState& lo = facets_[g.members[0]];
    if (lo.curvature == Curvature::zero) {
      xm[0] = lo.a_minus;
    } else {
      xm[0] = shift_root(lo.a_minus, w0_.w(lo.a_minus), lo.alpha, tau_members[0], -1,
                         lo.a_minus - kTwoPi);
    }
    const FacetState& hi = facets_[g.members[m - 1]];
    if (hi.curvature == Curvature::zero) {
      xp[m - 1] = hi.a_plus + lift[m - 1];
    } else {
      // Solve against the lifted line, then positions come back shifted.
      double L = lift[m - 1];
      double start = hi.a_plus + L;
      double wl = w0_.w(start);
      xp[m - 1] = shift_root(start, wl, hi.alpha + L, tau_members[m - 1], +1,
                             start + kTwoPi);
    }
    for (int idx = 0; idx < m; ++idx) {
      if (idx > 0) xm[idx] -= lift[idx];
      if (idx + 1 < m) xp[idx] -= lift[idx];
    }
    xp[m - 1] -= lift[m - 1];
  }
}

void Tracker::group_rhs(const std::vector<double>& tau, std::vector<double>& dtau) const {
  std::size_t k = 0;
  std::vector<double> xm, xp, tg;
  for (const Group& g : groups_) {
    if (g.members.size() < 2) continue;
    const int m = int(g.members.size());
    tg.assign(tau.begin() + k, tau.begin() + k + m);
    group_geometry(g, tg, xm, xp);
    for (int idx = 0; idx < m; ++idx) {
      const FacetState& f = facets_[g.members[idx]];
      double len = xp[idx] - xm[idx];
      if (f.curvature == Curvature::zero) {
        dtau[k + idx] = 0.0;
      } else {
        if (len < 1e-8)
          throw InvariantViolation(
              "tracker: non-zero-curvature facet degenerated inside a group");
        dtau[k + idx] = f.d_omega() / len;
      }
    }
    k += m;
  }
}

void Tracker::set_positions_at(double t) {
  for (const Group& g : groups_) {
    if (g.members.size() >= 2) continue;
    FacetState& f = facets_[g.members.front()];
    if (f.curvature == Curvature::zero) {
      f.tau = 0;
      f.xi_minus = f.a_minus;
      f.xi_plus = f.a_plus;
      continue;
    }
    f.tau = isolated_tau_at(g.members.front(), t - epoch_start_);
    double sgn = (f.d_omega() >= 0) ? 1.0 : -1.0;
    f.xi_plus = walk_side(w0_, f.a_plus, f.alpha, sgn, +1, sgn * f.tau).position;
    f.xi_minus = walk_side(w0_, f.a_minus, f.alpha, sgn, -1, sgn * f.tau).position;
  }
}

void Tracker::refresh_positions() {
  std::vector<double> tau = pack_tau();
  std::size_t k = 0;
  std::vector<double> xm, xp, tg;
  for (const Group& g : groups_) {
    if (g.members.size() < 2) continue;
    const int m = int(g.members.size());
    tg.assign(tau.begin() + k, tau.begin() + k + m);
    group_geometry(g, tg, xm, xp);
    for (int idx = 0; idx < m; ++idx) {
      facets_[g.members[idx]].xi_minus = xm[idx];
      facets_[g.members[idx]].xi_plus = xp[idx];
    }
    k += m;
  }
}

// ---------------------------------------------------------------------------
// Watches: inter-facet gaps and in-group zero-curvature facet lengths.

std::vector<double> Tracker::watch_values() const {
  const int n = int(facets_.size());
  std::vector<double> vals;
  for (int i = 0; i < n; ++i) {
    const FacetState& f = facets_[i];
    if (!f.linked_right && n > 0) {
      const FacetState& nx = facets_[(i + 1) % n];
      double gap = (i + 1 < n) ? nx.xi_minus - f.xi_plus
                               : nx.xi_minus + kTwoPi - f.xi_plus;
      if (n == 1) gap = f.xi_minus + kTwoPi - f.xi_plus;
      vals.push_back(gap);
    }
    if (f.curvature == Curvature::zero && (f.linked_left || f.linked_right) &&
        f.length() > 0)
      vals.push_back(f.length());
  }
  return vals;
}

double Tracker::min_watch_at(double t, const std::vector<double>& tau_packed) {
  // Mutating evaluation used inside event bisection; restores nothing.
  if (!tau_packed.empty()) unpack_tau(tau_packed);
  set_positions_at(t);
  refresh_positions();
  time_ = t;
  auto vals = watch_values();
  double mn = std::numeric_limits<double>::infinity();
  for (double v : vals) mn = std::min(mn, v);
  return mn;
}

// ---------------------------------------------------------------------------
// Time stepping.

void Tracker::plain_advance(double t) {
  if (t <= time_) return;
  std::vector<double> tau = pack_tau();
  if (!tau.empty()) {
    OdeControl ctrl;
    ctrl.rtol = 1e-10;
    ctrl.atol = 1e-13;
    double tt = time_;
    integrate_adaptive(
        [&](double, std::span<const double> y, std::span<double> dy) {
          std::vector<double> yv(y.begin(), y.end());
          std::vector<double> dv(yv.size());
          group_rhs(yv, dv);
          std::copy(dv.begin(), dv.end(), dy.begin());
        },
        tt, tau, t, ctrl,
        [&](double t_prev, double t_now, const std::vector<double>& y) {
          unpack_tau(y);
          set_positions_at(t_now);
          refresh_positions();
          time_ = t_now;
          update_asymptotic_state(t_prev, t_now);
          if (monitor_) monitor_(t_now, *this);
          return true;
        });
    unpack_tau(tau);
  }
  set_positions_at(t);
  refresh_positions();
  time_ = t;
}

std::optional<double> Tracker::next_event_time(double horizon) {
  if (horizon <= time_) return std::nullopt;
  const double t_start = time_;
  const std::vector<double> tau_start = pack_tau();
  const std::vector<FacetState> facets_start = facets_;

  auto restore = [&]() {
    facets_ = facets_start;
    time_ = t_start;
  };

  if (tau_start.empty()) {
    // Fully closed-form motion: bracket each watch by direct evaluation.
    double v_end = min_watch_at(horizon, {});
    if (v_end > kEventTol) {
      restore();
      return std::nullopt;
    }
    if (v_end > 0.5 * kEventTol) {
      restore();
      return horizon;
    }
    double t_ev = brent_root(
        [&](double t) { return min_watch_at(t, {}) - 0.5 * kEventTol; }, t_start,
        horizon, 1e-12);
    restore();
    return t_ev;
  }

  // Integrate once, remembering the last state before a crossing.
  double t_prev_cp = t_start;
  std::vector<double> tau_prev_cp = tau_start;
  bool crossed = false;
  double t_lo = t_start, t_hi = horizon;
  {
    double tt = time_;
    std::vector<double> tau = tau_start;
    OdeControl ctrl;
    ctrl.rtol = 1e-10;
    ctrl.atol = 1e-13;
    try {
      integrate_adaptive(
          [&](double, std::span<const double> y, std::span<double> dy) {
            std::vector<double> yv(y.begin(), y.end());
            std::vector<double> dv(yv.size());
            group_rhs(yv, dv);
            std::copy(dv.begin(), dv.end(), dy.begin());
          },
          tt, tau, horizon, ctrl,
          [&](double t_prev, double t_now, const std::vector<double>& y) {
            double v = min_watch_at(t_now, y);
            if (v <= 0.5 * kEventTol) {
              crossed = true;
              t_lo = t_prev;
              t_hi = t_now;
              return false;
            }
            t_prev_cp = t_now;
            tau_prev_cp = y;
            return true;
          });
    } catch (const SolverError&) {
      // Step-size collapse right at a collision: fall back to bisection from
      // the last good checkpoint.
      crossed = true;
      t_lo = t_prev_cp;
      t_hi = horizon;
    }
  }
  if (!crossed) {
    restore();
    return std::nullopt;
  }

  // Bisection with re-integration from the checkpoint. A step-size collapse
  // inside the trial interval counts as being past the crossing.
  auto value_at = [&](double t) {
    facets_ = facets_start;
    time_ = t_prev_cp;
    unpack_tau(tau_prev_cp);
    if (t > t_prev_cp + 1e-15) {
      double tt = t_prev_cp;
      std::vector<double> tau = tau_prev_cp;
      OdeControl ctrl;
      ctrl.rtol = 1e-10;
      ctrl.atol = 1e-13;
      try {
        integrate_adaptive(
            [&](double, std::span<const double> y, std::span<double> dy) {
              std::vector<double> yv(y.begin(), y.end());
              std::vector<double> dv(yv.size());
              group_rhs(yv, dv);
              std::copy(dv.begin(), dv.end(), dy.begin());
            },
            tt, tau, t, ctrl, {});
      } catch (const SolverError&) {
        return -1.0;
      }
      return min_watch_at(t, tau);
    }
    return min_watch_at(t, tau_prev_cp);
  };
  double lo = std::max(t_lo, t_prev_cp);
  double v_lo = value_at(lo);
  if (v_lo <= 0.5 * kEventTol) {
    restore();
    return lo;
  }
  double t_ev = brent_root([&](double t) { return value_at(t) - 0.5 * kEventTol; }, lo,
                           t_hi, 1e-12);
  restore();
  return t_ev;
}

void Tracker::advance_to(double t) {
  int guard = 0;
  while (time_ < t - 1e-14) {
    if (++guard > 10000) throw SolverError("tracker: event cascade did not settle");
    std::optional<double> ev = next_event_time(t);
    if (!ev) {
      plain_advance(t);
      return;
    }
    plain_advance(*ev);
    apply_events_now();
    refreeze();
  }
}

void Tracker::apply_events_now() {
  const int n = int(facets_.size());
  // Collisions: unlinked adjacent pairs that have closed their gap.
  for (int i = 0; i < n; ++i) {
    FacetState& f = facets_[i];
    if (f.linked_right) continue;
    FacetState& nx = facets_[(i + 1) % n];
    double gap = (i + 1 < n) ? nx.xi_minus - f.xi_plus
                             : nx.xi_minus + kTwoPi - f.xi_plus;
    if (n == 1) gap = f.xi_minus + kTwoPi - f.xi_plus;
    if (gap <= kEventTol) {
      EventRecord ev;
      ev.time = time_;
      ev.kind = EventRecord::Kind::merge;
      ev.facet_ids = {f.id, nx.id};
      events_.push_back(ev);
      f.linked_right = true;
      nx.linked_left = true;
    }
  }
  // Zero-curvature extinctions inside groups.
  std::vector<FacetState> kept;
  bool removed = false;
  for (const FacetState& f : facets_) {
    bool dead = f.curvature == Curvature::zero && (f.linked_left || f.linked_right) &&
                f.length() <= kEventTol;
    if (dead) {
      EventRecord ev;
      ev.time = time_;
      ev.kind = EventRecord::Kind::zero_extinction;
      ev.facet_ids = {f.id};
      events_.push_back(ev);
      t_cx_ = time_;
      removed = true;
    } else {
      kept.push_back(f);
    }
  }
  if (removed) facets_ = std::move(kept);
}

Profile Tracker::snapshot_profile() const {
  std::vector<Segment> segs;
  const int n = int(facets_.size());

  auto emit_facet_part = [&](double lo, double hi, double alpha) {
    long k;
    double r = reduce_pos(lo, k);
    double len = std::max(0.0, hi - lo);
    double shift = kTwoPi * double(k);
    if (r + len <= kTwoPi + 1e-12) {
      segs.push_back(Segment::facet(r, std::min(r + len, kTwoPi), alpha - shift));
    } else {
      segs.push_back(Segment::facet(r, kTwoPi, alpha - shift));
      segs.push_back(Segment::facet(0.0, r + len - kTwoPi, alpha - shift - kTwoPi));
    }
  };
  for (const FacetState& f : facets_) emit_facet_part(f.xi_minus, f.xi_plus, f.alpha);

  // Smooth regions between consecutive facets are untouched background.
  struct RNode {
    double x, v_in, v_out;
  };
  for (int i = 0; i < n; ++i) {
    const FacetState& f = facets_[i];
    const FacetState& nx = facets_[(i + 1) % n];
    double P = f.xi_plus;
    double Q = (i + 1 < n) ? nx.xi_minus : nx.xi_minus + kTwoPi;
    if (n == 1) Q = f.xi_minus + kTwoPi;
    if (Q - P <= 1e-12) continue;

    std::vector<RNode> nodes;
    nodes.push_back({P, 0.0, w0_.phi_after(P)});
    double x = P;
    while (x < Q - 1e-12) {
      long lift;
      int idx = w0_.piece_after(x + 1e-13, lift);
      double far = std::min(Q, w0_.pieces()[idx].x1 + kTwoPi * double(lift));
      if (far <= x + 1e-13) {
        x += 1e-13;
        continue;
      }
      double vl = w0_.phi_before(far);
      double vr = (far < Q - 1e-12) ? w0_.phi_after(far) : vl;
      nodes.push_back({far, vl, vr});
      x = far;
    }
    // Explicit nodes at period boundaries crossed by the region.
    for (long kk = long(std::floor(P / kTwoPi)) + 1;
         kTwoPi * double(kk) < Q - 1e-12; ++kk) {
      double B = kTwoPi * double(kk);
      bool present = false;
      for (const RNode& nd : nodes)
        if (std::fabs(nd.x - B) <= 1e-12) present = true;
      if (present) continue;
      RNode nd{B, w0_.phi_before(B), w0_.phi_after(B)};
      nodes.insert(std::upper_bound(nodes.begin(), nodes.end(), nd,
                                    [](const RNode& a, const RNode& b) {
                                      return a.x < b.x;
                                    }),
                   nd);
    }

    // Assemble continuous runs, breaking at jumps and period boundaries.
    std::vector<double> sx, sv;
    long kcur = 0;
    auto flush = [&]() {
      if (sx.size() >= 2 && sx.back() > sx.front() + 1e-13)
        segs.push_back(Segment::smooth(sx, sv));
      sx.clear();
      sv.clear();
    };
    for (std::size_t q = 0; q < nodes.size(); ++q) {
      const RNode& nd = nodes[q];
      if (sx.empty()) {
        kcur = long(std::floor((nd.x + 1e-12) / kTwoPi));
        sx.push_back(nd.x - kTwoPi * double(kcur));
        sv.push_back(nd.v_out - kTwoPi * double(kcur));
        continue;
      }
      sx.push_back(nd.x - kTwoPi * double(kcur));
      sv.push_back(nd.v_in - kTwoPi * double(kcur));
      bool last = (q + 1 == nodes.size());
      bool jump = !last && std::fabs(nd.v_in - nd.v_out) > 1e-12;
      bool boundary = std::fabs(nd.x - kTwoPi * double(kcur + 1)) <= 1e-12;
      if (last) {
        flush();
      } else if (jump || boundary) {
        flush();
        kcur = long(std::floor((nd.x + 1e-12) / kTwoPi));
        sx.push_back(nd.x - kTwoPi * double(kcur));
        sv.push_back(nd.v_out - kTwoPi * double(kcur));
      }
    }
  }

  std::sort(segs.begin(), segs.end(),
            [](const Segment& a, const Segment& b) {
              if (a.lo != b.lo) return a.lo < b.lo;
              return a.hi < b.hi;
            });
  if (segs.empty()) throw InvariantViolation("tracker: empty snapshot");
  if (std::fabs(segs.front().lo) < 1e-9) set_low(segs.front(), 0.0);
  for (std::size_t q = 1; q < segs.size(); ++q)
    if (std::fabs(segs[q].lo - segs[q - 1].hi) < 1e-9) set_low(segs[q], segs[q - 1].hi);
  if (std::fabs(segs.back().hi - kTwoPi) < 1e-9) set_high(segs.back(), kTwoPi);
  return Profile(std::move(segs), eval_w(0.0));
}

void Tracker::refreeze() {
  Profile p = snapshot_profile();
  auto bad = p.validate(J_);
  if (!bad.empty())
    throw InvariantViolation("tracker: re-frozen profile invalid: " + bad.front());
  double jr_before = jr_norm_last_;
  w0_ = PiecewiseW(p);
  epoch_start_ = time_;
  for (FacetState& f : facets_) f.tau = 0;
  detect(p, false);
  n_sequence_.push_back(int(facets_.size()));
  t_sequence_.push_back(time_);
  jr_norm_last_ = p.jr_norm(J_);
  if (jr_before > 0 && jr_norm_last_ > jr_before + 1e-8)
    throw InvariantViolation("tracker: JR norm increased across an event");
  check_full_faceting();
  update_asymptotic_state(time_, time_);
}

void Tracker::check_full_faceting() {
  double covered = 0;
  for (const FacetState& f : facets_) covered += f.length();
  if (covered >= kTwoPi - 1e-9 && !std::isfinite(t_fa_)) {
    t_fa_ = time_;
    EventRecord ev;
    ev.time = time_;
    ev.kind = EventRecord::Kind::full_faceting;
    ev.n_after = int(facets_.size());
    events_.push_back(ev);
  }
}

std::vector<double> Tracker::cyclic_gaps() const {
  if (groups_.size() != 1 || !groups_.front().cyclic) return {};
  std::vector<double> gaps;
  for (int m : groups_.front().members) gaps.push_back(facets_[m].length());
  return gaps;
}

std::vector<double> Tracker::tau_rates() const {
  std::vector<double> rates(facets_.size(), 0.0);
  std::vector<double> tau = pack_tau();
  if (!tau.empty()) {
    std::vector<double> dtau(tau.size());
    group_rhs(tau, dtau);
    std::size_t k = 0;
    for (const Group& g : groups_) {
      if (g.members.size() < 2) continue;
      for (int m : g.members) rates[m] = dtau[k++];
    }
  }
  for (const Group& g : groups_) {
    if (g.members.size() >= 2) continue;
    const FacetState& f = facets_[g.members.front()];
    if (f.curvature != Curvature::zero && f.length() > 0)
      rates[g.members.front()] = f.d_omega() / f.length();
  }
  return rates;
}

void Tracker::update_asymptotic_state(double t_prev, double t_now) {
  auto gaps = cyclic_gaps();
  if (gaps.empty()) return;
  bool all_moving = true;
  for (const FacetState& f : facets_)
    if (f.curvature == Curvature::zero) all_moving = false;
  if (!all_moving) return;
  double target = std::fabs(facets_.front().d_omega());
  double dev = 0;
  for (double g : gaps) dev = std::max(dev, std::fabs(g - target));
  if (dev <= 1e-9 && !std::isfinite(t_1_)) {
    t_1_ = t_now;
    EventRecord ev;
    ev.time = t_now;
    ev.kind = EventRecord::Kind::asymptotic_entry;
    ev.n_after = int(facets_.size());
    events_.push_back(ev);
  }
  asymptotic_samples_.push_back({t_now, dev});
  if (asymptotic_samples_.size() > 256)
    asymptotic_samples_.erase(asymptotic_samples_.begin(),
                              asymptotic_samples_.begin() + 128);
  (void)t_prev;
}

double Tracker::eval_w(double x) const {
  for (const FacetState& f : facets_) {
    for (double shift : {0.0, kTwoPi, -kTwoPi}) {
      double y = x + shift;
      if (y >= f.xi_minus - 1e-12 && y <= f.xi_plus + 1e-12) {
        // Height at the reduced coordinate: pull the cover rule back.
        long k = long(std::llround(shift / kTwoPi));
        double line = f.line(y);
        return line - kTwoPi * double(k) * x - 2.0 * kPi * kPi * double(k) * double(k);
      }
    }
  }
  return w0_.w(x);
}

PwGraph Tracker::omega() const {
  // Piecewise-linear section over [0, 2*pi]: ramps on facets, gap slopes of
  // the frozen background elsewhere. Values pulled back by 2*pi per period.
  struct Ramp {
    double lo, hi, v0, v1;
  };
  std::vector<Ramp> ramps;
  for (const FacetState& f : facets_) {
    if (f.length() <= kPosTol) continue;
    long k;
    double r = reduce_pos(f.xi_minus, k);
    double len = f.length();
    double shift = kTwoPi * double(k);
    double w0v = f.omega_minus - shift, w1v = f.omega_plus - shift;
    if (r + len <= kTwoPi + 1e-12) {
      ramps.push_back({r, std::min(r + len, kTwoPi), w0v, w1v});
    } else {
      double frac = (kTwoPi - r) / len;
      double vmid = w0v + (w1v - w0v) * frac;
      ramps.push_back({r, kTwoPi, w0v, vmid});
      ramps.push_back({0.0, r + len - kTwoPi, vmid - kTwoPi, w1v - kTwoPi});
    }
  }
  std::sort(ramps.begin(), ramps.end(),
            [](const Ramp& a, const Ramp& b) { return a.lo < b.lo; });
  std::vector<PwPiece> pieces;
  double x = 0;
  std::size_t ri = 0;
  while (x < kTwoPi - 1e-12) {
    if (ri < ramps.size() && ramps[ri].lo <= x + 1e-12) {
      pieces.push_back(PwPiece{x, ramps[ri].hi, ramps[ri].v0, ramps[ri].v1});
      x = ramps[ri].hi;
      ++ri;
      continue;
    }
    double stop = (ri < ramps.size()) ? ramps[ri].lo : kTwoPi;
    // background: constant gap slope per frozen piece
    while (x < stop - 1e-12) {
      long lift;
      int idx = w0_.piece_after(x + 1e-13, lift);
      double far = std::min(stop, w0_.pieces()[idx].x1 + kTwoPi * double(lift));
      if (far <= x + 1e-13) {
        x += 1e-13;
        continue;
      }
      // Probe at an irrational fraction to dodge exact corner hits.
      double phim = w0_.phi_after(x + 0.3819660112501051 * (far - x));
      double v = J_.derivative(phim);
      pieces.push_back(PwPiece{x, far, v, v});
      x = far;
    }
  }
  if (!pieces.empty()) pieces.back().x1 = kTwoPi;
  return PwGraph(std::move(pieces));
}

double Tracker::jr_norm_current() const { return snapshot_profile().jr_norm(J_); }

Milestones Tracker::milestones() const {
  Milestones m;
  bool zero_alive = false;
  for (const FacetState& f : facets_)
    if (f.curvature == Curvature::zero) zero_alive = true;
  m.t_cx = zero_alive ? std::numeric_limits<double>::infinity() : t_cx_;
  m.t_fa = t_fa_;
  m.t_1 = t_1_;
  m.facet_counts = n_sequence_;
  m.epoch_times = t_sequence_;
  if (!std::isfinite(m.t_1) && asymptotic_samples_.size() >= 8) {
    // Linear fit of log(deviation) over the recorded tail.
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    int cnt = 0;
    for (const auto& [t, d] : asymptotic_samples_) {
      if (d <= 0) continue;
      sx += t;
      sy += std::log(d);
      sxx += t * t;
      sxy += t * std::log(d);
      ++cnt;
    }
    if (cnt >= 8) m.asymptotic_rate = -(double(cnt) * sxy - sx * sy) /
                                      (double(cnt) * sxx - sx * sx);
  }
  return m;
}

void Tracker::seed_singular_groups() {
  // Degenerate facets inside multi-member groups make the coupled system
  // singular at t=0; their first motion follows the similarity solution
  // tau_k = sigma_k * sqrt(t) against locally linear flanks.
  bool needed = false;
  for (const Group& g : groups_) {
    if (g.members.size() < 2) continue;
    for (int m : g.members)
      if (facets_[m].length() <= kPosTol && facets_[m].curvature != Curvature::zero)
        needed = true;
  }
  if (!needed) return;

  const double tb = kSeedTime;
  for (const Group& g : groups_) {
    if (g.members.size() < 2) continue;
    // Contiguous degenerate fans inside the group.
    std::size_t i = 0;
    while (i < g.members.size()) {
      if (facets_[g.members[i]].length() > kPosTol ||
          facets_[g.members[i]].curvature == Curvature::zero) {
        // Regular or frozen member: one explicit Euler step of size tb.
        FacetState& f = facets_[g.members[i]];
        if (f.curvature != Curvature::zero && f.length() > kPosTol)
          f.tau += f.d_omega() / f.length() * tb;
        ++i;
        continue;
      }
      std::size_t j = i;
      while (j + 1 < g.members.size() &&
             facets_[g.members[j + 1]].length() <= kPosTol &&
             facets_[g.members[j + 1]].curvature != Curvature::zero)
        ++j;
      // Fan members i..j share one point; flank slopes bound the fan.
      const int count = int(j - i + 1);
      double point = facets_[g.members[i]].a_minus;
      double p_left, p_right;
      if (i > 0) {
        p_left = facets_[g.members[i - 1]].alpha;
      } else {
        p_left = w0_.phi_before(point);
      }
      if (j + 1 < g.members.size()) {
        p_right = facets_[g.members[j + 1]].alpha;
      } else {
        p_right = w0_.phi_after(point);
      }
      std::vector<double> alpha(count), dOm(count), sigma(count);
      for (int q = 0; q < count; ++q) {
        alpha[q] = facets_[g.members[i + q]].alpha;
        dOm[q] = facets_[g.members[i + q]].d_omega();
      }
      // Initial guess from the decoupled single-facet similarity constant.
      for (int q = 0; q < count; ++q) {
        double lo = (q == 0) ? p_left : alpha[q - 1];
        double hi = (q + 1 == count) ? p_right : alpha[q + 1];
        double D = dOm[q] / (1.0 / (alpha[q] - lo) + 1.0 / (hi - alpha[q]));
        sigma[q] = (dOm[q] >= 0 ? 1.0 : -1.0) * std::sqrt(2.0 * std::fabs(D));
      }
      auto gaps_of = [&](const std::vector<double>& s, std::vector<double>& gp) {
        gp.assign(count, 0.0);
        // junction offsets from the shared point, in units of sqrt(t)
        std::vector<double> xoff(count + 1);
        xoff[0] = -s[0] / (alpha[0] - p_left);
        for (int q = 0; q + 1 < count; ++q)
          xoff[q + 1] = (s[q] - s[q + 1]) / (alpha[q + 1] - alpha[q]);
        xoff[count] = s[count - 1] / (p_right - alpha[count - 1]);
        for (int q = 0; q < count; ++q) gp[q] = xoff[q + 1] - xoff[q];
      };
      // Damped Newton on sigma_q * gap_q(sigma) = 2 * dOmega_q.
      std::vector<double> gp;
      for (int it = 0; it < 200; ++it) {
        gaps_of(sigma, gp);
        double fmax = 0;
        std::vector<double> fval(count);
        for (int q = 0; q < count; ++q) {
          fval[q] = sigma[q] * gp[q] - 2.0 * dOm[q];
          fmax = std::max(fmax, std::fabs(fval[q]));
        }
        if (fmax < 1e-13) break;
        // Finite-difference Jacobian (count <= 8, cost negligible).
        std::vector<std::vector<double>> Jm(count, std::vector<double>(count));
        for (int c = 0; c < count; ++c) {
          std::vector<double> sp = sigma;
          double hstep = 1e-7 * (1.0 + std::fabs(sigma[c]));
          sp[c] += hstep;
          std::vector<double> gpp;
          gaps_of(sp, gpp);
          for (int r = 0; r < count; ++r)
            Jm[r][c] = ((sp[r] * gpp[r] - 2.0 * dOm[r]) - fval[r]) / hstep;
        }
        // Gaussian elimination.
        std::vector<double> rhs = fval;
        for (int c = 0; c < count; ++c) {
          int piv = c;
          for (int r = c + 1; r < count; ++r)
            if (std::fabs(Jm[r][c]) > std::fabs(Jm[piv][c])) piv = r;
          std::swap(Jm[c], Jm[piv]);
          std::swap(rhs[c], rhs[piv]);
          for (int r = c + 1; r < count; ++r) {
            double fac = Jm[r][c] / Jm[c][c];
            for (int cc = c; cc < count; ++cc) Jm[r][cc] -= fac * Jm[c][cc];
            rhs[r] -= fac * rhs[c];
          }
        }
        std::vector<double> delta(count);
        for (int r = count - 1; r >= 0; --r) {
          double acc = rhs[r];
          for (int cc = r + 1; cc < count; ++cc) acc -= Jm[r][cc] * delta[cc];
          delta[r] = acc / Jm[r][r];
        }
        double damp = 1.0;
        for (int ls = 0; ls < 30; ++ls) {
          std::vector<double> cand = sigma;
          for (int q = 0; q < count; ++q) cand[q] -= damp * delta[q];
          gaps_of(cand, gp);
          bool ok = true;
          for (double gv : gp)
            if (!(gv > 0)) ok = false;
          if (ok) {
            sigma = cand;
            break;
          }
          damp *= 0.5;
        }
      }
      double root_t = std::sqrt(tb);
      for (int q = 0; q < count; ++q)
        facets_[g.members[i + q]].tau = sigma[q] * root_t;
      i = j + 1;
    }
  }
  time_ = tb;
  refresh_positions();
  set_positions_at(time_);
}

}  // namespace facetflow
