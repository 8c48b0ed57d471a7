#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "facetflow/anisotropy.hpp"
#include "facetflow/composition.hpp"
#include "facetflow/profile.hpp"

namespace facetflow {

enum class Curvature { convex, concave, zero };

// Per-facet evolution record within the current epoch. Positions live on the
// universal cover; the layout window starts at the first facet's left end
// inside [0, 2*pi) and later facets may run past 2*pi.
struct FacetState {
  int id = 0;
  double alpha = 0;  // lifted corner value
  int corner_index = 0;
  long corner_period = 0;
  double xi_minus = 0, xi_plus = 0;
  double tau = 0;
  double omega_minus = 0, omega_plus = 0;
  Curvature curvature = Curvature::convex;
  bool linked_left = false, linked_right = false;
  // Epoch anchors (endpoints and height at the epoch start).
  double a_minus = 0, a_plus = 0;
  double anchor_w_plus = 0;

  double d_omega() const { return omega_plus - omega_minus; }
  double length() const { return xi_plus - xi_minus; }
  // Height of the shifted facet line at x (epoch coordinates).
  double line(double x) const { return anchor_w_plus + alpha * (x - a_plus) + tau; }
};

struct EventRecord {
  enum class Kind {
    creation,          // degenerate facets seeded from the initial datum
    merge,             // two facets begin to interact (collision)
    zero_extinction,   // zero-curvature facet vanished inside a group
    collinear_merge,   // same-corner facets fused into one
    discard,           // part-B bookkeeping removal at t = 0
    full_faceting,
    asymptotic_entry,  // gaps reached delta-Omega within tolerance
  };
  double time = 0;
  Kind kind = Kind::creation;
  std::vector<int> facet_ids;
  int n_after = 0;
  std::string note;
};

struct Milestones {
  double t_cx = 0;                        // last zero-curvature extinction
  double t_fa = std::numeric_limits<double>::infinity();
  double t_1 = std::numeric_limits<double>::infinity();
  double asymptotic_rate = 0;             // fitted decay rate when t_1 is inf
  std::vector<int> facet_counts;          // N_i sequence
  std::vector<double> epoch_times;        // t_i sequence
};

// Value of the pyramid-sum functional on a cyclic gap vector.
double liapunov_value(const std::vector<double>& gaps, double d_omega);
// Nonnegative distance from the equal-gap state; zero exactly at equilibrium.
double liapunov_deviation(const std::vector<double>& gaps, double d_omega);

// Exact event-driven solver for the facet evolution (square anisotropy).
class Tracker {
 public:
  Tracker(const Profile& p0, const AnisotropyJ& J);

  double time() const { return time_; }
  const std::vector<FacetState>& facets() const { return facets_; }
  const std::vector<EventRecord>& events() const { return events_; }
  const PiecewiseW& frozen_w() const { return w0_; }
  double epoch_start() const { return epoch_start_; }

  void advance_to(double t);
  double eval_w(double x) const;     // x in [0, 2*pi), at the current time
  Profile snapshot_profile() const;  // re-frozen view at the current time
  PwGraph omega() const;             // slope section at the current time
  Milestones milestones() const;
  double jr_norm_current() const;

  // Gap vector of the final cyclic group (facet widths in order), empty when
  // the profile is not yet fully faceted.
  std::vector<double> cyclic_gaps() const;
  std::vector<double> tau_rates() const;  // d tau/dt per facet, current state

  // Called after every accepted integrator step inside groups.
  void set_step_monitor(std::function<void(double, const Tracker&)> cb) {
    monitor_ = std::move(cb);
  }

  // Endpoint positions of an isolated facet at a prescribed shift, solved
  // against the frozen profile (exposed for direct verification).
  std::pair<double, double> endpoints_at_tau(int facet_index, double tau) const;
  // Exact tau(dt) for an isolated facet, dt measured from the epoch start.
  double isolated_tau_at(int facet_index, double dt_from_epoch) const;

 private:
  struct Group {
    std::vector<int> members;
    bool cyclic = false;
  };

  AnisotropyJ J_;
  PiecewiseW w0_;
  double epoch_start_ = 0;
  double time_ = 0;
  std::vector<FacetState> facets_;
  std::vector<Group> groups_;
  std::vector<EventRecord> events_;
  std::vector<int> n_sequence_;
  std::vector<double> t_sequence_;
  double t_cx_ = 0;
  double t_fa_ = std::numeric_limits<double>::infinity();
  double t_1_ = std::numeric_limits<double>::infinity();
  double jr_norm_last_ = -1;
  bool saw_zero_curvature_ = false;
  int next_id_ = 0;
  std::vector<std::pair<double, double>> asymptotic_samples_;
  std::function<void(double, const Tracker&)> monitor_;

  void detect(const Profile& p, bool initial);
  void rebuild_groups();
  void seed_singular_groups();  // similarity bootstrap for degenerate fans
  double shift_root(double start, double w_start, double alpha, double tau, int dir,
                    double guard) const;
  double iso_G(const FacetState& f, double theta) const;
  void set_positions_at(double t);  // isolated facets from closed form
  void group_geometry(const Group& g, const std::vector<double>& tau_members,
                      std::vector<double>& xm, std::vector<double>& xp) const;
  void group_rhs(const std::vector<double>& tau, std::vector<double>& dtau) const;
  std::vector<double> pack_tau() const;
  void unpack_tau(const std::vector<double>& tau);
  void refresh_positions();
  std::vector<double> watch_values() const;
  double min_watch_at(double t, const std::vector<double>& tau_packed);
  // Advances everything to t (no events expected inside); integrates groups.
  void plain_advance(double t);
  // Earliest event in (time_, horizon]; returns time or nothing.
  std::optional<double> next_event_time(double horizon);
  void apply_events_now();
  void refreeze();
  void check_full_faceting();
  void update_asymptotic_state(double t_prev, double t_now);
  int facet_pos(int id) const;
};

}  // namespace facetflow
