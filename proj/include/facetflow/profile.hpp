#pragma once

#include <string>
#include <vector>

#include "facetflow/anisotropy.hpp"
#include "facetflow/numerics.hpp"

#include "json.hpp"

namespace facetflow {

// One segment of the circular profile of w(s) = Lambda(s) + s^2/2.
// phi = w_s is stored on the universal cover: values grow by 2*pi over one
// trip around the circle, so a facet can carry a lifted corner value such as
// 5*pi/4 or -pi/4 depending on where it sits.
struct Segment {
  enum class Kind { facet, smooth };
  Kind kind = Kind::smooth;
  double lo = 0;
  double hi = 0;
  double alpha = 0;        // facet only; lifted corner value
  std::vector<double> x;   // smooth only; strictly increasing, x.front()==lo
  std::vector<double> phi; // smooth only; piecewise-linear node values

  static Segment facet(double lo, double hi, double alpha);
  static Segment smooth(std::vector<double> x, std::vector<double> phi);
};

struct XiComponent {
  double lo = 0;
  double hi = 0;           // may exceed 2*pi for a component wrapping past 0
  double alpha = 0;        // lifted corner value
  int corner_index = 0;
  long corner_period = 0;
  bool degenerate() const { return hi <= lo; }
};

// JR-class profile: circular ordered segment list covering [0, 2*pi) plus the
// height w(0). Immutable after construction.
class Profile {
 public:
  Profile(std::vector<Segment> segments, double base_height);

  const std::vector<Segment>& segments() const { return segments_; }
  double base_height() const { return base_height_; }
  double integral_phi() const { return integral_phi_; }

  double w(double s) const;            // s in [0, 2*pi]
  double phi_after(double s) const;    // right limit, s in [0, 2*pi)
  double phi_before(double s) const;   // left limit, s in (0, 2*pi]
  SlopeInterval partial_w(double s) const;  // s in [0, 2*pi)

  std::vector<XiComponent> xi_components(const AnisotropyJ& J) const;
  int facet_count(const AnisotropyJ& J) const;
  double tv_interval() const;          // total variation of phi over [0, 2*pi)
  double tv_cyclic() const;            // adds the wrap jump (mod 2*pi)
  double jr_norm(const AnisotropyJ& J) const;

  // Empty result means the profile is a valid JR datum.
  std::vector<std::string> validate(const AnisotropyJ& J) const;

  nlohmann::json to_json() const;
  static Profile from_json(const nlohmann::json& j);

 private:
  std::vector<Segment> segments_;
  double base_height_ = 0;
  double integral_phi_ = 0;
  std::vector<double> seg_w_;                   // w at each segment's lo
  std::vector<std::vector<double>> node_w_;     // per smooth segment, w at nodes
  int segment_at(double s) const;               // index with lo <= s (< hi or last)
};

// Flattened integrated view used by the solvers: w as contiguous quadratic
// pieces, evaluated on the universal cover.
struct WPiece {
  double x0 = 0, x1 = 0;
  double w0 = 0;     // w at x0
  double phi0 = 0;   // phi at x0
  double slope = 0;  // d phi / d x  (0 on facets)
  double phi_at(double x) const { return phi0 + slope * (x - x0); }
  double w_at(double x) const {
    double d = x - x0;
    return w0 + phi0 * d + 0.5 * slope * d * d;
  }
};

class PiecewiseW {
 public:
  PiecewiseW() = default;
  explicit PiecewiseW(const Profile& p);
  const std::vector<WPiece>& pieces() const { return pieces_; }
  double w(double x) const;           // any real x
  double phi_after(double x) const;   // right limit
  double phi_before(double x) const;  // left limit
  // Index of the piece owning [x, x+) after cover reduction, plus the lift.
  int piece_after(double x, long& lift) const;
  int piece_before(double x, long& lift) const;

 private:
  std::vector<WPiece> pieces_;  // partition of [0, 2*pi)
  double base_ = 0;
};

}  // namespace facetflow
