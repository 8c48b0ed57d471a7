#pragma once

#include <vector>

#include "facetflow/anisotropy.hpp"
#include "facetflow/profile.hpp"

namespace facetflow {

// Piecewise-linear multivalued function on an interval: contiguous linear
// pieces; a jump at a shared breakpoint is the closed interval between the
// one-sided limits. Degenerate single-point graphs are not represented.
struct PwPiece {
  double x0 = 0, x1 = 0;
  double v0 = 0, v1 = 0;
  bool constant(double tol = 0.0) const { return std::fabs(v1 - v0) <= tol; }
  double at(double x) const {
    if (x1 == x0) return 0.5 * (v0 + v1);
    return v0 + (v1 - v0) * (x - x0) / (x1 - x0);
  }
};

class PwGraph {
 public:
  PwGraph() = default;
  explicit PwGraph(std::vector<PwPiece> pieces);
  const std::vector<PwPiece>& pieces() const { return pieces_; }
  double lo() const { return pieces_.front().x0; }
  double hi() const { return pieces_.back().x1; }
  double before(double x) const;  // left limit
  double after(double x) const;   // right limit
  SlopeInterval value(double x) const;
  bool monotone(double tol = 1e-12) const;
  // Inverse of a monotone increasing graph (plateaus become jumps and
  // jumps become plateaus).
  PwGraph inverse() const;
  // A(s) for the derivative multifunction of a profile on [0, 2*pi].
  static PwGraph from_profile_derivative(const Profile& p);
  // The subdifferential of J as a graph over [phi_lo, phi_hi].
  static PwGraph from_subdifferential(const AnisotropyJ& J, double phi_lo, double phi_hi);

 private:
  std::vector<PwPiece> pieces_;
};

// Domain split of Definition-style composition: plateau intervals where the
// inner function is constant, multivalued points, and the residual.
struct DomainDecomposition {
  struct Plateau {
    double lo = 0, hi = 0;
    double value = 0;
  };
  std::vector<Plateau> plateaus;       // D_f
  std::vector<double> jump_points;     // D_s
  // D_r is the complement; listed as intervals for inspection.
  std::vector<std::pair<double, double>> residual;
};

DomainDecomposition decompose_domain(const PwGraph& a);

enum class PlateauClass { increasing, decreasing, convex, concave };

// Classification by strict comparison against the plateau value on the two
// adjacent pieces; throws if the inner function continues at the plateau
// value beyond the plateau (malformed input).
PlateauClass classify_plateau(const PwGraph& a, const DomainDecomposition::Plateau& p);

// The nonlocal composition of a monotone outer graph with a JR inner graph.
PwGraph compose(const PwGraph& outer, const PwGraph& a);
PwGraph compose(const AnisotropyJ& J, const PwGraph& a);

// Light JR validity for composition outputs: finitely many pieces by
// construction, finite total variation, and corner-gap structure.
std::vector<std::string> validate_jr_function(const PwGraph& f, const AnisotropyJ& J);

}  // namespace facetflow
