#pragma once

#include "facetflow/profile.hpp"

namespace facetflow {

// Named initial data. Every preset returns a profile that passes
// Profile::validate for the anisotropy it is built against.
namespace presets {

// phi0(s) = s with tangential facet seeds where s meets a corner mod 2*pi.
Profile parabola();
// Self-translating staircase (the asymptotic shape, unit upward speed).
Profile minimal();
// Orientation-reversed staircase datum.
Profile minimal_reversed();
// Kink at s = pi whose derivative jump straddles m corners, m in {1,2,3}.
Profile corner(int m);
// Non-convex datum with one zero-curvature facet (plateau at a corner that
// is a local maximum of phi).
Profile two_hump();
// Fully faceted four-facet profile with gaps pi/2 + e*(+1,-1,-1,+1).
Profile perturbed_square(double e = 0.15);
// Self-translating staircase for a general piecewise-linear J.
Profile polygon(const AnisotropyJ& J);
// Randomized strictly-increasing JR datum: wiggly phi with marked corner
// crossings and a few widened corner plateaus. With cut_clearance > 0 the
// corner crossings are kept at least that far from the coordinate cut at
// s = 0, so facets cannot reach the cut over a short horizon (pointwise
// phi bounds only make frame-independent sense in that regime).
Profile random_jr(Rng& rng, double cut_clearance = 0.0);

// A non-square test anisotropy (five corners, uneven weights).
AnisotropyJ pentagon();

}  // namespace presets
}  // namespace facetflow
