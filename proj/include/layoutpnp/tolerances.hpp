#pragma once

namespace layoutpnp {

// Numeric thresholds shared across modules. Tests reference these directly so
// the same values are used for checking and for computing.
struct Tolerances {
  // |q| accepted as unit without renormalizing.
  double quaternion_input = 1e-6;
  // Target precision of unit-norm invariants after renormalization.
  double unit_norm = 1e-9;
  // Smallest admissible projective depth for geom::project.
  double min_depth = 1e-9;
  // Relative second-eigenvalue threshold for collinear point sets.
  double collinear = 1e-9;
  // Depth clamp inside the differentiable projection used by the optimizer.
  double optimizer_depth_clamp = 1e-6;
};

inline constexpr Tolerances kTolerances{};

}  // namespace layoutpnp
