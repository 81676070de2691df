"""Numerical tolerances and frozen calibration constants."""

# Projection / resolvent iterations
DYKSTRA_TOL = 1e-12
DYKSTRA_MAX_SWEEPS = 10_000
BISECTION_TOL = 1e-12
FIXED_POINT_TOL = 1e-12
FIXED_POINT_MAX_ITER = 500

# Membership tolerances
CONTAINS_TOL = 1e-10
NORMAL_CONE_TOL = 1e-10

# Interior-ball constants (anchor/radius/value-bound construction)
DEGENERATE_INTERIOR_TOL = 1e-8
VALUE_BOUND_MARGIN = 1.10     # sampled suprema are inflated by 10%
UNBOUNDED_RADIUS_CAP = 1e6    # stand-in radius when the domain has no boundary

# Graph sampling for monotonicity checks
MONOTONE_SAMPLE_LAMBDA = 1e-4
MONOTONE_PASS_TOL = -1e-9

# Pathwise solution-property checks.  The continuous-time inequalities pick up
# an O(sqrt(dt)) discretization error when paired at the left grid point; the
# slack tolerance is C * sqrt(dt) after normalizing by (1 + total variation).
# C was calibrated once on the four reference systems (reflected Brownian /
# Ornstein-Uhlenbeck on the half-line and on the unit disc, N = 2048,
# 100 paths) and then frozen with a 2x margin.
PROPERTY_SLACK_C = 0.5

# Kernel limits
KERNEL_MAX_DIM = 32
