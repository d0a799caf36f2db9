"""Numerical tolerances and discretisation constants shared by all modules.

Call sites read these names instead of hard-coding numbers, so a single edit
here changes the behaviour of the whole library.
"""

# rank decisions on orthonormalised bases
RANK_TOL = 1e-10
# |Omega(u, v)| threshold for the Lagrangian predicate
LAGRANGIAN_TOL = 1e-10
# max |alpha pullback| accepted by the Legendrian check
LEGENDRIAN_TOL = 1e-8
# |moment map| accepted as "on the zero level"
ZERO_LEVEL_TOL = 1e-9
# residual accepted for polished roots of the return-element equations
SOLVER_RESIDUAL_TOL = 1e-9
# two roots closer than this in parameter space are the same root
DEDUP_RADIUS = 1e-6
# smallest principal angle between T_x Lambda and the orbit tangent
PRINCIPAL_ANGLE_MIN = 1e-3
# singular value threshold below which a solution set is considered degenerate
DEGENERACY_TOL = 1e-7

# uniform seeding grid for root finding, per circle factor
SEEDS_PER_CIRCLE = 64
# periodic trapezoid nodes per torus factor for orbit volumes
ORBIT_QUAD_NODES = 256
# state quadrature: max(MIN_QUAD_NODES, QUAD_NODES_PER_SQRT_K * ceil(sqrt(k)) * d)
MIN_QUAD_NODES = 256
QUAD_NODES_PER_SQRT_K = 8
# relative change tolerated when the quadrature node count is doubled
CONVERGENCE_RTOL = 1e-8
# fraction of the integrand bound c_k sum|w| below which a doubled value is round-off
ROUNDOFF_SCALE = 1e-6

# affine chart coordinates are accepted up to this norm
CHART_RADIUS = 10.0
# central finite-difference step for user-supplied maps
FD_STEP = 1e-6
