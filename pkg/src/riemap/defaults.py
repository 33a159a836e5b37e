"""Package-wide truncation defaults and tolerances.

All tolerances are pinned here (and mirrored in the acceptance suite); nothing
is left to later calibration.
"""

# Fourier / bidegree truncation
M_DEFAULT = 32          # max analytic degree of disc unknowns & loop modes
MB_DEFAULT = 32         # bidegree cap in zbar for disc functions
WORK_ZDEG_MARGIN = 8    # extra zeta-degree carried by interior recursions
WORK_ZBARDEG = 32       # interior zbar working degree; deviation order lam^k
                        # carries zbar-degrees up to ~5k, so 32 resolves the
                        # lam ladder (<= 0.05) beyond 1e-12


def grid_size(m: int, mb: int = MB_DEFAULT) -> int:
    """Circle grid size keeping products of boundary loops alias-free."""
    return 4 * (m + mb)


# rank / SVD decisions
RANK_REL_TOL = 1e-8
GAP_MIN = 1e3

# winding number
WINDING_MIN_MODULUS = 1e-8

# fixed-point extensions
FIXPOINT_TOL = 1e-12
FIXPOINT_MAXIT = 60

# Newton / continuation
BOUNDARY_TOL = 1e-10
UPDATE_TOL = 1e-11
NEWTON_MAXIT = 30
LAMBDA_STEP = 0.005
LAMBDA_MIN_STEP = 1e-4

# residual bounds for accepted discs
INTERIOR_PDE_TOL = 1e-9
REAL_FORM_TOL = 1e-8

# Levi form finite differences
LEVI_FD_STEP = 1e-4
