"""Numerical tolerances shared by every module of the lab."""

# Structural checks: norms, hermiticity, orthogonality, idempotence
ATOL = 1e-9

# Born probabilities that land just outside [0, 1] through rounding
CLAMP_TOL = 1e-12

# Schmidt weights and branch norms below this are treated as zero
ZERO_WEIGHT = 1e-12
